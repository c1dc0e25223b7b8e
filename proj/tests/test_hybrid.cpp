// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sstream>

#include "mmw/channel.hpp"
#include "mmw/digital.hpp"
#include "mmw/hybrid.hpp"
#include "mmw/metrics.hpp"
#include "mmw/selftest.hpp"
#include "test_util.hpp"

using namespace mmw;
using mmw::testing::random_channels;
using mmw::testing::random_matrix;
using mmw::testing::random_unit_modulus;

namespace {

FactorizationTarget random_target(int n, int users, int k, int ns, double power, std::mt19937_64& rng) {
    MatrixGrid blocks(users);
    for (auto& u : blocks) {
        for (int i = 0; i < k; ++i) {
            u.push_back(random_matrix(n, ns, rng));
        }
    }
    return budget_target(std::move(blocks), power);
}

// Digital MMSE combiner target at desk scale over K subcarriers.
FactorizationTarget mmse_target(int n_subcarriers, std::uint64_t seed, SystemConfig* out_cfg = nullptr) {
    SystemConfig cfg;
    cfg.n_subcarriers = n_subcarriers;
    auto rng = make_rng(seed, 0, Stream::channel);
    const auto ch = generate_channel(cfg, rng);
    const DigitalFilterSet f = design_digital(ch.freq, cfg, CombinerKind::mmse, cfg.noise_var());
    if (out_cfg) {
        *out_cfg = cfg;
    }
    return budget_target(f.ul_combiners, cfg.stream_power());
}

bool unit_modulus(const CMatrix& rf) {
    for (Eigen::Index i = 0; i < rf.size(); ++i) {
        if (std::abs(std::abs(rf(i)) - 1.0) > 1e-14) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST(LsBaseband, FullRankSquareRfFactorsExactly) {
    std::mt19937_64 rng(1);
    FactorizationTarget t = random_target(6, 2, 3, 2, 1.0, rng);
    for (auto& u : t.blocks) {
        for (auto& b : u) {
            b *= 1.0 / b.norm();
        }
    }
    const CMatrix rf = random_unit_modulus(6, 6, rng);
    const BasebandResult r = ls_baseband(t, rf);
    for (int u = 0; u < 2; ++u) {
        for (int k = 0; k < 3; ++k) {
            EXPECT_LT((rf * r.bb[u][k] - t.blocks[u][k]).norm(), 1e-9);
        }
    }
}

TEST(LsBaseband, MatchesNormalEquations) {
    std::mt19937_64 rng(2);
    const FactorizationTarget t = random_target(8, 2, 2, 2, 0.25, rng);
    const CMatrix rf = random_unit_modulus(8, 3, rng);
    const BasebandResult r = ls_baseband(t, rf);
    const CMatrix gram = rf.adjoint() * rf;
    for (int u = 0; u < 2; ++u) {
        for (int k = 0; k < 2; ++k) {
            const CMatrix ne = gram.llt().solve(rf.adjoint() * t.blocks[u][k]);
            EXPECT_LT((r.bb[u][k] / r.theta[u][k] - ne).norm(), 1e-9 * ne.norm());
            EXPECT_NEAR((rf * r.bb[u][k]).squaredNorm(), 0.25, 1e-12);
        }
    }
}

TEST(LsBaseband, SpanMembersHaveZeroResidual) {
    std::mt19937_64 rng(3);
    const CMatrix rf = random_unit_modulus(8, 3, rng);
    const CMatrix block = rf * random_matrix(3, 2, rng);
    const FactorizationTarget t = norm_target({{block}});
    const BasebandResult r = ls_baseband(t, rf);
    EXPECT_NEAR(r.theta[0][0], 1.0, 1e-9);
    EXPECT_LT((rf * r.bb[0][0] - block).norm(), 1e-9 * block.norm());
}

TEST(LsBaseband, ZeroBlockRejected) {
    std::mt19937_64 rng(4);
    const CMatrix rf = random_unit_modulus(4, 2, rng);
    EXPECT_THROW(ls_baseband(budget_target({{CMatrix::Zero(4, 1)}}, 1.0), rf), std::domain_error);
}

TEST(Distortion, ZeroForCompliantTargetsInSpan) {
    std::mt19937_64 rng(5);
    const CMatrix rf = random_unit_modulus(8, 4, rng);
    MatrixGrid blocks(2);
    for (auto& u : blocks) {
        for (int k = 0; k < 3; ++k) {
            CMatrix b = rf * random_matrix(4, 2, rng);
            u.push_back(b * (0.5 / b.norm()));
        }
    }
    const FactorizationTarget t = budget_target(blocks, 0.25);
    EXPECT_NEAR(distortion(t, rf), 0.0, 1e-12);
    EXPECT_LT(distortion_gradient(t, rf).norm(), 1e-10);
}

TEST(Distortion, EqualsExplicitFactorizationError) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const FactorizationTarget t = random_target(10, 2, 3, 2, 0.3, rng);
        const CMatrix rf = random_unit_modulus(10, 3, rng);
        const BasebandResult r = ls_baseband(t, rf);
        double explicit_d = 0.0;
        for (int u = 0; u < 2; ++u) {
            for (int k = 0; k < 3; ++k) {
                explicit_d += (t.blocks[u][k] - rf * r.bb[u][k]).squaredNorm();
            }
        }
        EXPECT_NEAR(distortion(t, rf), explicit_d, 1e-9 * std::max(1.0, explicit_d));
    }
}

TEST(Distortion, NonNegative) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const FactorizationTarget t = random_target(6, 1, 2, 2, 0.1 + trial * 0.05, rng);
        EXPECT_GE(distortion(t, random_unit_modulus(6, 2, rng)), -1e-12);
    }
}

TEST(Gradient, VanishesWithFullRankSquareRf) {
    std::mt19937_64 rng(8);
    const FactorizationTarget t = random_target(5, 2, 2, 2, 0.5, rng);
    EXPECT_LT(distortion_gradient(t, random_unit_modulus(5, 5, rng)).norm(), 1e-9);
}

TEST(Gradient, MatchesFiniteDifferences) {
    const CheckResult r = check_gradient(default_gradient(), 10);
    EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Gradient, BrokenGradientIsCaught) {
    const GradientFn wrong = [](const FactorizationTarget& t, const CMatrix& rf) {
        return CMatrix(1.01 * distortion_gradient(t, rf));
    };
    EXPECT_FALSE(check_gradient(wrong, 3).passed);
}

TEST(EckartYoung, LowRankTargetIsReproduced) {
    std::mt19937_64 rng(9);
    const CMatrix f = random_matrix(12, 3, rng) * random_matrix(3, 20, rng);
    const EckartYoung ey = eckart_young(f, 4);
    EXPECT_LT((ey.approx - f).norm(), 1e-10 * f.norm());
    EXPECT_LT(ey.error2, 1e-18 * f.squaredNorm());
    EXPECT_TRUE(unit_modulus(ey.rf_init));
    EXPECT_EQ(ey.rf_init.cols(), 4);
}

TEST(EckartYoung, ErrorIsDiscardedEnergy) {
    std::mt19937_64 rng(10);
    const CMatrix f = random_matrix(10, 16, rng);
    const EckartYoung ey = eckart_young(f, 3);
    const Eigen::VectorXd s = Eigen::JacobiSVD<CMatrix>(f).singularValues();
    EXPECT_NEAR(ey.error2, s.tail(s.size() - 3).squaredNorm(), 1e-10 * f.squaredNorm());
    EXPECT_NEAR((f - ey.approx).squaredNorm(), ey.error2, 1e-10 * f.squaredNorm());
}

TEST(HdPg, FixedPointStaysPut) {
    // Target rf * B with DFT columns in rf and B = diag(4, 3, 2, 1) Q^H, so the
    // leading left singular vectors are the rf columns themselves.
    std::mt19937_64 rng(11);
    const CMatrix dft = build_dictionary(16, 16);
    const CMatrix rf = dft.middleCols(3, 4) * std::sqrt(16.0);
    const CMatrix q = random_matrix(8, 4, rng).householderQr().householderQ() * CMatrix::Identity(8, 4);
    Eigen::VectorXcd s(4);
    s << 4.0, 3.0, 2.0, 1.0;
    const CMatrix stacked = rf * s.asDiagonal() * q.adjoint();
    MatrixGrid blocks(1);
    for (int k = 0; k < 4; ++k) {
        blocks[0].push_back(stacked.middleCols(2 * k, 2));
    }
    const FactorizationTarget t = norm_target(blocks);
    const HdPgResult r = hd_pg(t, 4, FilterSide::bs_combiner, HdPgOptions{}, rng);
    EXPECT_LE(r.trace.entries.front().distortion, 1e-6 * t.stacked().squaredNorm());
    EXPECT_LE(r.trace.entries.back().distortion, 1e-6 * t.stacked().squaredNorm());
    for (int k = 0; k < 4; ++k) {
        EXPECT_LT((r.filter.block(0, k) - blocks[0][k]).norm(), 1e-6 * blocks[0][k].norm());
    }
}

TEST(HdPg, RandomStartReducesDistortion) {
    std::mt19937_64 rng(12);
    const FactorizationTarget t = mmse_target(4, 9);
    HdPgOptions opt;
    opt.init = HdPgInit::random;
    const HdPgResult r = hd_pg(t, 4, FilterSide::bs_combiner, opt, rng);
    EXPECT_LT(r.trace.entries.back().distortion, 0.5 * r.trace.entries.front().distortion);
}

TEST(HdPg, MonotoneAboveBoundWithExactPowers) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        SystemConfig cfg;
        const FactorizationTarget t = mmse_target(8, seed, &cfg);
        const double bound = eckart_young(t.stacked(), cfg.l_bs).error2;
        for (HdPgInit init : {HdPgInit::eckart_young, HdPgInit::random}) {
            HdPgOptions opt;
            opt.init = init;
            std::mt19937_64 rng(seed);
            const HdPgResult r = hd_pg(t, cfg.l_bs, FilterSide::bs_combiner, opt, rng);
            const auto& e = r.trace.entries;
            ASSERT_FALSE(e.empty());
            for (std::size_t i = 1; i < e.size(); ++i) {
                EXPECT_LE(e[i].distortion, e[i - 1].distortion);
            }
            EXPECT_GE(e.back().distortion, bound * (1.0 - 1e-12));
            EXPECT_TRUE(unit_modulus(r.filter.rf));
            for (std::size_t u = 0; u < t.blocks.size(); ++u) {
                for (std::size_t k = 0; k < t.blocks[u].size(); ++k) {
                    EXPECT_NEAR(r.filter.block(u, k).squaredNorm(), cfg.stream_power(), 1e-12);
                }
            }
            EXPECT_LE(e.size(), static_cast<std::size_t>(opt.max_iter) + 1);
        }
    }
}

TEST(HdPg, TraceCsvHasHeaderAndRows) {
    FactorizationTrace tr;
    tr.entries = {{0, 2.5, 0.0}, {1, 1.25, 0.5}};
    std::ostringstream os;
    tr.write_csv(os);
    const std::string text = os.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "iteration,distortion,step");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

TEST(AmPrecoder, SinglePathAlignsWithSteeringVector) {
    const CVector a_ms = steering_vector(8, 0.6);
    const CVector a_bs = steering_vector(32, -0.1);
    const CMatrix rf = am_rf_precoder({a_ms * a_bs.adjoint()}, 2);
    ASSERT_TRUE(unit_modulus(rf));
    // Column 1 equals the phases of a_ms up to one common rotation.
    const CVector p = phase_project(a_ms);
    EXPECT_NEAR(std::abs(p.dot(rf.col(0))), 8.0, 1e-9);
}

TEST(AmPrecoder, BeatsRandomRfOnEnergy) {
    SystemConfig cfg;
    int wins = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto rng = make_rng(trial, 0, Stream::channel);
        const auto ch = generate_channel(cfg, rng);
        const CMatrix rf = am_rf_precoder(ch.freq[0], cfg.l_ms);
        std::mt19937_64 r2(trial);
        const CMatrix rnd = random_unit_modulus(cfg.n_ms, cfg.l_ms, r2);
        double e_am = 0.0, e_rnd = 0.0;
        for (const auto& h : ch.freq[0]) {
            e_am += (h.adjoint() * rf).squaredNorm();
            e_rnd += (h.adjoint() * rnd).squaredNorm();
        }
        wins += e_am >= e_rnd ? 1 : 0;
    }
    EXPECT_GE(wins, 90);
}

TEST(AmPrecoder, HybridPrecodersMeetUserBudget) {
    SystemConfig cfg;
    auto rng = make_rng(3, 0, Stream::channel);
    const auto ch = generate_channel(cfg, rng);
    const auto pre = am_precoders(ch.freq, cfg, cfg.noise_var());
    ASSERT_EQ(pre.size(), 2u);
    for (const auto& f : pre) {
        EXPECT_TRUE(unit_modulus(f.rf));
        for (std::size_t k = 0; k < f.bb[0].size(); ++k) {
            EXPECT_LE(f.block(0, k).squaredNorm(), cfg.user_power() * (1.0 + 1e-9));
        }
    }
}

TEST(AmCombiner, FullRfSingleUserApproachesDigitalMmse) {
    std::mt19937_64 rng(12);
    const int n = 6;
    const MatrixGrid h = random_channels(1, 1, 3, n, rng);
    const MatrixGrid t = {{random_matrix(3, 2, rng)}};
    const double nv = 0.5;
    const CMatrix f_mmse = mmse_combiner({h[0][0]}, {t[0][0]}, nv).front();
    const CMatrix r_d = h[0][0].adjoint() * t[0][0];
    const CMatrix r_i = received_covariance({h[0][0]}, {t[0][0]}) + nv * CMatrix::Identity(n, n);
    const double digital = ul_mse_from_correlations(r_d, r_i, f_mmse);
    const AmResult r = am_combiner(h, t, n, CombinerKind::mmse, nv, 0.25);
    const double hybrid = ul_mse_scale_optimal(r_d, r_i, r.filter.block(0, 0));
    EXPECT_LE(hybrid, 1.05 * digital);
}

TEST(AmCombiner, SingleChainRankOneUsesCorrelationPhases) {
    std::mt19937_64 rng(13);
    const CVector a_bs = steering_vector(8, 0.3);
    const CVector a_ms = steering_vector(2, -0.4);
    const MatrixGrid h = {{a_ms * a_bs.adjoint()}};
    const MatrixGrid t = {{CMatrix(a_ms)}};
    const AmResult r = am_combiner(h, t, 1, CombinerKind::mrc, 0.1, 1.0);
    const CVector rd = h[0][0].adjoint() * t[0][0];
    const CVector p = phase_project(rd);
    EXPECT_NEAR(std::abs(p.dot(r.filter.rf.col(0))), 8.0, 1e-9);
}

TEST(AmCombiner, BestSoFarNonIncreasingAndPowerExact) {
    SystemConfig cfg;
    cfg.n_subcarriers = 4;
    auto rng = make_rng(4, 0, Stream::channel);
    const auto ch = generate_channel(cfg, rng);
    const auto t = ul_precoders(ch.freq, cfg, cfg.noise_var());
    for (CombinerKind kind : {CombinerKind::mmse, CombinerKind::mrc, CombinerKind::cb}) {
        const AmResult r = am_combiner(ch.freq, t, cfg.l_bs, kind, cfg.noise_var(), cfg.stream_power());
        ASSERT_FALSE(r.best_sum_mse.empty());
        for (std::size_t i = 1; i < r.best_sum_mse.size(); ++i) {
            EXPECT_LE(r.best_sum_mse[i], r.best_sum_mse[i - 1]);
        }
        EXPECT_TRUE(unit_modulus(r.filter.rf));
        for (int u = 0; u < cfg.n_users; ++u) {
            for (int k = 0; k < cfg.n_subcarriers; ++k) {
                EXPECT_NEAR(r.filter.block(u, k).squaredNorm(), cfg.stream_power(), 1e-12);
            }
        }
    }
}

TEST(MseBound, HoldsForFactorizedCombiners) {
    SystemConfig cfg;
    cfg.n_subcarriers = 2;
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto rng = make_rng(seed, 0, Stream::channel);
        const auto ch = generate_channel(cfg, rng);
        const double nv = cfg.noise_var();
        const auto t = ul_precoders(ch.freq, cfg, nv);
        const MatrixGrid f = design_combiners(ch.freq, t, CombinerKind::mmse, nv);
        std::mt19937_64 r2(seed);
        const HdPgResult hy = hd_pg(norm_target(f), cfg.l_bs, FilterSide::bs_combiner, HdPgOptions{}, r2);
        for (int k = 0; k < cfg.n_subcarriers; ++k) {
            const std::vector<CMatrix> hk = {ch.freq[0][k], ch.freq[1][k]};
            const std::vector<CMatrix> tk = {t[0][k], t[1][k]};
            const CMatrix r_i = received_covariance(hk, tk) + nv * CMatrix::Identity(cfg.n_bs, cfg.n_bs);
            for (std::size_t u = 0; u < 2; ++u) {
                const double mmse = ul_mse(hk, tk, f[u][k], nv, u);
                const CMatrix hyb = hy.filter.block(u, k);
                const double bound = mmse + (f[u][k] - hyb).squaredNorm() * r_i.trace().real();
                EXPECT_LE(ul_mse(hk, tk, hyb, nv, u), bound * (1.0 + 1e-12));
                ++checked;
            }
        }
    }
    EXPECT_EQ(checked, 40);
}
