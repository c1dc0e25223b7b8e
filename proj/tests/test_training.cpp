// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <numbers>

#include "mmw/channel.hpp"
#include "mmw/training.hpp"
#include "test_util.hpp"

using namespace mmw;

namespace {

SystemConfig small_config() {
    SystemConfig cfg;
    cfg.n_bs = 8;
    cfg.n_ms = 4;
    cfg.l_bs = 4;
    cfg.l_ms = 2;
    cfg.n_streams = 1;
    cfg.g_bs = 16;
    cfg.g_ms = 8;
    cfg.n_subcarriers = 4;
    cfg.n_delay_taps = 4;
    cfg.n_frames = 6;
    return cfg;
}

bool phase_on_lattice(cdouble z, int bits) {
    const double step = 2.0 * std::numbers::pi / (1 << bits);
    double ph = std::arg(z);
    if (ph < 0) {
        ph += 2.0 * std::numbers::pi;
    }
    const double r = ph / step;
    return std::abs(r - std::round(r)) < 1e-9;
}

}  // namespace

TEST(Training, BinaryPhasesAreSigns) {
    std::mt19937_64 rng(1);
    const CMatrix m = random_quantized_phases(6, 5, 1, rng);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        EXPECT_TRUE(m(i) == cdouble(1.0, 0.0) || m(i) == cdouble(-1.0, 0.0)) << m(i);
    }
}

TEST(Training, UnitModulusQuantizedEntries) {
    SystemConfig cfg = small_config();
    auto rng = make_rng(1, 0, Stream::training);
    const TrainingEnsemble ens = generate_training(cfg, rng);
    ASSERT_EQ(ens.n_frames(), static_cast<std::size_t>(cfg.n_frames));
    for (std::size_t m = 0; m < ens.n_frames(); ++m) {
        for (Eigen::Index i = 0; i < ens.rx_combiners[m].size(); ++i) {
            EXPECT_EQ(std::abs(ens.rx_combiners[m](i)), 1.0);
            EXPECT_TRUE(phase_on_lattice(ens.rx_combiners[m](i), cfg.n_quant_bits));
        }
        for (std::size_t t = 0; t < ens.n_transmitters(); ++t) {
            for (Eigen::Index i = 0; i < ens.tx_precoders[t][m].size(); ++i) {
                EXPECT_EQ(std::abs(ens.tx_precoders[t][m](i)), 1.0);
            }
            EXPECT_NEAR(ens.modulation[t][m].norm(), 1.0, 1e-12);
            EXPECT_NEAR(ens.tx_vectors[t][m].squaredNorm(), cfg.user_power(), 1e-12);
        }
        for (cdouble s : ens.pilots[m]) {
            EXPECT_NEAR(std::abs(s), 1.0, 1e-15);
        }
    }
    // Precoders change from frame to frame.
    EXPECT_NE(ens.tx_precoders[0][0], ens.tx_precoders[0][1]);
}

TEST(Training, NoiseCovarianceIsBlockGram) {
    SystemConfig cfg = small_config();
    auto rng = make_rng(2, 0, Stream::training);
    const TrainingEnsemble ens = generate_training(cfg, rng);
    const CMatrix cw = ens.noise_covariance();
    for (std::size_t m = 0; m < ens.n_frames(); ++m) {
        const CMatrix f = ens.rx_combiners[m];
        const auto at = static_cast<Eigen::Index>(m) * cfg.l_bs;
        EXPECT_LT((cw.block(at, at, cfg.l_bs, cfg.l_bs) - f.adjoint() * f).norm(), 1e-12);
    }
    EXPECT_EQ(hermitian_rank(cw), static_cast<std::size_t>(cw.rows()));
}

TEST(Training, MeasurementMatrixRowBlocksAreKronecker) {
    SystemConfig cfg = small_config();
    auto rng = make_rng(3, 0, Stream::training);
    const TrainingEnsemble ens = generate_training(cfg, rng);
    const CMatrix phi = ens.measurement_matrix();
    for (std::size_t m = 0; m < ens.n_frames(); ++m) {
        CMatrix row(1, cfg.n_users * cfg.n_ms);
        for (std::size_t t = 0; t < ens.n_transmitters(); ++t) {
            // T q rescaled to the per-user training power.
            const CVector x = ens.tx_precoders[t][m] * ens.modulation[t][m];
            row.middleCols(static_cast<Eigen::Index>(t) * cfg.n_ms, cfg.n_ms) =
                (std::sqrt(cfg.user_power()) / x.norm()) * x.transpose();
        }
        const CMatrix expected = kron(row, ens.rx_combiners[m].adjoint());
        const auto at = static_cast<Eigen::Index>(m) * cfg.l_bs;
        EXPECT_LT((phi.middleRows(at, cfg.l_bs) - expected).norm(), 1e-12);
    }
}

TEST(Training, SeedDeterminism) {
    SystemConfig cfg = small_config();
    auto a = make_rng(4, 1, Stream::training);
    auto b = make_rng(4, 1, Stream::training);
    EXPECT_EQ(generate_training(cfg, a).measurement_matrix(), generate_training(cfg, b).measurement_matrix());
}

TEST(Training, NoiselessMeasurementsAreLinearInChannel) {
    SystemConfig cfg = small_config();
    auto crng = make_rng(5, 0, Stream::channel);
    auto trng = make_rng(5, 0, Stream::training);
    auto nrng = make_rng(5, 0, Stream::noise);
    const auto ch = generate_channel(cfg, crng);
    const TrainingEnsemble ens = generate_training(cfg, trng);
    const auto y = simulate_uplink_training(ch, ens, 0.0, nrng);
    const CMatrix phi = ens.measurement_matrix();
    for (int k = 0; k < cfg.n_subcarriers; ++k) {
        CVector v(phi.cols());
        Eigen::Index at = 0;
        for (int u = 0; u < cfg.n_users; ++u) {
            const CMatrix hu = ch.uplink(u, k);
            v.segment(at, hu.size()) = Eigen::Map<const CVector>(hu.data(), hu.size());
            at += hu.size();
        }
        EXPECT_LT((y[k] - phi * v).norm(), 1e-10 * std::max(1.0, y[k].norm()));
    }
}

TEST(Training, ZeroChannelZeroNoiseGivesZero) {
    SystemConfig cfg = small_config();
    auto trng = make_rng(6, 0, Stream::training);
    auto nrng = make_rng(6, 0, Stream::noise);
    const TrainingEnsemble ens = generate_training(cfg, trng);
    MatrixGrid links(cfg.n_users, std::vector<CMatrix>(cfg.n_subcarriers, CMatrix::Zero(cfg.n_bs, cfg.n_ms)));
    for (const auto& yk : simulate_training(links, ens, 0.0, nrng)) {
        EXPECT_EQ(yk.norm(), 0.0);
    }
}

TEST(Training, SensingMatrixEqualsMeasurementTimesDictionary) {
    SystemConfig cfg = small_config();
    auto trng = make_rng(7, 0, Stream::training);
    const TrainingEnsemble ens = generate_training(cfg, trng);
    const CMatrix a_bs = build_dictionary(cfg.n_bs, cfg.g_bs);
    const CMatrix a_ms = build_dictionary(cfg.n_ms, cfg.g_ms);
    const CMatrix psi_u = kron(a_ms.conjugate(), a_bs);
    CMatrix psi = CMatrix::Zero(psi_u.rows() * cfg.n_users, psi_u.cols() * cfg.n_users);
    for (int u = 0; u < cfg.n_users; ++u) {
        psi.block(u * psi_u.rows(), u * psi_u.cols(), psi_u.rows(), psi_u.cols()) = psi_u;
    }
    const CMatrix ups = sensing_matrix(ens, a_bs, std::vector<CMatrix>(cfg.n_users, a_ms));
    EXPECT_LT(mmw::testing::rel_diff(ups, ens.measurement_matrix() * psi), 1e-12);
}

TEST(Whitening, OrthonormalCombinersAreAlreadyWhite) {
    SystemConfig cfg = small_config();
    auto trng = make_rng(8, 0, Stream::training);
    TrainingEnsemble ens = generate_training(cfg, trng);
    const CMatrix dft = build_dictionary(cfg.n_bs, cfg.n_bs);
    for (std::size_t m = 0; m < ens.n_frames(); ++m) {
        ens.rx_combiners[m] = dft.leftCols(cfg.l_bs);
        ens.cw_blocks[m] = ens.rx_combiners[m].adjoint() * ens.rx_combiners[m];
        ens.dw_blocks[m] = cholesky(ens.cw_blocks[m]);
    }
    std::mt19937_64 rng(1);
    const CMatrix a = mmw::testing::random_matrix(static_cast<int>(ens.n_measurements()), 3, rng);
    EXPECT_LT((whiten(ens, a) - a).norm(), 1e-12);
}

TEST(Whitening, WhitenedNoiseHasScaledIdentityCovariance) {
    SystemConfig cfg = small_config();
    cfg.n_frames = 2;
    cfg.n_subcarriers = 1;
    auto trng = make_rng(9, 0, Stream::training);
    auto nrng = make_rng(9, 0, Stream::noise);
    const TrainingEnsemble ens = generate_training(cfg, trng);
    const double noise_var = 0.3;
    MatrixGrid links(cfg.n_users, {CMatrix::Zero(cfg.n_bs, cfg.n_ms)});
    const auto n = static_cast<Eigen::Index>(ens.n_measurements());
    CMatrix raw = CMatrix::Zero(n, n);
    CMatrix white = CMatrix::Zero(n, n);
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) {
        const CVector y = simulate_training(links, ens, noise_var, nrng).front();
        const CVector w = whiten(ens, std::vector<CVector>{y}).front();
        raw += y * y.adjoint();
        white += w * w.adjoint();
    }
    raw /= draws;
    white /= draws;
    const CMatrix cw = noise_var * ens.noise_covariance();
    EXPECT_LT((raw - cw).norm(), 0.1 * cw.norm());
    const CMatrix id = noise_var * CMatrix::Identity(n, n);
    EXPECT_LT((white - id).norm(), 0.1 * id.norm());
}

TEST(Downlink, OneEnsemblePerUserWithSharedBsVectors) {
    SystemConfig cfg = small_config();
    auto rng = make_rng(10, 0, Stream::downlink_training);
    const auto ens = generate_downlink_training(cfg, rng);
    ASSERT_EQ(ens.size(), static_cast<std::size_t>(cfg.n_users));
    for (const auto& e : ens) {
        EXPECT_EQ(e.n_rx, cfg.n_ms);
        EXPECT_EQ(e.l_rx, cfg.l_ms);
        ASSERT_EQ(e.n_transmitters(), 1u);
        EXPECT_EQ(e.tx_vectors[0][0], ens[0].tx_vectors[0][0]);
        EXPECT_NEAR(e.tx_vectors[0][0].squaredNorm(), cfg.user_power(), 1e-12);
    }
}

TEST(Training, TinyArraysWithBinaryPhasesKeepCombinersFullRank) {
    SystemConfig cfg = small_config();
    cfg.n_bs = 3;
    cfg.l_bs = 2;
    cfg.n_ms = 2;
    cfg.l_ms = 2;
    cfg.n_quant_bits = 1;
    cfg.n_frames = 40;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        const TrainingEnsemble ul = generate_training(cfg, rng);
        const auto dl = generate_downlink_training(cfg, rng);
        for (const TrainingEnsemble* ens : {&ul, &dl[0], &dl[1]}) {
            for (const CMatrix& cw : ens->cw_blocks) {
                const Eigen::SelfAdjointEigenSolver<CMatrix> es(cw);
                EXPECT_GT(es.eigenvalues().minCoeff(), 1e-6);
            }
        }
    }
}
