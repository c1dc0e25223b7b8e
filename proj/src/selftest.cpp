// SPDX-License-Identifier: Apache-2.0

#include "mmw/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "mmw/channel.hpp"
#include "mmw/digital.hpp"
#include "mmw/estimation.hpp"
#include "mmw/metrics.hpp"
#include "mmw/sw_omp.hpp"
#include "mmw/training.hpp"

namespace mmw {

GradientFn default_gradient() {
    return [](const FactorizationTarget& t, const CMatrix& rf) { return distortion_gradient(t, rf); };
}

namespace {

CMatrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
    CMatrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            const double re = normal(rng);
            const double im = normal(rng);
            m(i, j) = {re, im};
        }
    }
    return m;
}

CMatrix random_phases(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    CMatrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            m(i, j) = std::polar(1.0, phase(rng));
        }
    }
    return m;
}

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(3) << std::scientific << v;
    return os.str();
}

template <typename F>
CheckResult timed(const std::string& name, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    CheckResult r;
    r.name = name;
    try {
        body(r);
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

}  // namespace

GradientProblem random_gradient_problem(int n_ant, int l_chains, int n_users, int n_subcarriers,
                                        std::mt19937_64& rng) {
    constexpr int n_streams = 2;
    MatrixGrid blocks(n_users);
    for (auto& user : blocks) {
        for (int k = 0; k < n_subcarriers; ++k) {
            user.push_back(gaussian_matrix(n_ant, n_streams, rng));
        }
    }
    GradientProblem p;
    p.target = budget_target(std::move(blocks), 1.0 / (n_users * n_streams));
    p.rf = random_phases(n_ant, l_chains, rng);
    return p;
}

CMatrix finite_difference_gradient(const FactorizationTarget& target, const CMatrix& rf, double h) {
    CMatrix g(rf.rows(), rf.cols());
    CMatrix x = rf;
    const cdouble unit_im(0.0, 1.0);
    for (Eigen::Index j = 0; j < rf.cols(); ++j) {
        for (Eigen::Index i = 0; i < rf.rows(); ++i) {
            const cdouble orig = x(i, j);
            x(i, j) = orig + h;
            const double re_plus = distortion(target, x);
            x(i, j) = orig - h;
            const double re_minus = distortion(target, x);
            x(i, j) = orig + unit_im * h;
            const double im_plus = distortion(target, x);
            x(i, j) = orig - unit_im * h;
            const double im_minus = distortion(target, x);
            x(i, j) = orig;
            g(i, j) = 0.5 * cdouble((re_plus - re_minus) / (2.0 * h), (im_plus - im_minus) / (2.0 * h));
        }
    }
    return g;
}

double gradient_relative_error(const FactorizationTarget& target, const CMatrix& rf,
                               const GradientFn& grad, double h) {
    const CMatrix fd = finite_difference_gradient(target, rf, h);
    const CMatrix an = grad(target, rf);
    if (an.rows() != fd.rows() || an.cols() != fd.cols()) {
        return std::numeric_limits<double>::infinity();
    }
    return (an - fd).norm() / fd.norm();
}

CheckResult check_gradient(const GradientFn& grad, int seeds) {
    return timed("gradient vs finite differences", [&](CheckResult& r) {
        double worst = 0.0;
        for (int s = 0; s < seeds; ++s) {
            auto rng = make_rng(1000 + static_cast<std::uint64_t>(s), 0, Stream::design);
            const GradientProblem p = random_gradient_problem(16, 3, 2, 4, rng);
            worst = std::max(worst, gradient_relative_error(p.target, p.rf, grad));
        }
        r.passed = worst <= 1e-5;
        r.detail = "max relative error " + format_double(worst) + " over " + std::to_string(seeds) +
                   " seeds (limit 1e-5)";
    });
}

namespace {

// Digital MMSE combiners and precoders for one desk-scale channel.
struct DeskInstance {
    SystemConfig cfg;
    ChannelRealization ch;
    MatrixGrid precoders;
    MatrixGrid combiners;
};

DeskInstance desk_instance(std::uint64_t seed, GridMode grid) {
    DeskInstance d;
    d.cfg = desk_profile();
    d.cfg.seed = seed;
    d.cfg.grid_mode = grid;
    auto rng = make_rng(seed, 0, Stream::channel);
    d.ch = generate_channel(d.cfg, rng);
    const DigitalFilterSet f = design_digital(d.ch.freq, d.cfg, CombinerKind::mmse, d.cfg.noise_var());
    d.precoders = f.ul_precoders;
    d.combiners = f.ul_combiners;
    return d;
}

CheckResult check_hd_pg() {
    return timed("hd-pg monotone and above truncation bound", [](CheckResult& r) {
        r.passed = true;
        double min_gap = std::numeric_limits<double>::infinity();
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            const DeskInstance d = desk_instance(seed, GridMode::off_grid);
            const FactorizationTarget target = budget_target(d.combiners, d.cfg.stream_power());
            const double bound = eckart_young(target.stacked(), d.cfg.l_bs).error2;
            for (HdPgInit init : {HdPgInit::random, HdPgInit::eckart_young}) {
                HdPgOptions opt;
                opt.init = init;
                auto rng = make_rng(seed, 0, Stream::design);
                const HdPgResult res = hd_pg(target, d.cfg.l_bs, FilterSide::bs_combiner, opt, rng);
                const auto& e = res.trace.entries;
                for (std::size_t i = 1; i < e.size(); ++i) {
                    r.passed = r.passed && e[i].distortion <= e[i - 1].distortion;
                }
                // The LS baseband realizes the final distortion exactly.
                const double realized = (target.stacked() - hstack(res.filter.product())).squaredNorm();
                r.passed = r.passed && std::abs(realized - e.back().distortion) <= 1e-9 * std::max(1.0, realized);
                r.passed = r.passed && realized >= bound * (1.0 - 1e-9);
                min_gap = std::min(min_gap, realized - bound);
                for (const auto& user : res.filter.bb) {
                    for (std::size_t k = 0; k < user.size(); ++k) {
                        const double p = (res.filter.rf * user[k]).squaredNorm();
                        r.passed = r.passed && std::abs(p - d.cfg.stream_power()) <= 1e-12;
                    }
                }
                r.passed = r.passed && (res.filter.rf.cwiseAbs().array() - 1.0).abs().maxCoeff() <= 1e-12;
            }
        }
        r.detail = "3 channels x 2 initializers, min(final - bound) = " + format_double(min_gap);
    });
}

CheckResult check_oracle_omp() {
    return timed("sw-omp matches exhaustive subset search", [](CheckResult& r) {
        int agree = 0;
        constexpr int trials = 20;
        for (int t = 0; t < trials; ++t) {
            auto rng = make_rng(77, static_cast<std::uint64_t>(t), Stream::design);
            const CMatrix upsilon = gaussian_matrix(32, 12, rng);
            std::uniform_int_distribution<int> pick(0, 11);
            int a = pick(rng);
            int b = pick(rng);
            while (b == a) {
                b = pick(rng);
            }
            std::vector<CVector> y;
            for (int k = 0; k < 4; ++k) {
                const CMatrix g = gaussian_matrix(2, 1, rng);
                y.push_back(upsilon.col(a) * g(0, 0) + upsilon.col(b) * g(1, 0));
            }
            const SparseEstimate est = sw_omp(y, upsilon, 1e-20, 2);
            double best = std::numeric_limits<double>::infinity();
            std::pair<int, int> best_pair{-1, -1};
            for (int i = 0; i < 12; ++i) {
                for (int j = i + 1; j < 12; ++j) {
                    CMatrix s(32, 2);
                    s << upsilon.col(i), upsilon.col(j);
                    double res = 0.0;
                    for (const CVector& v : y) {
                        res += (v - s * s.colPivHouseholderQr().solve(v)).squaredNorm();
                    }
                    if (res < best) {
                        best = res;
                        best_pair = {i, j};
                    }
                }
            }
            std::vector<std::size_t> got = est.support;
            std::sort(got.begin(), got.end());
            agree += got.size() == 2 && static_cast<int>(got[0]) == best_pair.first &&
                     static_cast<int>(got[1]) == best_pair.second;
        }
        r.passed = agree == trials;
        r.detail = std::to_string(agree) + "/" + std::to_string(trials) + " instances agree";
    });
}

CheckResult check_exact_recovery() {
    return timed("noiseless on-grid uplink recovery", [](CheckResult& r) {
        SystemConfig cfg = desk_profile();
        cfg.grid_mode = GridMode::on_grid;
        auto ch_rng = make_rng(5, 0, Stream::channel);
        const ChannelRealization ch = generate_channel(cfg, ch_rng);
        auto tr_rng = make_rng(5, 0, Stream::training);
        const TrainingEnsemble ens = generate_training(cfg, tr_rng);
        auto n_rng = make_rng(5, 0, Stream::noise);
        const LinkEstimate est = estimate_uplink(ch, cfg, ens, 0.0, n_rng);
        std::vector<std::size_t> got = est.sparse.front().support;
        std::sort(got.begin(), got.end());
        const bool support_ok = got == multiuser_virtual_support(ch, cfg);
        const double nmse_db = linear_to_db(est.nmse);
        r.passed = support_ok && nmse_db <= -80.0;
        r.detail = std::string("support ") + (support_ok ? "exact" : "wrong") + ", NMSE " +
                   format_double(nmse_db) + " dB";
    });
}

CheckResult check_waterfill() {
    return timed("waterfilling KKT", [](CheckResult& r) {
        double worst_level = 0.0;
        double worst_budget = 0.0;
        for (int t = 0; t < 50; ++t) {
            auto rng = make_rng(9, static_cast<std::uint64_t>(t), Stream::design);
            std::exponential_distribution<double> gain(1.0);
            RVector g(6);
            for (Eigen::Index i = 0; i < g.size(); ++i) {
                g(i) = gain(rng);
            }
            const double power = 0.1 + gain(rng);
            const RVector p = waterfill(g, power);
            worst_budget = std::max(worst_budget, std::abs(p.sum() - power));
            double level = -1.0;
            for (Eigen::Index i = 0; i < g.size(); ++i) {
                if (p(i) > 0.0) {
                    const double mu = p(i) + 1.0 / g(i);
                    if (level >= 0.0) {
                        worst_level = std::max(worst_level, std::abs(mu - level));
                    }
                    level = mu;
                }
            }
            for (Eigen::Index i = 0; i < g.size(); ++i) {
                if (p(i) == 0.0 && 1.0 / g(i) < level - 1e-9) {
                    worst_level = std::max(worst_level, level - 1.0 / g(i));
                }
            }
        }
        r.passed = worst_level <= 1e-9 && worst_budget <= 1e-12;
        r.detail = "level spread " + format_double(worst_level) + ", budget error " +
                   format_double(worst_budget);
    });
}

CheckResult check_combiners() {
    return timed("mmse optimality, cb nulling, mse bound", [](CheckResult& r) {
        r.passed = true;
        int bound_ok = 0;
        int total = 0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const DeskInstance d = desk_instance(seed, GridMode::off_grid);
            const double nv = d.cfg.noise_var();
            HdPgOptions opt;
            auto rng = make_rng(seed, 0, Stream::design);
            const HdPgResult hyb = hd_pg(budget_target(d.combiners, d.cfg.stream_power()), d.cfg.l_bs,
                                         FilterSide::bs_combiner, opt, rng);
            for (std::size_t k = 0; k < d.ch.n_subcarriers(); ++k) {
                std::vector<CMatrix> h_k, t_k;
                for (std::size_t u = 0; u < d.ch.n_users(); ++u) {
                    h_k.push_back(d.ch.freq[u][k]);
                    t_k.push_back(d.precoders[u][k]);
                }
                CMatrix r_i = received_covariance(h_k, t_k);
                r_i.diagonal().array() += nv;
                const double r_half2 = r_i.trace().real();  // ||R_I^{1/2}||_F^2
                for (std::size_t u = 0; u < d.ch.n_users(); ++u) {
                    const double mmse = ul_mse(h_k, t_k, d.combiners[u][k], nv, u);
                    const double mrc = ul_mse(h_k, t_k, mrc_combiner(h_k[u], t_k[u]), nv, u);
                    const CbCombiner cb = cb_combiner(h_k, t_k, u);
                    const double cbm = ul_mse(h_k, t_k, cb.f, nv, u);
                    r.passed = r.passed && mmse <= mrc + 1e-12 && mmse <= cbm + 1e-12;
                    const CMatrix r_bar = received_covariance(h_k, t_k, u);
                    if (!cb.fallback) {
                        r.passed = r.passed && (cb.f.adjoint() * r_bar * cb.f).norm() <=
                                                   1e-8 * r_bar.norm() * cb.f.squaredNorm() + 1e-300;
                    }
                    const CMatrix f_h = hyb.filter.block(u, k);
                    const double mse_h = ul_mse(h_k, t_k, f_h, nv, u);
                    const double e2 = (d.combiners[u][k] - f_h).squaredNorm();
                    bound_ok += mse_h <= mmse + e2 * r_half2 + 1e-12;
                    ++total;
                }
            }
        }
        r.passed = r.passed && bound_ok == total;
        r.detail = "mse bound held on " + std::to_string(bound_ok) + "/" + std::to_string(total) + " blocks";
    });
}

}  // namespace

std::vector<CheckResult> run_selftest(const GradientFn& grad) {
    std::vector<CheckResult> out;
    out.push_back(check_gradient(grad ? grad : default_gradient()));
    out.push_back(check_hd_pg());
    out.push_back(check_oracle_omp());
    out.push_back(check_exact_recovery());
    out.push_back(check_waterfill());
    out.push_back(check_combiners());
    return out;
}

void print_report(std::ostream& os, const std::vector<CheckResult>& results) {
    std::size_t width = 0;
    for (const auto& r : results) {
        width = std::max(width, r.name.size());
    }
    int failed = 0;
    for (const auto& r : results) {
        os << (r.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(static_cast<int>(width) + 2)
           << r.name << std::right << std::fixed << std::setprecision(2) << std::setw(7) << r.seconds
           << " s  " << r.detail << '\n';
        failed += r.passed ? 0 : 1;
    }
    os << (failed == 0 ? "all " + std::to_string(results.size()) + " checks passed"
                       : std::to_string(failed) + " of " + std::to_string(results.size()) +
                             " checks failed")
       << '\n';
}

}  // namespace mmw
