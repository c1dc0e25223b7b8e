// SPDX-License-Identifier: Apache-2.0

#include "mmw/hybrid.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "mmw/metrics.hpp"
#include "mmw/training.hpp"

namespace mmw {

MatrixGrid HybridFilter::product() const {
    MatrixGrid out(bb.size());
    for (std::size_t u = 0; u < bb.size(); ++u) {
        for (const CMatrix& b : bb[u]) {
            out[u].push_back(rf * b);
        }
    }
    return out;
}

void FactorizationTrace::write_csv(std::ostream& os) const {
    const auto old = os.precision(17);
    os << "iteration,distortion,step\n";
    for (const TraceEntry& e : entries) {
        os << e.iteration << ',' << e.distortion << ',' << e.step << '\n';
    }
    os.precision(old);
}

FactorizationTarget budget_target(MatrixGrid blocks, double power) {
    FactorizationTarget t;
    for (const auto& user : blocks) {
        t.power.emplace_back(user.size(), power);
    }
    t.blocks = std::move(blocks);
    return t;
}

FactorizationTarget norm_target(MatrixGrid blocks) {
    FactorizationTarget t;
    for (const auto& user : blocks) {
        std::vector<double> p;
        for (const CMatrix& b : user) {
            p.push_back(b.squaredNorm());
        }
        t.power.push_back(std::move(p));
    }
    t.blocks = std::move(blocks);
    return t;
}

namespace {

// Cholesky of F_RF^H F_RF; throws when F_RF is numerically rank deficient.
Eigen::LLT<CMatrix> rf_gram(const CMatrix& rf) {
    const CMatrix gram = rf.adjoint() * rf;
    Eigen::LLT<CMatrix> llt(gram);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-12) {
        throw NumericError("hybrid: RF matrix is rank deficient");
    }
    return llt;
}

// ||A_{u,k}||_F for every block, A = L^{-1} F_RF^H F with F_RF^H F_RF = L L^H.
std::vector<std::vector<double>> projection_norms(const FactorizationTarget& target,
                                                  const CMatrix& rf,
                                                  const Eigen::LLT<CMatrix>& llt) {
    std::vector<std::vector<double>> out;
    for (const auto& user : target.blocks) {
        std::vector<double> norms;
        for (const CMatrix& f : user) {
            const CMatrix a = llt.matrixL().solve(rf.adjoint() * f);
            norms.push_back(a.norm());
        }
        out.push_back(std::move(norms));
    }
    return out;
}

CMatrix pad_columns(const CMatrix& cols, int l_chains) {
    if (cols.cols() >= l_chains) {
        return cols.leftCols(l_chains);
    }
    // Fill missing chains with DFT columns, which are unit modulus.
    const Eigen::Index n = cols.rows();
    CMatrix out(n, l_chains);
    out.leftCols(cols.cols()) = cols;
    for (Eigen::Index j = cols.cols(); j < l_chains; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            out(i, j) = std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(i * j) /
                                            static_cast<double>(n));
        }
    }
    return out;
}

double distortion_or_inf(const FactorizationTarget& target, const CMatrix& rf) {
    try {
        return distortion(target, rf);
    } catch (const NumericError&) {
        return std::numeric_limits<double>::infinity();
    }
}

}  // namespace

BasebandResult ls_baseband(const FactorizationTarget& target, const CMatrix& rf) {
    const CMatrix rf_pinv = pinv(rf);
    BasebandResult out;
    for (std::size_t u = 0; u < target.blocks.size(); ++u) {
        std::vector<CMatrix> bbs;
        std::vector<double> thetas;
        for (std::size_t k = 0; k < target.blocks[u].size(); ++k) {
            CMatrix bb = rf_pinv * target.blocks[u][k];
            const double n = (rf * bb).norm();
            if (n == 0.0) {
                throw std::domain_error("ls_baseband: block projects to zero");
            }
            const double theta = std::sqrt(target.power[u][k]) / n;
            bbs.push_back(bb * theta);
            thetas.push_back(theta);
        }
        out.bb.push_back(std::move(bbs));
        out.theta.push_back(std::move(thetas));
    }
    return out;
}

double distortion(const FactorizationTarget& target, const CMatrix& rf) {
    const auto llt = rf_gram(rf);
    const auto norms = projection_norms(target, rf, llt);
    double d = 0.0;
    for (std::size_t u = 0; u < target.blocks.size(); ++u) {
        for (std::size_t k = 0; k < target.blocks[u].size(); ++k) {
            const double c = target.power[u][k];
            d += target.blocks[u][k].squaredNorm() - 2.0 * std::sqrt(c) * norms[u][k] + c;
        }
    }
    return d;
}

CMatrix distortion_gradient(const FactorizationTarget& target, const CMatrix& rf, int* skipped) {
    const auto llt = rf_gram(rf);
    const auto norms = projection_norms(target, rf, llt);
    // m = sum_{u,k} w_{u,k} F F^H F_RF with w = sqrt(c) / ||A||.
    CMatrix m = CMatrix::Zero(rf.rows(), rf.cols());
    int skip = 0;
    for (std::size_t u = 0; u < target.blocks.size(); ++u) {
        for (std::size_t k = 0; k < target.blocks[u].size(); ++k) {
            if (norms[u][k] == 0.0) {
                ++skip;
                continue;
            }
            const CMatrix& f = target.blocks[u][k];
            const double w = std::sqrt(target.power[u][k]) / norms[u][k];
            m.noalias() += w * (f * (f.adjoint() * rf));
        }
    }
    if (skipped) {
        *skipped = skip;
    }
    // (Pi - I) m G^{-1} with Pi = F_RF G^{-1} F_RF^H.
    const CMatrix m_ginv = llt.solve(m.adjoint()).adjoint();
    return rf * llt.solve(rf.adjoint() * m_ginv) - m_ginv;
}

EckartYoung eckart_young(const CMatrix& stacked, int l_chains) {
    if (l_chains < 1 || l_chains > stacked.rows()) {
        throw std::invalid_argument("eckart_young: l_chains must lie in [1, rows]");
    }
    const SvdResult dec = svd(stacked);
    const Eigen::Index keep = std::min<Eigen::Index>(l_chains, dec.s.size());
    EckartYoung out;
    out.approx = dec.u.leftCols(keep) * dec.s.head(keep).asDiagonal() * dec.v.leftCols(keep).adjoint();
    out.error2 = dec.s.tail(dec.s.size() - keep).squaredNorm();
    out.rf_init = pad_columns(phase_project(dec.u.leftCols(keep)), l_chains);
    return out;
}

HdPgResult hd_pg(const FactorizationTarget& target, int l_chains, FilterSide side,
                 const HdPgOptions& opt, std::mt19937_64& rng) {
    if (!(opt.s0 > 0.0) || !(opt.delta_rel > 0.0)) {
        throw std::invalid_argument("hd_pg: s0 and delta must be positive");
    }
    const CMatrix stacked = target.stacked();
    HdPgResult out;
    out.filter.side = side;
    CMatrix rf = opt.init == HdPgInit::eckart_young
                     ? eckart_young(stacked, l_chains).rf_init
                     : random_quantized_phases(static_cast<int>(stacked.rows()), l_chains,
                                               opt.quant_bits, rng);
    double d = distortion(target, rf);
    out.trace.entries.push_back({0, d, 0.0});
    const double delta = opt.delta_rel * d;
    for (int it = 1; it <= opt.max_iter && d > 0.0; ++it) {
        int skipped = 0;
        const CMatrix grad = distortion_gradient(target, rf, &skipped);
        out.trace.skipped_terms += skipped;
        const double g_norm = grad.norm();
        if (g_norm == 0.0) {
            break;
        }
        const double unit = opt.relative_step ? rf.norm() / g_norm : 1.0;
        double s = opt.s0;
        bool accepted = false;
        CMatrix cand;
        double d_cand = d;
        while (s >= opt.step_floor) {
            cand = phase_project(rf - (s * unit) * grad);
            d_cand = distortion_or_inf(target, cand);
            if (d_cand <= d) {
                accepted = true;
                break;
            }
            s /= 2.0;
        }
        if (!accepted) {
            out.trace.step_floor_hit = true;
            break;
        }
        const double improvement = d - d_cand;
        rf = std::move(cand);
        d = d_cand;
        out.trace.entries.push_back({it, d, s * unit});
        if (improvement < delta) {
            break;
        }
    }
    out.filter.rf = rf;
    out.filter.bb = ls_baseband(target, rf).bb;
    return out;
}

CMatrix am_rf_precoder(const std::vector<CMatrix>& h_u, int l_ms) {
    if (h_u.empty()) {
        throw std::invalid_argument("am_rf_precoder: no subcarriers");
    }
    const Eigen::Index n_bs = h_u.front().cols();
    const Eigen::Index n_ms = h_u.front().rows();
    if (l_ms < 1 || l_ms > n_ms) {
        throw std::invalid_argument("am_rf_precoder: l_ms must lie in [1, n_ms]");
    }
    CMatrix stack(n_bs * static_cast<Eigen::Index>(h_u.size()), n_ms);
    for (std::size_t k = 0; k < h_u.size(); ++k) {
        stack.middleRows(static_cast<Eigen::Index>(k) * n_bs, n_bs) = h_u[k].adjoint();
    }
    const SvdResult dec = svd(stack);
    return pad_columns(phase_project(dec.v.leftCols(std::min<Eigen::Index>(l_ms, dec.v.cols()))),
                       l_ms);
}

std::vector<CMatrix> am_bb_precoder(const std::vector<CMatrix>& h_u, const CMatrix& rf,
                                    int n_streams, double power, double noise_var) {
    const CMatrix q = inv_sqrt_hpd(rf.adjoint() * rf);
    std::vector<CMatrix> out;
    for (const CMatrix& h : h_u) {
        // Equivalent channel in whitened RF coordinates, downlink orientation.
        const CMatrix h_eq = (h.adjoint() * rf * q).adjoint();
        out.push_back(q * ul_precoder(h_eq, n_streams, power, noise_var));
    }
    return out;
}

std::vector<HybridFilter> am_precoders(const MatrixGrid& h, const SystemConfig& cfg,
                                       double noise_var) {
    std::vector<HybridFilter> out;
    for (const auto& h_u : h) {
        HybridFilter f;
        f.side = FilterSide::ms_precoder;
        f.rf = am_rf_precoder(h_u, cfg.l_ms);
        f.bb = {am_bb_precoder(h_u, f.rf, cfg.n_streams, cfg.user_power(), noise_var)};
        out.push_back(std::move(f));
    }
    return out;
}

namespace {

CMatrix am_baseband(CombinerKind kind, const CMatrix& rf, const CMatrix& r_d, const CMatrix& r_i,
                    const CMatrix& r_bar, double noise_var, bool& fallback) {
    const CMatrix rf_h_rd = rf.adjoint() * r_d;
    switch (kind) {
        case CombinerKind::mmse: {
            const CMatrix g = rf.adjoint() * r_i * rf;
            Eigen::LLT<CMatrix> llt(g);
            if (llt.info() == Eigen::Success && llt.rcond() > 1e-13) {
                return llt.solve(rf_h_rd);
            }
            return pinv(g) * rf_h_rd;
        }
        case CombinerKind::mrc: {
            const CMatrix g = (noise_var > 0.0 ? noise_var : 1.0) * (rf.adjoint() * rf);
            return pinv(g) * rf_h_rd;
        }
        case CombinerKind::cb: {
            const CMatrix g = rf.adjoint() * r_bar * rf;
            if (hermitian_rank(g) == 0) {
                return rf_h_rd;
            }
            const CMatrix basis = nullspace_basis(g);
            if (basis.cols() == 0) {
                fallback = true;
                return rf_h_rd;
            }
            return basis * (basis.adjoint() * rf_h_rd);
        }
    }
    return rf_h_rd;
}

}  // namespace

AmResult am_combiner(const MatrixGrid& h, const MatrixGrid& precoders, int l_bs,
                     CombinerKind kind, double noise_var, double block_power,
                     const AmOptions& opt) {
    if (h.empty() || h.size() != precoders.size()) {
        throw std::invalid_argument("am_combiner: one precoder set per user required");
    }
    const std::size_t n_users = h.size();
    const std::size_t n_sc = h.front().size();
    const Eigen::Index n_bs = h.front().front().cols();
    if (l_bs < 1 || l_bs > n_bs) {
        throw std::invalid_argument("am_combiner: l_bs must lie in [1, n_bs]");
    }

    MatrixGrid r_d(n_users);
    for (std::size_t u = 0; u < n_users; ++u) {
        for (std::size_t k = 0; k < n_sc; ++k) {
            r_d[u].push_back(h[u][k].adjoint() * precoders[u][k]);
        }
    }
    std::vector<CMatrix> r_i(n_sc);
    MatrixGrid r_bar(n_users, std::vector<CMatrix>(n_sc));
    for (std::size_t k = 0; k < n_sc; ++k) {
        CMatrix total = CMatrix::Zero(n_bs, n_bs);
        for (std::size_t u = 0; u < n_users; ++u) {
            total.noalias() += r_d[u][k] * r_d[u][k].adjoint();
        }
        for (std::size_t u = 0; u < n_users; ++u) {
            r_bar[u][k] = total - r_d[u][k] * r_d[u][k].adjoint();
        }
        r_i[k] = total;
        r_i[k].diagonal().array() += noise_var;
    }

    AmResult out;
    out.filter.side = FilterSide::bs_combiner;
    const SvdResult init = svd(hstack(r_d));
    CMatrix rf = pad_columns(phase_project(init.u.leftCols(std::min<Eigen::Index>(l_bs, init.u.cols()))),
                             l_bs);
    double best = std::numeric_limits<double>::infinity();
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (int it = 0; it < opt.max_iter; ++it) {
        MatrixGrid bb(n_users, std::vector<CMatrix>(n_sc));
        double total = 0.0;
        int fallbacks = 0;
        for (std::size_t u = 0; u < n_users; ++u) {
            for (std::size_t k = 0; k < n_sc; ++k) {
                bool fb = false;
                bb[u][k] = am_baseband(kind, rf, r_d[u][k], r_i[k], r_bar[u][k], noise_var, fb);
                fallbacks += fb ? 1 : 0;
                total += ul_mse_scale_optimal(r_d[u][k], r_i[k], rf * bb[u][k]);
            }
        }
        out.sum_mse.push_back(total);
        if (total < best) {
            best = total;
            out.filter.rf = rf;
            out.filter.bb = bb;
            out.fallbacks = fallbacks;
        }
        out.best_sum_mse.push_back(best);
        if (it > 0 && std::abs(prev - total) < opt.tol * std::max(std::abs(prev), 1e-300)) {
            break;
        }
        prev = total;
        CMatrix acc = CMatrix::Zero(n_bs, l_bs);
        for (std::size_t u = 0; u < n_users; ++u) {
            for (std::size_t k = 0; k < n_sc; ++k) {
                acc.noalias() += r_d[u][k] * bb[u][k].adjoint();
            }
        }
        rf = phase_project(acc);
    }
    for (auto& user : out.filter.bb) {
        for (CMatrix& b : user) {
            const double n = (out.filter.rf * b).norm();
            if (n > 0.0) {
                b *= std::sqrt(block_power) / n;
            }
        }
    }
    return out;
}

}  // namespace mmw
