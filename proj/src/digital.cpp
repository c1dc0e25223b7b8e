// SPDX-License-Identifier: Apache-2.0

#include "mmw/digital.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace mmw {

std::string to_string(CombinerKind kind) {
    switch (kind) {
        case CombinerKind::mmse:
            return "mmse";
        case CombinerKind::mrc:
            return "mrc";
        case CombinerKind::cb:
            return "cb";
    }
    return "mmse";
}

CombinerKind combiner_kind_from_string(std::string_view text) {
    if (text == "mmse") {
        return CombinerKind::mmse;
    }
    if (text == "mrc") {
        return CombinerKind::mrc;
    }
    if (text == "cb") {
        return CombinerKind::cb;
    }
    throw std::invalid_argument("unknown combiner kind '" + std::string(text) + "'");
}

RVector waterfill(const RVector& gains, double power) {
    if (!(power > 0.0)) {
        throw std::invalid_argument("waterfill: power must be positive");
    }
    if ((gains.array() < 0.0).any() || !gains.allFinite()) {
        throw std::invalid_argument("waterfill: gains must be finite and non-negative");
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(gains.size()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return gains(a) > gains(b); });
    if (order.empty() || gains(order.front()) <= 0.0) {
        throw std::domain_error("waterfill: every gain is zero");
    }
    // Largest active set whose water level sits above every member's floor.
    double inv_sum = 0.0;
    double mu = 0.0;
    std::size_t active = 0;
    for (std::size_t n = 1; n <= order.size(); ++n) {
        const double g = gains(order[n - 1]);
        if (g <= 0.0) {
            break;
        }
        const double level = (power + inv_sum + 1.0 / g) / static_cast<double>(n);
        if (level - 1.0 / g <= 0.0) {
            break;
        }
        inv_sum += 1.0 / g;
        mu = level;
        active = n;
    }
    RVector p = RVector::Zero(gains.size());
    for (std::size_t n = 0; n < active; ++n) {
        p(order[n]) = mu - 1.0 / gains(order[n]);
    }
    return p;
}

CMatrix ul_precoder(const CMatrix& h, int n_streams, double power, double noise_var) {
    if (n_streams < 1 || n_streams > std::min(h.rows(), h.cols())) {
        throw std::invalid_argument("ul_precoder: n_streams must lie in [1, min(n_ms, n_bs)]");
    }
    const SvdResult dec = svd(h.adjoint());
    const RVector s = dec.s.head(n_streams);
    RVector p = RVector::Zero(n_streams);
    const double s_max = dec.s.size() ? dec.s(0) : 0.0;
    const double floor = 1e-12 * s_max;
    if (s_max > 0.0) {
        if (noise_var > 0.0) {
            RVector g = (s.array().square() / noise_var).matrix();
            for (Eigen::Index i = 0; i < g.size(); ++i) {
                if (s(i) <= floor) {
                    g(i) = 0.0;
                }
            }
            p = waterfill(g, power);
        } else {
            const auto active = (s.array() > floor).count();
            for (Eigen::Index i = 0; i < n_streams; ++i) {
                p(i) = s(i) > floor ? power / static_cast<double>(active) : 0.0;
            }
        }
    }
    return dec.v.leftCols(n_streams) * p.cwiseSqrt().asDiagonal();
}

MatrixGrid ul_precoders(const MatrixGrid& h, const SystemConfig& cfg, double noise_var) {
    MatrixGrid out(h.size());
    for (std::size_t u = 0; u < h.size(); ++u) {
        for (const CMatrix& hk : h[u]) {
            out[u].push_back(ul_precoder(hk, cfg.n_streams, cfg.user_power(), noise_var));
        }
    }
    return out;
}

CMatrix received_covariance(const std::vector<CMatrix>& h_k, const std::vector<CMatrix>& t_k,
                            std::size_t skip) {
    if (h_k.empty() || h_k.size() != t_k.size()) {
        throw std::invalid_argument("received_covariance: one precoder per user required");
    }
    const Eigen::Index n_bs = h_k.front().cols();
    CMatrix r = CMatrix::Zero(n_bs, n_bs);
    for (std::size_t i = 0; i < h_k.size(); ++i) {
        if (i == skip) {
            continue;
        }
        const CMatrix d = h_k[i].adjoint() * t_k[i];
        r.noalias() += d * d.adjoint();
    }
    return r;
}

std::vector<CMatrix> mmse_combiner(const std::vector<CMatrix>& h_k,
                                   const std::vector<CMatrix>& t_k, double noise_var) {
    CMatrix r = received_covariance(h_k, t_k);
    std::vector<CMatrix> out;
    if (noise_var > 0.0) {
        r.diagonal().array() += noise_var;
        Eigen::LLT<CMatrix> llt(r);
        if (llt.info() != Eigen::Success) {
            throw NumericError("mmse_combiner: covariance is not positive definite");
        }
        for (std::size_t u = 0; u < h_k.size(); ++u) {
            out.push_back(llt.solve(h_k[u].adjoint() * t_k[u]));
        }
    } else {
        const CMatrix r_pinv = pinv(r);
        for (std::size_t u = 0; u < h_k.size(); ++u) {
            out.push_back(r_pinv * (h_k[u].adjoint() * t_k[u]));
        }
    }
    return out;
}

CMatrix mrc_combiner(const CMatrix& h, const CMatrix& t) { return h.adjoint() * t; }

CbCombiner cb_combiner(const std::vector<CMatrix>& h_k, const std::vector<CMatrix>& t_k,
                       std::size_t u) {
    if (u >= h_k.size()) {
        throw std::out_of_range("cb_combiner: user index out of range");
    }
    const CMatrix r_bar = received_covariance(h_k, t_k, u);
    const CMatrix mrc = mrc_combiner(h_k[u], t_k[u]);
    CbCombiner out;
    out.interference_rank = hermitian_rank(r_bar);
    if (out.interference_rank == 0) {
        out.f = mrc;
        return out;
    }
    CMatrix basis = nullspace_basis(r_bar);
    if (basis.cols() == 0) {
        // Keep the eigenvectors outside the dominant interference subspace.
        std::size_t other_streams = 0;
        for (std::size_t i = 0; i < t_k.size(); ++i) {
            other_streams += i == u ? 0 : static_cast<std::size_t>(t_k[i].cols());
        }
        const Eigen::Index n = r_bar.rows();
        const Eigen::Index r = std::min<Eigen::Index>(static_cast<Eigen::Index>(other_streams),
                                                      n - t_k[u].cols());
        Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (r_bar + r_bar.adjoint()));
        basis = eig.eigenvectors().leftCols(n - r);
        out.fallback = true;
    }
    out.f = basis * (basis.adjoint() * mrc);
    return out;
}

MatrixGrid design_combiners(const MatrixGrid& h, const MatrixGrid& precoders, CombinerKind kind,
                            double noise_var, int* fallbacks) {
    if (h.size() != precoders.size() || h.empty()) {
        throw std::invalid_argument("design_combiners: one precoder set per user required");
    }
    const std::size_t n_users = h.size();
    const std::size_t n_sc = h.front().size();
    MatrixGrid out(n_users, std::vector<CMatrix>(n_sc));
    int fb = 0;
    for (std::size_t k = 0; k < n_sc; ++k) {
        std::vector<CMatrix> h_k, t_k;
        for (std::size_t u = 0; u < n_users; ++u) {
            h_k.push_back(h[u][k]);
            t_k.push_back(precoders[u][k]);
        }
        if (kind == CombinerKind::mmse) {
            auto f = mmse_combiner(h_k, t_k, noise_var);
            for (std::size_t u = 0; u < n_users; ++u) {
                out[u][k] = std::move(f[u]);
            }
        } else {
            for (std::size_t u = 0; u < n_users; ++u) {
                if (kind == CombinerKind::mrc) {
                    out[u][k] = mrc_combiner(h_k[u], t_k[u]);
                } else {
                    CbCombiner cb = cb_combiner(h_k, t_k, u);
                    fb += cb.fallback ? 1 : 0;
                    out[u][k] = std::move(cb.f);
                }
            }
        }
    }
    if (fallbacks) {
        *fallbacks = fb;
    }
    return out;
}

DigitalFilterSet design_digital(const MatrixGrid& h, const SystemConfig& cfg, CombinerKind kind,
                                double noise_var) {
    DigitalFilterSet out;
    out.kind = kind;
    out.ul_precoders = ul_precoders(h, cfg, noise_var);
    out.ul_combiners = design_combiners(h, out.ul_precoders, kind, noise_var, &out.fallbacks);
    return out;
}

DownlinkFilters dl_filters_from_ul(const MatrixGrid& ul_precoders,
                                   const MatrixGrid& ul_combiners, const SystemConfig& cfg) {
    if (ul_precoders.size() != ul_combiners.size()) {
        throw std::invalid_argument("dl_filters_from_ul: user count mismatch");
    }
    DownlinkFilters out;
    out.combiners = ul_precoders;
    out.precoders.resize(ul_combiners.size());
    const double target = std::sqrt(cfg.stream_power());
    for (std::size_t u = 0; u < ul_combiners.size(); ++u) {
        for (const CMatrix& f : ul_combiners[u]) {
            const double n = f.norm();
            if (n == 0.0) {
                throw std::domain_error("dl_filters_from_ul: zero-norm combiner");
            }
            out.precoders[u].push_back(f * (target / n));
        }
    }
    return out;
}

}  // namespace mmw
