// SPDX-License-Identifier: Apache-2.0

#include "mmw/estimation.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <stdexcept>

namespace mmw {

MatrixGrid reconstruct_channels(const SparseEstimate& est, const CMatrix& rx_dict,
                                const std::vector<CMatrix>& tx_dicts) {
    const std::size_t n_sc = static_cast<std::size_t>(est.gains.cols());
    const auto g_rx = static_cast<std::size_t>(rx_dict.cols());
    MatrixGrid out(tx_dicts.size());
    std::vector<std::size_t> block_start;
    std::size_t total = 0;
    for (std::size_t t = 0; t < tx_dicts.size(); ++t) {
        out[t].assign(n_sc, CMatrix::Zero(rx_dict.rows(), tx_dicts[t].rows()));
        block_start.push_back(total);
        total += g_rx * static_cast<std::size_t>(tx_dicts[t].cols());
    }
    for (std::size_t i = 0; i < est.support.size(); ++i) {
        const std::size_t idx = est.support[i];
        if (idx >= total) {
            throw std::out_of_range("reconstruct_channels: support index outside the dictionary");
        }
        std::size_t t = tx_dicts.size() - 1;
        while (block_start[t] > idx) {
            --t;
        }
        const std::size_t local = idx - block_start[t];
        const auto tx_g = static_cast<Eigen::Index>(local / g_rx);
        const auto rx_g = static_cast<Eigen::Index>(local % g_rx);
        const CMatrix atom = rx_dict.col(rx_g) * tx_dicts[t].col(tx_g).adjoint();
        for (std::size_t k = 0; k < n_sc; ++k) {
            out[t][k] += est.gains(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * atom;
        }
    }
    return out;
}

double nmse(const MatrixGrid& estimate, const MatrixGrid& truth) {
    if (estimate.size() != truth.size()) {
        throw std::invalid_argument("nmse: user count mismatch");
    }
    double err = 0.0;
    double energy = 0.0;
    for (std::size_t u = 0; u < truth.size(); ++u) {
        if (estimate[u].size() != truth[u].size()) {
            throw std::invalid_argument("nmse: subcarrier count mismatch");
        }
        for (std::size_t k = 0; k < truth[u].size(); ++k) {
            if (estimate[u][k].rows() != truth[u][k].rows() ||
                estimate[u][k].cols() != truth[u][k].cols()) {
                throw std::invalid_argument("nmse: matrix dimension mismatch");
            }
            err += (estimate[u][k] - truth[u][k]).squaredNorm();
            energy += truth[u][k].squaredNorm();
        }
    }
    if (energy == 0.0) {
        throw std::domain_error("nmse: true channel is identically zero");
    }
    return err / energy;
}

double omp_epsilon(const std::vector<CVector>& y_w, double noise_var) {
    if (noise_var > 0.0) {
        return noise_var;
    }
    double energy = 0.0;
    std::size_t n = 0;
    for (const CVector& v : y_w) {
        energy += v.squaredNorm();
        n += static_cast<std::size_t>(v.size());
    }
    const double mean = n ? energy / static_cast<double>(n) : 0.0;
    return std::max(1e-14 * mean, 1e-300);
}

namespace {

MatrixGrid adjoint_grid(const MatrixGrid& g) {
    MatrixGrid out(g.size());
    for (std::size_t u = 0; u < g.size(); ++u) {
        for (const CMatrix& m : g[u]) {
            out[u].push_back(m.adjoint());
        }
    }
    return out;
}

SparseEstimate recover(const TrainingEnsemble& ens, const std::vector<CVector>& y,
                       const CMatrix& rx_dict, const std::vector<CMatrix>& tx_dicts,
                       int max_support, double noise_var) {
    const CMatrix upsilon_w = whiten(ens, sensing_matrix(ens, rx_dict, tx_dicts));
    const std::vector<CVector> y_w = whiten(ens, y);
    return sw_omp(y_w, upsilon_w, omp_epsilon(y_w, noise_var), max_support);
}

}  // namespace

LinkEstimate estimate_uplink(const ChannelRealization& ch, const SystemConfig& cfg,
                             const TrainingEnsemble& ens, double noise_var,
                             std::mt19937_64& noise_rng) {
    const auto y = simulate_uplink_training(ch, ens, noise_var, noise_rng);
    const CMatrix bs_dict = build_dictionary(cfg.n_bs, cfg.g_bs);
    const std::vector<CMatrix> ms_dicts(ch.n_users(), build_dictionary(cfg.n_ms, cfg.g_ms));
    LinkEstimate out;
    out.sparse.push_back(recover(ens, y, bs_dict, ms_dicts, cfg.max_support(), noise_var));
    out.channels = adjoint_grid(reconstruct_channels(out.sparse.front(), bs_dict, ms_dicts));
    out.nmse = nmse(out.channels, ch.freq);
    for (std::size_t u = 0; u < ch.n_users(); ++u) {
        out.user_nmse.push_back(nmse({out.channels[u]}, {ch.freq[u]}));
    }
    return out;
}

LinkEstimate simulate_downlink_training(const ChannelRealization& ch, const SystemConfig& cfg,
                                        const std::vector<TrainingEnsemble>& ens,
                                        double noise_var, std::mt19937_64& noise_rng) {
    if (ens.size() != ch.n_users()) {
        throw std::invalid_argument("simulate_downlink_training: one ensemble per user required");
    }
    const CMatrix ms_dict = build_dictionary(cfg.n_ms, cfg.g_ms);
    const std::vector<CMatrix> bs_dicts{build_dictionary(cfg.n_bs, cfg.g_bs)};
    LinkEstimate out;
    for (std::size_t u = 0; u < ch.n_users(); ++u) {
        const MatrixGrid links{ch.freq[u]};
        const auto y = simulate_training(links, ens[u], noise_var, noise_rng);
        const int cap = 4 * static_cast<int>(ch.users[u].paths.size());
        out.sparse.push_back(recover(ens[u], y, ms_dict, bs_dicts, cap, noise_var));
        out.channels.push_back(reconstruct_channels(out.sparse.back(), ms_dict, bs_dicts).front());
        out.user_nmse.push_back(nmse({out.channels[u]}, {ch.freq[u]}));
    }
    out.nmse = nmse(out.channels, ch.freq);
    return out;
}

namespace {

// Rows of the unwhitened Upsilon = Phi * blkdiag(khatri_rao(conj(A_tx), A_rx)).
CMatrix path_sensing_matrix(const TrainingEnsemble& ens, const std::vector<CMatrix>& a_rx,
                            const std::vector<CMatrix>& a_tx) {
    Eigen::Index cols = 0;
    for (const CMatrix& a : a_rx) {
        cols += a.cols();
    }
    CMatrix out(static_cast<Eigen::Index>(ens.n_measurements()), cols);
    for (std::size_t m = 0; m < ens.n_frames(); ++m) {
        const auto row = static_cast<Eigen::Index>(m) * ens.l_rx;
        Eigen::Index at = 0;
        for (std::size_t t = 0; t < a_rx.size(); ++t) {
            const CMatrix rx_part = ens.rx_combiners[m].adjoint() * a_rx[t];
            const CVector coeff = a_tx[t].adjoint() * ens.tx_vectors[t][m];
            for (Eigen::Index p = 0; p < a_rx[t].cols(); ++p) {
                out.block(row, at + p, ens.l_rx, 1) = coeff(p) * rx_part.col(p);
            }
            at += a_rx[t].cols();
        }
    }
    return out;
}

void check_paths(const std::vector<CMatrix>& a_rx, const std::vector<CMatrix>& a_tx,
                 const TrainingEnsemble& ens) {
    if (a_rx.size() != a_tx.size() || a_rx.size() != ens.n_transmitters()) {
        throw std::invalid_argument("crlb: one steering set per transmitter required");
    }
    for (std::size_t t = 0; t < a_rx.size(); ++t) {
        if (a_rx[t].cols() != a_tx[t].cols()) {
            throw std::invalid_argument("crlb: path count mismatch between ends");
        }
    }
}

}  // namespace

double crlb_gamma(const TrainingEnsemble& ens, const std::vector<CMatrix>& a_rx,
                  const std::vector<CMatrix>& a_tx, double noise_var, std::size_t n_subcarriers) {
    check_paths(a_rx, a_tx, ens);
    if (noise_var < 0.0) {
        throw std::invalid_argument("crlb: noise_var must be non-negative");
    }
    const CMatrix upsilon_w = whiten(ens, path_sensing_matrix(ens, a_rx, a_tx));
    // FIM without the 1/noise_var factor, which is reapplied to the trace.
    const CMatrix fim = upsilon_w.adjoint() * upsilon_w;
    Eigen::LLT<CMatrix> llt(fim);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-12) {
        throw NumericError("crlb: Fisher information matrix is singular");
    }
    // Psi^H Psi is block diagonal over transmitters.
    CMatrix gram = CMatrix::Zero(fim.rows(), fim.cols());
    Eigen::Index at = 0;
    for (std::size_t t = 0; t < a_rx.size(); ++t) {
        const CMatrix psi = khatri_rao(a_tx[t].conjugate(), a_rx[t]);
        gram.block(at, at, psi.cols(), psi.cols()) = psi.adjoint() * psi;
        at += psi.cols();
    }
    const cdouble tr = llt.solve(gram).trace();
    return static_cast<double>(n_subcarriers) * noise_var * tr.real();
}

namespace {

void steering_sets(const ChannelRealization& ch, int n_bs, int n_ms, std::vector<CMatrix>& a_bs,
                   std::vector<CMatrix>& a_ms) {
    a_bs.clear();
    a_ms.clear();
    for (const PathSet& set : ch.users) {
        CMatrix bs(n_bs, static_cast<Eigen::Index>(set.paths.size()));
        CMatrix ms(n_ms, static_cast<Eigen::Index>(set.paths.size()));
        for (std::size_t p = 0; p < set.paths.size(); ++p) {
            bs.col(static_cast<Eigen::Index>(p)) = steering_vector(n_bs, set.paths[p].aod);
            ms.col(static_cast<Eigen::Index>(p)) = steering_vector(n_ms, set.paths[p].aoa);
        }
        a_bs.push_back(std::move(bs));
        a_ms.push_back(std::move(ms));
    }
}

double channel_energy(const ChannelRealization& ch) {
    double e = 0.0;
    for (const auto& user : ch.freq) {
        for (const CMatrix& h : user) {
            e += h.squaredNorm();
        }
    }
    if (e == 0.0) {
        throw std::domain_error("crlb: true channel is identically zero");
    }
    return e;
}

}  // namespace

double crlb(const ChannelRealization& ch, const TrainingEnsemble& ens, double noise_var) {
    std::vector<CMatrix> a_bs, a_ms;
    steering_sets(ch, ens.n_rx, ens.n_tx.empty() ? 0 : ens.n_tx.front(), a_bs, a_ms);
    return crlb_gamma(ens, a_bs, a_ms, noise_var, ch.n_subcarriers());
}

double crlb_nmse(const ChannelRealization& ch, const TrainingEnsemble& ens, double noise_var) {
    return crlb(ch, ens, noise_var) / channel_energy(ch);
}

double crlb_nmse_downlink(const ChannelRealization& ch, const std::vector<TrainingEnsemble>& ens,
                          double noise_var) {
    if (ens.size() != ch.n_users()) {
        throw std::invalid_argument("crlb: one downlink ensemble per user required");
    }
    std::vector<CMatrix> a_bs, a_ms;
    steering_sets(ch, ens.front().n_tx.front(), ens.front().n_rx, a_bs, a_ms);
    double gamma = 0.0;
    for (std::size_t u = 0; u < ch.n_users(); ++u) {
        gamma += crlb_gamma(ens[u], {a_ms[u]}, {a_bs[u]}, noise_var, ch.n_subcarriers());
    }
    return gamma / channel_energy(ch);
}

MatrixGrid genie_uplink_estimate(const ChannelRealization& ch, const TrainingEnsemble& ens,
                                 const std::vector<CVector>& y) {
    std::vector<CMatrix> a_bs, a_ms;
    steering_sets(ch, ens.n_rx, ens.n_tx.front(), a_bs, a_ms);
    const CMatrix upsilon_w = whiten(ens, path_sensing_matrix(ens, a_bs, a_ms));
    const std::vector<CVector> y_w = whiten(ens, y);
    Eigen::ColPivHouseholderQR<CMatrix> qr(upsilon_w);
    MatrixGrid out(ch.n_users());
    for (std::size_t k = 0; k < y_w.size(); ++k) {
        const CVector xi = qr.solve(y_w[k]);
        Eigen::Index at = 0;
        for (std::size_t u = 0; u < ch.n_users(); ++u) {
            CMatrix h = CMatrix::Zero(ens.n_tx[u], ens.n_rx);
            for (Eigen::Index p = 0; p < a_bs[u].cols(); ++p) {
                // xi multiplies a_bs a_ms^H in the uplink orientation.
                h += std::conj(xi(at + p)) * a_ms[u].col(p) * a_bs[u].col(p).adjoint();
            }
            at += a_bs[u].cols();
            out[u].push_back(h);
        }
    }
    return out;
}

}  // namespace mmw
