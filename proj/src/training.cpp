// SPDX-License-Identifier: Apache-2.0

#include "mmw/training.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>

namespace mmw {

using std::numbers::pi;

CMatrix random_quantized_phases(int rows, int cols, int bits, std::mt19937_64& rng) {
    if (bits < 1) {
        throw std::invalid_argument("random_quantized_phases: bits must be positive");
    }
    const int levels = 1 << bits;
    std::uniform_int_distribution<int> pick(0, levels - 1);
    CMatrix out(rows, cols);
    for (int j = 0; j < cols; ++j) {
        for (int i = 0; i < rows; ++i) {
            const int b = pick(rng);
            // Exact values on the axes keep N_Q = 1 entries at exactly +-1.
            if (4 * b % levels == 0) {
                static const cdouble axis[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
                out(i, j) = axis[4 * b / levels];
            } else {
                out(i, j) = std::polar(1.0, 2.0 * pi * b / levels);
            }
        }
    }
    return out;
}

namespace {

CVector random_modulation(int l_tx, int bits, std::mt19937_64& rng) {
    return random_quantized_phases(l_tx, 1, bits, rng).col(0) / std::sqrt(static_cast<double>(l_tx));
}

// Receive training combiner with F^H F positive definite, as whitening needs.
// Small arrays with coarse phases can draw parallel columns; such draws are
// redrawn, which leaves the stream untouched whenever the first draw is fine.
CMatrix random_training_combiner(int n_ant, int l_chains, int bits, std::mt19937_64& rng) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        CMatrix f = random_quantized_phases(n_ant, l_chains, bits, rng);
        const Eigen::LLT<CMatrix> llt(f.adjoint() * f);
        if (llt.info() == Eigen::Success && llt.rcond() > 1e-10) {
            return f;
        }
    }
    throw std::invalid_argument("training: cannot draw a full-rank combiner with " + std::to_string(n_ant) +
                                " antennas and " + std::to_string(l_chains) + " chains");
}

// T q scaled to the requested power.
CVector scaled_tx_vector(const CMatrix& precoder, const CVector& q, double power) {
    CVector x = precoder * q;
    const double n = x.norm();
    if (n == 0.0) {
        // A zero beam only occurs on an unlucky phase draw; fall back to the
        // first RF column which is never zero.
        x = precoder.col(0);
        return x * (std::sqrt(power) / x.norm());
    }
    return x * (std::sqrt(power) / n);
}

void finish_ensemble(TrainingEnsemble& ens, int n_frames, int n_subcarriers) {
    ens.pilots.assign(n_frames, std::vector<cdouble>(n_subcarriers, cdouble(1.0, 0.0)));
    ens.cw_blocks.clear();
    ens.dw_blocks.clear();
    for (const CMatrix& f : ens.rx_combiners) {
        CMatrix cw = f.adjoint() * f;
        ens.dw_blocks.push_back(cholesky(cw));
        ens.cw_blocks.push_back(std::move(cw));
    }
}

}  // namespace

TrainingEnsemble generate_training(const SystemConfig& cfg, std::mt19937_64& rng) {
    TrainingEnsemble ens;
    ens.n_rx = cfg.n_bs;
    ens.l_rx = cfg.l_bs;
    ens.n_tx.assign(cfg.n_users, cfg.n_ms);
    ens.tx_precoders.assign(cfg.n_users, {});
    ens.modulation.assign(cfg.n_users, {});
    ens.tx_vectors.assign(cfg.n_users, {});
    const double power = cfg.user_power();
    for (int m = 0; m < cfg.n_frames; ++m) {
        ens.rx_combiners.push_back(random_training_combiner(cfg.n_bs, cfg.l_bs, cfg.n_quant_bits, rng));
        for (int u = 0; u < cfg.n_users; ++u) {
            CMatrix t = random_quantized_phases(cfg.n_ms, cfg.l_ms, cfg.n_quant_bits, rng);
            CVector q = random_modulation(cfg.l_ms, cfg.n_quant_bits, rng);
            ens.tx_vectors[u].push_back(scaled_tx_vector(t, q, power));
            ens.tx_precoders[u].push_back(std::move(t));
            ens.modulation[u].push_back(std::move(q));
        }
    }
    finish_ensemble(ens, cfg.n_frames, cfg.n_subcarriers);
    return ens;
}

std::vector<TrainingEnsemble> generate_downlink_training(const SystemConfig& cfg,
                                                         std::mt19937_64& rng) {
    std::vector<CMatrix> bs_precoders;
    std::vector<CVector> bs_modulation;
    std::vector<CVector> bs_vectors;
    const double power = cfg.user_power();
    for (int m = 0; m < cfg.n_frames; ++m) {
        CMatrix p = random_quantized_phases(cfg.n_bs, cfg.l_bs, cfg.n_quant_bits, rng);
        CVector q = random_modulation(cfg.l_bs, cfg.n_quant_bits, rng);
        bs_vectors.push_back(scaled_tx_vector(p, q, power));
        bs_precoders.push_back(std::move(p));
        bs_modulation.push_back(std::move(q));
    }
    std::vector<TrainingEnsemble> out(cfg.n_users);
    for (auto& ens : out) {
        ens.n_rx = cfg.n_ms;
        ens.l_rx = cfg.l_ms;
        ens.n_tx = {cfg.n_bs};
        ens.tx_precoders = {bs_precoders};
        ens.modulation = {bs_modulation};
        ens.tx_vectors = {bs_vectors};
        for (int m = 0; m < cfg.n_frames; ++m) {
            ens.rx_combiners.push_back(
                random_training_combiner(cfg.n_ms, cfg.l_ms, cfg.n_quant_bits, rng));
        }
        finish_ensemble(ens, cfg.n_frames, cfg.n_subcarriers);
    }
    return out;
}

CMatrix TrainingEnsemble::measurement_matrix() const {
    Eigen::Index cols = 0;
    for (int n : n_tx) {
        cols += static_cast<Eigen::Index>(n) * n_rx;
    }
    CMatrix phi(static_cast<Eigen::Index>(n_measurements()), cols);
    for (std::size_t m = 0; m < n_frames(); ++m) {
        const CMatrix fh = rx_combiners[m].adjoint();
        Eigen::Index at = 0;
        for (std::size_t t = 0; t < n_transmitters(); ++t) {
            const CVector& x = tx_vectors[t][m];
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                phi.block(static_cast<Eigen::Index>(m) * l_rx, at, l_rx, n_rx) = x(i) * fh;
                at += n_rx;
            }
        }
    }
    return phi;
}

CMatrix TrainingEnsemble::noise_covariance() const {
    const auto n = static_cast<Eigen::Index>(n_measurements());
    CMatrix cw = CMatrix::Zero(n, n);
    for (std::size_t m = 0; m < n_frames(); ++m) {
        const auto at = static_cast<Eigen::Index>(m) * l_rx;
        cw.block(at, at, l_rx, l_rx) = cw_blocks[m];
    }
    return cw;
}

std::vector<CVector> simulate_training(const MatrixGrid& links, const TrainingEnsemble& ens,
                                       double noise_var, std::mt19937_64& rng) {
    if (links.size() != ens.n_transmitters()) {
        throw std::invalid_argument("simulate_training: one link set per transmitter required");
    }
    const std::size_t n_sc = ens.n_subcarriers();
    for (const auto& per_k : links) {
        if (per_k.size() != n_sc) {
            throw std::invalid_argument("simulate_training: subcarrier count mismatch");
        }
    }
    std::normal_distribution<double> normal(0.0, std::sqrt(noise_var / 2.0));
    std::vector<CVector> y(n_sc, CVector::Zero(static_cast<Eigen::Index>(ens.n_measurements())));
    for (std::size_t k = 0; k < n_sc; ++k) {
        for (std::size_t m = 0; m < ens.n_frames(); ++m) {
            CVector rx = CVector::Zero(ens.n_rx);
            const cdouble s = ens.pilots[m][k];
            for (std::size_t t = 0; t < links.size(); ++t) {
                rx.noalias() += links[t][k] * ens.tx_vectors[t][m] * s;
            }
            if (noise_var > 0.0) {
                for (int i = 0; i < ens.n_rx; ++i) {
                    const double re = normal(rng);
                    const double im = normal(rng);
                    rx(i) += cdouble(re, im);
                }
            }
            y[k].segment(static_cast<Eigen::Index>(m) * ens.l_rx, ens.l_rx) =
                std::conj(s) * (ens.rx_combiners[m].adjoint() * rx);
        }
    }
    return y;
}

std::vector<CVector> simulate_uplink_training(const ChannelRealization& ch,
                                              const TrainingEnsemble& ens, double noise_var,
                                              std::mt19937_64& rng) {
    MatrixGrid links(ch.n_users());
    for (std::size_t u = 0; u < ch.n_users(); ++u) {
        for (std::size_t k = 0; k < ch.n_subcarriers(); ++k) {
            links[u].push_back(ch.uplink(u, k));
        }
    }
    return simulate_training(links, ens, noise_var, rng);
}

CMatrix sensing_matrix(const TrainingEnsemble& ens, const CMatrix& rx_dict,
                       const std::vector<CMatrix>& tx_dicts) {
    if (tx_dicts.size() != ens.n_transmitters()) {
        throw std::invalid_argument("sensing_matrix: one dictionary per transmitter required");
    }
    const Eigen::Index g_rx = rx_dict.cols();
    Eigen::Index cols = 0;
    for (const CMatrix& d : tx_dicts) {
        cols += d.cols() * g_rx;
    }
    CMatrix out(static_cast<Eigen::Index>(ens.n_measurements()), cols);
    for (std::size_t m = 0; m < ens.n_frames(); ++m) {
        const CMatrix rx_part = ens.rx_combiners[m].adjoint() * rx_dict;  // l_rx x g_rx
        const auto row = static_cast<Eigen::Index>(m) * ens.l_rx;
        Eigen::Index at = 0;
        for (std::size_t t = 0; t < tx_dicts.size(); ++t) {
            // x^T conj(A_tx), one coefficient per transmit grid point.
            const CVector coeff = tx_dicts[t].adjoint() * ens.tx_vectors[t][m];
            for (Eigen::Index g = 0; g < coeff.size(); ++g) {
                out.block(row, at, ens.l_rx, g_rx) = coeff(g) * rx_part;
                at += g_rx;
            }
        }
    }
    return out;
}

CMatrix whiten(const TrainingEnsemble& ens, const CMatrix& a) {
    if (a.rows() != static_cast<Eigen::Index>(ens.n_measurements())) {
        throw std::invalid_argument("whiten: row count mismatch");
    }
    CMatrix out(a.rows(), a.cols());
    for (std::size_t m = 0; m < ens.n_frames(); ++m) {
        const auto row = static_cast<Eigen::Index>(m) * ens.l_rx;
        out.middleRows(row, ens.l_rx) = ens.dw_blocks[m].adjoint().triangularView<Eigen::Lower>().solve(
            a.middleRows(row, ens.l_rx));
    }
    return out;
}

std::vector<CVector> whiten(const TrainingEnsemble& ens, const std::vector<CVector>& y) {
    std::vector<CVector> out;
    out.reserve(y.size());
    for (const CVector& v : y) {
        out.push_back(whiten(ens, CMatrix(v)).col(0));
    }
    return out;
}

}  // namespace mmw
