// SPDX-License-Identifier: Apache-2.0
//
// Compressive training: quantized-phase frequency-flat training filters,
// received pilot simulation, the stacked measurement matrix and noise
// whitening.
//
// A TrainingEnsemble describes one receiver observing one or more
// transmitters. Uplink training is the BS observing all MSs; downlink
// training is one ensemble per MS, each observing the BS.

#ifndef MMW_TRAINING_HPP
#define MMW_TRAINING_HPP

#include <cstddef>
#include <random>
#include <vector>

#include "mmw/channel.hpp"
#include "mmw/config.hpp"
#include "mmw/linalg.hpp"

namespace mmw {

struct TrainingEnsemble {
    int n_rx = 0;
    int l_rx = 0;
    std::vector<int> n_tx;                          // antennas per transmitter
    std::vector<CMatrix> rx_combiners;              // [m] n_rx x l_rx, unit modulus
    std::vector<std::vector<CMatrix>> tx_precoders; // [t][m] n_tx x l_tx, unit modulus
    std::vector<std::vector<CVector>> modulation;   // [t][m] spatial modulation q
    std::vector<std::vector<CVector>> tx_vectors;   // [t][m] scaled T q, the transmitted vector
    std::vector<std::vector<cdouble>> pilots;       // [m][k], unit magnitude
    std::vector<CMatrix> cw_blocks;                 // [m] F^H F
    std::vector<CMatrix> dw_blocks;                 // [m] upper Cholesky factor of cw_blocks[m]

    std::size_t n_frames() const { return rx_combiners.size(); }
    std::size_t n_transmitters() const { return tx_vectors.size(); }
    std::size_t n_measurements() const { return n_frames() * static_cast<std::size_t>(l_rx); }
    std::size_t n_subcarriers() const { return pilots.empty() ? 0 : pilots.front().size(); }

    /// Stacked measurement matrix; row block m is [x_1^T ... x_T^T] kron F^(m)H.
    CMatrix measurement_matrix() const;
    /// Block-diagonal C_w.
    CMatrix noise_covariance() const;
};

/// Draws entries e^{j 2 pi b / 2^bits}, b uniform.
CMatrix random_quantized_phases(int rows, int cols, int bits, std::mt19937_64& rng);

/// Uplink training: BS combiners (n_bs x l_bs), per-user precoders
/// (n_ms x l_ms). Every user's transmitted vector has power P_tx / U.
TrainingEnsemble generate_training(const SystemConfig& cfg, std::mt19937_64& rng);

/// Downlink training: the BS broadcasts one precoded vector per frame with
/// power P_tx / U; each MS combines with its own l_ms-chain combiners.
std::vector<TrainingEnsemble> generate_downlink_training(const SystemConfig& cfg,
                                                         std::mt19937_64& rng);

/// Per-subcarrier measurement vectors (length M * l_rx) after pilot removal.
/// links[t][k] is the n_rx x n_tx channel from transmitter t.
std::vector<CVector> simulate_training(const MatrixGrid& links, const TrainingEnsemble& ens,
                                       double noise_var, std::mt19937_64& rng);

/// Uplink links are H_u^H[k].
std::vector<CVector> simulate_uplink_training(const ChannelRealization& ch,
                                              const TrainingEnsemble& ens, double noise_var,
                                              std::mt19937_64& rng);

/// Phi * blkdiag(conj(tx_dict_t) kron rx_dict), built from its Kronecker
/// structure without forming either factor.
CMatrix sensing_matrix(const TrainingEnsemble& ens, const CMatrix& rx_dict,
                       const std::vector<CMatrix>& tx_dicts);

/// D_w^{-H} applied to the rows of `a` (M * l_rx rows).
CMatrix whiten(const TrainingEnsemble& ens, const CMatrix& a);
std::vector<CVector> whiten(const TrainingEnsemble& ens, const std::vector<CVector>& y);

}  // namespace mmw

#endif  // MMW_TRAINING_HPP
