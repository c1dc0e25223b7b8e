// SPDX-License-Identifier: Apache-2.0
//
// End-to-end channel estimation (uplink at the BS, downlink at each MS),
// error metrics and the Cramer-Rao bound for the sparse channel gains.

#ifndef MMW_ESTIMATION_HPP
#define MMW_ESTIMATION_HPP

#include <cstddef>
#include <random>
#include <vector>

#include "mmw/channel.hpp"
#include "mmw/config.hpp"
#include "mmw/linalg.hpp"
#include "mmw/sw_omp.hpp"
#include "mmw/training.hpp"

namespace mmw {

/// Maps every support index to its transmitter block and grid pair and
/// returns links[t][k] = sum gain * a_rx a_tx^H (n_rx x n_tx). Column index
/// inside a transmitter block is tx_grid * g_rx + rx_grid.
MatrixGrid reconstruct_channels(const SparseEstimate& est, const CMatrix& rx_dict,
                                const std::vector<CMatrix>& tx_dicts);

/// sum ||est - truth||^2 / sum ||truth||^2 over all blocks. Throws when the
/// true channel is identically zero.
double nmse(const MatrixGrid& estimate, const MatrixGrid& truth);

/// Halting threshold: noise_var, or a tiny multiple of the measurement
/// energy when noiseless.
double omp_epsilon(const std::vector<CVector>& y_w, double noise_var);

struct LinkEstimate {
    MatrixGrid channels;                // [u][k] downlink orientation H_u[k]
    std::vector<SparseEstimate> sparse; // one per recovery problem
    double nmse = 0.0;                  // over all users
    std::vector<double> user_nmse;
};

/// Simulates uplink training at noise_var, then whitening, SW-OMP and
/// reconstruction at the BS.
LinkEstimate estimate_uplink(const ChannelRealization& ch, const SystemConfig& cfg,
                             const TrainingEnsemble& ens, double noise_var,
                             std::mt19937_64& noise_rng);

/// Downlink counterpart: each MS recovers only its own channel.
LinkEstimate simulate_downlink_training(const ChannelRealization& ch, const SystemConfig& cfg,
                                        const std::vector<TrainingEnsemble>& ens,
                                        double noise_var, std::mt19937_64& noise_rng);

/// Bound on sum_k E||h_hat[k] - h[k]||^2 for one receiver observing several
/// transmitters whose paths are known. a_rx[t], a_tx[t] hold the true
/// steering vectors of transmitter t's paths (one column per path).
/// FIM = Upsilon^H C_w^{-1} Upsilon / noise_var. Throws NumericError when
/// the FIM is singular.
double crlb_gamma(const TrainingEnsemble& ens, const std::vector<CMatrix>& a_rx,
                  const std::vector<CMatrix>& a_tx, double noise_var, std::size_t n_subcarriers);

/// Uplink bound gamma summed over users.
double crlb(const ChannelRealization& ch, const TrainingEnsemble& ens, double noise_var);
/// Uplink bound normalized by the total channel energy.
double crlb_nmse(const ChannelRealization& ch, const TrainingEnsemble& ens, double noise_var);
/// Downlink bound normalized by the total channel energy, summed over users.
double crlb_nmse_downlink(const ChannelRealization& ch, const std::vector<TrainingEnsemble>& ens,
                          double noise_var);

/// Whitened least squares for the path gains on the true support; the
/// efficient estimator whose error the bound describes. Returns [u][k]
/// downlink-orientation channels.
MatrixGrid genie_uplink_estimate(const ChannelRealization& ch, const TrainingEnsemble& ens,
                                 const std::vector<CVector>& y);

}  // namespace mmw

#endif  // MMW_ESTIMATION_HPP
