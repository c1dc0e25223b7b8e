// SPDX-License-Identifier: Apache-2.0
//
// Downlink sum-rate and uplink per-user MSE.

#ifndef MMW_METRICS_HPP
#define MMW_METRICS_HPP

#include <cstddef>
#include <vector>

#include "mmw/linalg.hpp"

namespace mmw {

/// (1/K) sum_u sum_k log2 det(I + X_u^{-1} W^H H_u P_u P_u^H H_u^H W), where
/// X_u collects the other users' streams plus noise_var W^H W. h is in
/// downlink orientation. A singular X_u falls back to the pseudo-inverse
/// and sets *singular.
double sum_rate(const MatrixGrid& h, const MatrixGrid& precoders, const MatrixGrid& combiners,
                double noise_var, bool* singular = nullptr);

/// N_s - 2 Re tr(F^H H_u^H T_u) + tr(F^H (sum_i H_i^H T_i T_i^H H_i + noise_var I) F)
/// at one subcarrier. h_k[i] is H_i (n_ms x n_bs), t_k[i] the UL precoder.
double ul_mse(const std::vector<CMatrix>& h_k, const std::vector<CMatrix>& t_k, const CMatrix& f,
              double noise_var, std::size_t u);

/// The same expression in terms of R_D = H_u^H T_u and R_I (interference
/// plus noise covariance).
double ul_mse_from_correlations(const CMatrix& r_d, const CMatrix& r_i, const CMatrix& f);

/// min over complex scalars a of MSE(a F); zero when F carries no signal
/// gives N_s.
double ul_mse_scale_optimal(const CMatrix& r_d, const CMatrix& r_i, const CMatrix& f);

}  // namespace mmw

#endif  // MMW_METRICS_HPP
