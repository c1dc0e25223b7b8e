// SPDX-License-Identifier: Apache-2.0
//
// All-digital uplink precoders and combiners, and their reuse as downlink
// filters.
//
// Channels are passed in downlink orientation, h[u][k] = H_u[k]
// (n_ms x n_bs); the uplink channel of user u is h[u][k]^H.

#ifndef MMW_DIGITAL_HPP
#define MMW_DIGITAL_HPP

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "mmw/config.hpp"
#include "mmw/linalg.hpp"

namespace mmw {

enum class CombinerKind { mmse, mrc, cb };

std::string to_string(CombinerKind kind);
CombinerKind combiner_kind_from_string(std::string_view text);

/// Waterfilling over parallel channels with gains g_i:
/// p_i = max(0, mu - 1/g_i), sum p_i = power. Throws when every gain is zero.
RVector waterfill(const RVector& gains, double power);

/// Leading n_streams right singular vectors of h^H scaled by the waterfilling
/// allocation over gains s_i^2 / noise_var. With noise_var == 0 the power is
/// split evenly over the nonzero singular values (the high-SNR limit).
CMatrix ul_precoder(const CMatrix& h, int n_streams, double power, double noise_var);

/// Per-user precoders for every user and subcarrier at power P_tx / U.
MatrixGrid ul_precoders(const MatrixGrid& h, const SystemConfig& cfg, double noise_var);

/// sum_i H_i^H T_i T_i^H H_i over users at one subcarrier, optionally
/// skipping user `skip`.
CMatrix received_covariance(const std::vector<CMatrix>& h_k, const std::vector<CMatrix>& t_k,
                            std::size_t skip = static_cast<std::size_t>(-1));

/// (sum_i H_i^H T_i T_i^H H_i + noise_var I)^{-1} H_u^H T_u for every user u.
/// noise_var == 0 uses the pseudo-inverse.
std::vector<CMatrix> mmse_combiner(const std::vector<CMatrix>& h_k,
                                   const std::vector<CMatrix>& t_k, double noise_var);

/// H_u^H T_u.
CMatrix mrc_combiner(const CMatrix& h, const CMatrix& t);

struct CbCombiner {
    CMatrix f;
    std::size_t interference_rank = 0;
    bool fallback = false;  // nullspace was empty; the weakest eigenvectors were used
};

/// Projects H_u^H T_u onto the nullspace of the interference matrix built
/// from every other user.
CbCombiner cb_combiner(const std::vector<CMatrix>& h_k, const std::vector<CMatrix>& t_k,
                       std::size_t u);

struct DigitalFilterSet {
    MatrixGrid ul_precoders;  // [u][k] n_ms x n_streams
    MatrixGrid ul_combiners;  // [u][k] n_bs x n_streams
    CombinerKind kind = CombinerKind::mmse;
    int fallbacks = 0;        // CB blocks that needed the nullspace fallback
};

/// Combiners of the given kind for fixed precoders.
MatrixGrid design_combiners(const MatrixGrid& h, const MatrixGrid& precoders, CombinerKind kind,
                            double noise_var, int* fallbacks = nullptr);

DigitalFilterSet design_digital(const MatrixGrid& h, const SystemConfig& cfg, CombinerKind kind,
                                double noise_var);

struct DownlinkFilters {
    MatrixGrid precoders;  // [u][k] n_bs x n_streams
    MatrixGrid combiners;  // [u][k] n_ms x n_streams
};

/// DL precoder = UL combiner rescaled to ||P||^2 = P_tx / (U * N_s); DL
/// combiner = UL precoder. Throws on a zero-norm combiner.
DownlinkFilters dl_filters_from_ul(const MatrixGrid& ul_precoders,
                                   const MatrixGrid& ul_combiners, const SystemConfig& cfg);

}  // namespace mmw

#endif  // MMW_DIGITAL_HPP
