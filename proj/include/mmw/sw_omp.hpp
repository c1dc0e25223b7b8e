// SPDX-License-Identifier: Apache-2.0
//
// Simultaneous weighted orthogonal matching pursuit: greedy recovery of
// K sparse vectors that share one support, from whitened measurements.

#ifndef MMW_SW_OMP_HPP
#define MMW_SW_OMP_HPP

#include <cstddef>
#include <vector>

#include <json.hpp>

#include "mmw/linalg.hpp"

namespace mmw {

struct SparseEstimate {
    std::vector<std::size_t> support;  // discovery order, no repeats
    CMatrix gains;                     // |support| x K; column k is x[k]
    double residual_mse = 0.0;         // sum_k ||r[k]||^2 / (K * rows)
    int iterations = 0;
    bool rank_deficient = false;       // some least-squares step fell back to pinv
    std::vector<double> mse_trace;     // residual MSE before the first and after every iteration
};

/// y_w[k] are the whitened measurements (one per subcarrier), upsilon_w the
/// whitened sensing matrix. Halts once the residual MSE drops below epsilon
/// or the support reaches max_support. Ties in the selection go to the
/// lowest column index.
SparseEstimate sw_omp(const std::vector<CVector>& y_w, const CMatrix& upsilon_w, double epsilon,
                      int max_support);

void to_json(nlohmann::json& j, const SparseEstimate& est);
void from_json(const nlohmann::json& j, SparseEstimate& est);

}  // namespace mmw

#endif  // MMW_SW_OMP_HPP
