// SPDX-License-Identifier: Apache-2.0

#include "mmw/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "mmw/digital.hpp"

namespace mmw {

double sum_rate(const MatrixGrid& h, const MatrixGrid& precoders, const MatrixGrid& combiners,
                double noise_var, bool* singular) {
    if (h.size() != precoders.size() || h.size() != combiners.size() || h.empty()) {
        throw std::invalid_argument("sum_rate: user count mismatch");
    }
    const std::size_t n_sc = h.front().size();
    bool any_singular = false;
    double total = 0.0;
    for (std::size_t k = 0; k < n_sc; ++k) {
        for (std::size_t u = 0; u < h.size(); ++u) {
            const CMatrix& w = combiners[u][k];
            const CMatrix wh_h = w.adjoint() * h[u][k];
            const CMatrix desired = wh_h * precoders[u][k];
            CMatrix x = noise_var * (w.adjoint() * w);
            for (std::size_t i = 0; i < h.size(); ++i) {
                if (i != u) {
                    const CMatrix leak = wh_h * precoders[i][k];
                    x.noalias() += leak * leak.adjoint();
                }
            }
            const CMatrix s = desired * desired.adjoint();
            if (s.squaredNorm() == 0.0) {
                continue;
            }
            const double scale = std::max(x.cwiseAbs().maxCoeff(), s.cwiseAbs().maxCoeff());
            Eigen::LLT<CMatrix> llt(x);
            CMatrix x_inv_s;
            if (llt.info() == Eigen::Success && llt.rcond() > 1e-13 &&
                x.cwiseAbs().maxCoeff() > 1e-300 * scale) {
                x_inv_s = llt.solve(s);
            } else {
                any_singular = true;
                x_inv_s = pinv(x) * s;
            }
            const CMatrix m = CMatrix::Identity(s.rows(), s.cols()) + x_inv_s;
            const cdouble det = m.partialPivLu().determinant();
            total += std::log2(std::abs(det));
        }
    }
    if (singular) {
        *singular = any_singular;
    }
    return total / static_cast<double>(n_sc);
}

double ul_mse_from_correlations(const CMatrix& r_d, const CMatrix& r_i, const CMatrix& f) {
    const double n_s = static_cast<double>(r_d.cols());
    const cdouble cross = (f.adjoint() * r_d).trace();
    const cdouble quad = (f.adjoint() * r_i * f).trace();
    return n_s - 2.0 * cross.real() + quad.real();
}

double ul_mse_scale_optimal(const CMatrix& r_d, const CMatrix& r_i, const CMatrix& f) {
    const double n_s = static_cast<double>(r_d.cols());
    const cdouble cross = (f.adjoint() * r_d).trace();
    const double quad = (f.adjoint() * r_i * f).trace().real();
    if (quad <= 0.0) {
        return n_s;
    }
    return n_s - std::norm(cross) / quad;
}

double ul_mse(const std::vector<CMatrix>& h_k, const std::vector<CMatrix>& t_k, const CMatrix& f,
              double noise_var, std::size_t u) {
    if (u >= h_k.size()) {
        throw std::out_of_range("ul_mse: user index out of range");
    }
    CMatrix r_i = received_covariance(h_k, t_k);
    r_i.diagonal().array() += noise_var;
    return ul_mse_from_correlations(h_k[u].adjoint() * t_k[u], r_i, f);
}

}  // namespace mmw
