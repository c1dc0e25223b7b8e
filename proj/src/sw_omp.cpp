// SPDX-License-Identifier: Apache-2.0

#include "mmw/sw_omp.hpp"

#include <stdexcept>

#include <Eigen/QR>

#include "mmw/channel.hpp"

namespace mmw {

SparseEstimate sw_omp(const std::vector<CVector>& y_w, const CMatrix& upsilon_w, double epsilon,
                      int max_support) {
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("sw_omp: epsilon must be positive");
    }
    if (max_support < 0) {
        throw std::invalid_argument("sw_omp: max_support must be non-negative");
    }
    const auto n_sc = static_cast<Eigen::Index>(y_w.size());
    const Eigen::Index rows = upsilon_w.rows();
    CMatrix y(rows, n_sc);
    for (Eigen::Index k = 0; k < n_sc; ++k) {
        if (y_w[k].size() != rows) {
            throw std::invalid_argument("sw_omp: measurement length does not match the sensing matrix");
        }
        y.col(k) = y_w[k];
    }
    require_finite(y, "sw_omp measurements");
    require_finite(upsilon_w, "sw_omp sensing matrix");

    SparseEstimate est;
    est.gains = CMatrix(0, n_sc);
    const double denom = static_cast<double>(n_sc) * static_cast<double>(rows);
    CMatrix residual = y;
    est.residual_mse = denom > 0 ? residual.squaredNorm() / denom : 0.0;
    est.mse_trace.push_back(est.residual_mse);

    std::vector<char> used(static_cast<std::size_t>(upsilon_w.cols()), 0);
    const auto cap = std::min<Eigen::Index>(max_support, upsilon_w.cols());
    while (est.residual_mse >= epsilon && static_cast<Eigen::Index>(est.support.size()) < cap) {
        const CMatrix corr = upsilon_w.adjoint() * residual;
        const RVector score = corr.cwiseAbs().rowwise().sum();
        Eigen::Index best = -1;
        double best_score = 0.0;
        for (Eigen::Index p = 0; p < score.size(); ++p) {
            if (!used[p] && score(p) > best_score) {
                best_score = score(p);
                best = p;
            }
        }
        if (best < 0) {
            break;  // residual orthogonal to every remaining atom
        }
        used[best] = 1;
        est.support.push_back(static_cast<std::size_t>(best));

        CMatrix a(rows, static_cast<Eigen::Index>(est.support.size()));
        for (std::size_t i = 0; i < est.support.size(); ++i) {
            a.col(static_cast<Eigen::Index>(i)) = upsilon_w.col(static_cast<Eigen::Index>(est.support[i]));
        }
        Eigen::ColPivHouseholderQR<CMatrix> qr(a);
        if (qr.rank() < a.cols()) {
            est.rank_deficient = true;
            est.gains = pinv(a) * y;
        } else {
            est.gains = qr.solve(y);
        }
        residual = y - a * est.gains;
        est.residual_mse = residual.squaredNorm() / denom;
        est.mse_trace.push_back(est.residual_mse);
        ++est.iterations;
    }
    return est;
}

void to_json(nlohmann::json& j, const SparseEstimate& est) {
    j = {{"support", est.support},
         {"gains", matrix_to_json(est.gains)},
         {"residual_mse", est.residual_mse},
         {"iterations", est.iterations},
         {"rank_deficient", est.rank_deficient}};
}

void from_json(const nlohmann::json& j, SparseEstimate& est) {
    est.support = j.at("support").get<std::vector<std::size_t>>();
    est.gains = matrix_from_json(j.at("gains"));
    est.residual_mse = j.at("residual_mse").get<double>();
    est.iterations = j.at("iterations").get<int>();
    est.rank_deficient = j.value("rank_deficient", false);
    est.mse_trace.clear();
}

}  // namespace mmw
