// SPDX-License-Identifier: Apache-2.0
//
// Helpers shared by the unit tests.

#ifndef MMW_TEST_UTIL_HPP
#define MMW_TEST_UTIL_HPP

#include <random>

#include "mmw/linalg.hpp"

namespace mmw::testing {

inline CMatrix random_matrix(int rows, int cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    CMatrix m(rows, cols);
    for (int j = 0; j < cols; ++j) {
        for (int i = 0; i < rows; ++i) {
            m(i, j) = cdouble(n(rng), n(rng)) / std::sqrt(2.0);
        }
    }
    return m;
}

inline CMatrix random_unit_modulus(int rows, int cols, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 2.0 * 3.14159265358979323846);
    CMatrix m(rows, cols);
    for (int j = 0; j < cols; ++j) {
        for (int i = 0; i < rows; ++i) {
            m(i, j) = std::polar(1.0, u(rng));
        }
    }
    return m;
}

// Channel grid [u][k] of n_ms x n_bs Gaussian blocks.
inline MatrixGrid random_channels(int n_users, int n_sub, int n_ms, int n_bs, std::mt19937_64& rng) {
    MatrixGrid h(n_users);
    for (auto& hu : h) {
        for (int k = 0; k < n_sub; ++k) {
            hu.push_back(random_matrix(n_ms, n_bs, rng));
        }
    }
    return h;
}

inline double rel_diff(const CMatrix& a, const CMatrix& b) {
    const double nb = b.norm();
    return nb == 0.0 ? a.norm() : (a - b).norm() / nb;
}

}  // namespace mmw::testing

#endif  // MMW_TEST_UTIL_HPP
