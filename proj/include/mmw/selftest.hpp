// SPDX-License-Identifier: Apache-2.0
//
// Fast invariant checks run by `mmw selftest`, also reused by the tests.

#ifndef MMW_SELFTEST_HPP
#define MMW_SELFTEST_HPP

#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "mmw/hybrid.hpp"

namespace mmw {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

using GradientFn = std::function<CMatrix(const FactorizationTarget&, const CMatrix&)>;

/// The library gradient.
GradientFn default_gradient();

/// Random factorization problem: U users, K subcarriers, N_s = 2, Gaussian
/// blocks, per-block power 1 / (U N_s), and a continuous-phase RF matrix.
struct GradientProblem {
    FactorizationTarget target;
    CMatrix rf;
};
GradientProblem random_gradient_problem(int n_ant, int l_chains, int n_users, int n_subcarriers,
                                        std::mt19937_64& rng);

/// Central finite differences of the distortion: (dd/dRe + j dd/dIm) / 2.
CMatrix finite_difference_gradient(const FactorizationTarget& target, const CMatrix& rf,
                                   double h = 1e-6);

/// ||grad - fd|| / ||fd||.
double gradient_relative_error(const FactorizationTarget& target, const CMatrix& rf,
                               const GradientFn& grad, double h = 1e-6);

/// Worst relative gradient error over `seeds` problems at n=16, l=3, U=2, K=4.
CheckResult check_gradient(const GradientFn& grad, int seeds = 10);

/// Every check; a null `grad` uses the library gradient.
std::vector<CheckResult> run_selftest(const GradientFn& grad = {});

/// One line per check plus a summary line.
void print_report(std::ostream& os, const std::vector<CheckResult>& results);

}  // namespace mmw

#endif  // MMW_SELFTEST_HPP
