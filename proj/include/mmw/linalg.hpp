// SPDX-License-Identifier: Apache-2.0
//
// Dense complex linear-algebra kernels shared by every other module.
// All functions are pure; none keep state between calls.

#ifndef MMW_LINALG_HPP
#define MMW_LINALG_HPP

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mmw {

using cdouble = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

/// Matrices indexed by [user][subcarrier].
using MatrixGrid = std::vector<std::vector<CMatrix>>;

/// Raised when a decomposition cannot produce a trustworthy result.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by cholesky() for inputs that are not Hermitian positive definite.
class DecompositionError : public NumericError {
public:
    using NumericError::NumericError;
};

void require_finite(const CMatrix& a, const std::string& what);

struct SvdResult {
    CMatrix u;
    RVector s;  // descending, non-negative
    CMatrix v;
};

/// Thin SVD, a = u * diag(s) * v^H.
SvdResult svd(const CMatrix& a);

/// Upper-triangular d with c = d^H d.
CMatrix cholesky(const CMatrix& c);

/// Moore-Penrose pseudo-inverse. A negative tol selects the default
/// max(rows, cols) * eps * s_max.
CMatrix pinv(const CMatrix& a, double tol = -1.0);

/// Orthonormal basis of the numerical nullspace of a Hermitian PSD matrix.
/// Eigenvalues <= rel_tol * lambda_max count as zero; an all-zero input gives
/// the identity.
CMatrix nullspace_basis(const CMatrix& a, double rel_tol = 1e-10);

/// Numerical rank of a Hermitian PSD matrix under the same rule.
std::size_t hermitian_rank(const CMatrix& a, double rel_tol = 1e-10);

CMatrix kron(const CMatrix& a, const CMatrix& b);

/// Columnwise Kronecker product; column j is kron(a.col(j), b.col(j)).
CMatrix khatri_rao(const CMatrix& a, const CMatrix& b);

/// Entrywise projection onto the unit circle. Zero entries map to 1.
CMatrix phase_project(const CMatrix& a);

/// (a)^{-1/2} for Hermitian positive definite a.
CMatrix inv_sqrt_hpd(const CMatrix& a);

/// Squared Frobenius norm.
inline double frob2(const CMatrix& a) { return a.squaredNorm(); }

/// Horizontal concatenation of grid blocks in user-major, subcarrier-minor order.
CMatrix hstack(const MatrixGrid& blocks);

/// Inverse of hstack for blocks with the given column counts per user.
MatrixGrid split_columns(const CMatrix& stacked, const std::vector<int>& cols_per_user,
                         std::size_t n_subcarriers);

}  // namespace mmw

#endif  // MMW_LINALG_HPP
