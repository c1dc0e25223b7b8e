// SPDX-License-Identifier: Apache-2.0

#include "mmw/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace mmw {

void require_finite(const CMatrix& a, const std::string& what) {
    if (!a.allFinite()) {
        throw std::invalid_argument(what + ": matrix has non-finite entries");
    }
}

SvdResult svd(const CMatrix& a) {
    require_finite(a, "svd");
    if (a.size() == 0) {
        return {CMatrix(a.rows(), 0), RVector(0), CMatrix(a.cols(), 0)};
    }
    Eigen::BDCSVD<CMatrix> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (dec.info() != Eigen::Success) {
        throw NumericError("svd: decomposition did not converge");
    }
    SvdResult out{dec.matrixU(), dec.singularValues(), dec.matrixV()};
    if (!out.u.allFinite() || !out.v.allFinite() || !out.s.allFinite()) {
        throw NumericError("svd: non-finite factors");
    }
    return out;
}

CMatrix cholesky(const CMatrix& c) {
    require_finite(c, "cholesky");
    if (c.rows() != c.cols()) {
        throw std::invalid_argument("cholesky: matrix must be square");
    }
    const double scale = std::max(c.cwiseAbs().maxCoeff(), 1e-300);
    if ((c - c.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw DecompositionError("cholesky: matrix is not Hermitian");
    }
    Eigen::LLT<CMatrix> llt(c);
    if (llt.info() != Eigen::Success) {
        throw DecompositionError("cholesky: matrix is not positive definite");
    }
    CMatrix l = llt.matrixL();
    return l.adjoint();
}

CMatrix pinv(const CMatrix& a, double tol) {
    require_finite(a, "pinv");
    CMatrix out = CMatrix::Zero(a.cols(), a.rows());
    if (a.size() == 0) {
        return out;
    }
    const SvdResult dec = svd(a);
    const double s_max = dec.s.size() ? dec.s(0) : 0.0;
    if (tol < 0.0) {
        tol = static_cast<double>(std::max(a.rows(), a.cols())) *
              std::numeric_limits<double>::epsilon() * s_max;
    }
    for (Eigen::Index i = 0; i < dec.s.size(); ++i) {
        if (dec.s(i) > tol) {
            out.noalias() += (dec.v.col(i) / dec.s(i)) * dec.u.col(i).adjoint();
        }
    }
    return out;
}

namespace {

Eigen::SelfAdjointEigenSolver<CMatrix> hermitian_eig(const CMatrix& a) {
    require_finite(a, "hermitian eigendecomposition");
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("hermitian eigendecomposition: matrix must be square");
    }
    CMatrix sym = 0.5 * (a + a.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(sym);
    if (eig.info() != Eigen::Success) {
        throw NumericError("hermitian eigendecomposition did not converge");
    }
    return eig;
}

}  // namespace

std::size_t hermitian_rank(const CMatrix& a, double rel_tol) {
    if (a.size() == 0) {
        return 0;
    }
    const auto eig = hermitian_eig(a);
    const RVector& lam = eig.eigenvalues();
    const double lam_max = lam.cwiseAbs().maxCoeff();
    if (lam_max == 0.0) {
        return 0;
    }
    return static_cast<std::size_t>((lam.array() > rel_tol * lam_max).count());
}

CMatrix nullspace_basis(const CMatrix& a, double rel_tol) {
    const Eigen::Index n = a.rows();
    if (n == 0) {
        return CMatrix(0, 0);
    }
    const auto eig = hermitian_eig(a);
    const RVector& lam = eig.eigenvalues();  // ascending
    const double lam_max = lam.cwiseAbs().maxCoeff();
    if (lam_max == 0.0) {
        return CMatrix::Identity(n, n);
    }
    Eigen::Index null_dim = 0;
    while (null_dim < n && lam(null_dim) <= rel_tol * lam_max) {
        ++null_dim;
    }
    return eig.eigenvectors().leftCols(null_dim);
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

CMatrix khatri_rao(const CMatrix& a, const CMatrix& b) {
    if (a.cols() != b.cols()) {
        throw std::invalid_argument("khatri_rao: column counts differ (" +
                                    std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.cols()) + ")");
    }
    CMatrix out(a.rows() * b.rows(), a.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            out.col(j).segment(i * b.rows(), b.rows()) = a(i, j) * b.col(j);
        }
    }
    return out;
}

CMatrix phase_project(const CMatrix& a) {
    CMatrix out(a.rows(), a.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            const double mag = std::abs(a(i, j));
            out(i, j) = mag > 0.0 ? a(i, j) / mag : cdouble(1.0, 0.0);
        }
    }
    return out;
}

CMatrix inv_sqrt_hpd(const CMatrix& a) {
    const auto eig = hermitian_eig(a);
    const RVector& lam = eig.eigenvalues();
    if (lam.size() && lam.minCoeff() <= 0.0) {
        throw NumericError("inv_sqrt_hpd: matrix is not positive definite");
    }
    const CMatrix& q = eig.eigenvectors();
    return q * lam.cwiseSqrt().cwiseInverse().asDiagonal() * q.adjoint();
}

CMatrix hstack(const MatrixGrid& blocks) {
    Eigen::Index rows = -1;
    Eigen::Index cols = 0;
    for (const auto& user : blocks) {
        for (const auto& b : user) {
            if (rows >= 0 && b.rows() != rows) {
                throw std::invalid_argument("hstack: row counts differ");
            }
            rows = b.rows();
            cols += b.cols();
        }
    }
    CMatrix out(std::max<Eigen::Index>(rows, 0), cols);
    Eigen::Index at = 0;
    for (const auto& user : blocks) {
        for (const auto& b : user) {
            out.middleCols(at, b.cols()) = b;
            at += b.cols();
        }
    }
    return out;
}

MatrixGrid split_columns(const CMatrix& stacked, const std::vector<int>& cols_per_user,
                         std::size_t n_subcarriers) {
    MatrixGrid out(cols_per_user.size());
    Eigen::Index at = 0;
    for (std::size_t u = 0; u < cols_per_user.size(); ++u) {
        out[u].reserve(n_subcarriers);
        for (std::size_t k = 0; k < n_subcarriers; ++k) {
            if (at + cols_per_user[u] > stacked.cols()) {
                throw std::invalid_argument("split_columns: stacked matrix too narrow");
            }
            out[u].push_back(stacked.middleCols(at, cols_per_user[u]));
            at += cols_per_user[u];
        }
    }
    if (at != stacked.cols()) {
        throw std::invalid_argument("split_columns: column count mismatch");
    }
    return out;
}

}  // namespace mmw
