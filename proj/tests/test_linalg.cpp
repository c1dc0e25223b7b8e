// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "mmw/linalg.hpp"
#include "test_util.hpp"

using namespace mmw;
using mmw::testing::random_matrix;

TEST(Svd, ReconstructsWithDescendingValues) {
    std::mt19937_64 rng(1);
    const CMatrix a = random_matrix(7, 4, rng);
    const SvdResult r = svd(a);
    EXPECT_LT((r.u * r.s.cast<cdouble>().asDiagonal() * r.v.adjoint() - a).norm(), 1e-12);
    for (Eigen::Index i = 1; i < r.s.size(); ++i) {
        EXPECT_GE(r.s(i - 1), r.s(i));
    }
}

TEST(Cholesky, UpperFactorReproducesMatrix) {
    std::mt19937_64 rng(2);
    const CMatrix b = random_matrix(5, 5, rng);
    const CMatrix c = b.adjoint() * b + CMatrix::Identity(5, 5);
    const CMatrix d = cholesky(c);
    EXPECT_LT((d.adjoint() * d - c).norm(), 1e-11);
    EXPECT_LT(d.triangularView<Eigen::StrictlyLower>().toDenseMatrix().norm(), 1e-15);
}

TEST(Cholesky, RejectsIndefinite) {
    CMatrix c = CMatrix::Identity(2, 2);
    c(1, 1) = -1.0;
    EXPECT_THROW(cholesky(c), DecompositionError);
}

TEST(Pinv, SatisfiesPenroseConditionsOnRankDeficientInput) {
    std::mt19937_64 rng(3);
    const CMatrix a = random_matrix(6, 2, rng) * random_matrix(2, 5, rng);
    const CMatrix p = pinv(a);
    EXPECT_LT((a * p * a - a).norm(), 1e-10);
    EXPECT_LT((p * a * p - p).norm(), 1e-10);
    EXPECT_LT(((a * p).adjoint() - a * p).norm(), 1e-10);
}

TEST(Nullspace, IsOrthonormalAndAnnihilates) {
    std::mt19937_64 rng(4);
    const CMatrix b = random_matrix(6, 2, rng);
    const CMatrix a = b * b.adjoint();
    const CMatrix n = nullspace_basis(a);
    ASSERT_EQ(n.cols(), 4);
    EXPECT_LT((a * n).norm(), 1e-10);
    EXPECT_LT((n.adjoint() * n - CMatrix::Identity(4, 4)).norm(), 1e-10);
    EXPECT_EQ(hermitian_rank(a), 2u);
}

TEST(KhatriRao, ColumnsAreKroneckerProducts) {
    std::mt19937_64 rng(5);
    const CMatrix a = random_matrix(3, 4, rng);
    const CMatrix b = random_matrix(2, 4, rng);
    const CMatrix kr = khatri_rao(a, b);
    ASSERT_EQ(kr.rows(), 6);
    for (int j = 0; j < 4; ++j) {
        EXPECT_LT((kr.col(j) - kron(a.col(j), b.col(j))).norm(), 1e-14);
    }
}

TEST(Kron, MixedProductProperty) {
    std::mt19937_64 rng(6);
    const CMatrix a = random_matrix(2, 3, rng), b = random_matrix(3, 2, rng);
    const CMatrix c = random_matrix(3, 2, rng), d = random_matrix(2, 4, rng);
    EXPECT_LT((kron(a, b) * kron(c, d) - kron(a * c, b * d)).norm(), 1e-12);
}

TEST(PhaseProject, GivesUnitModulusAndKeepsPhase) {
    std::mt19937_64 rng(7);
    const CMatrix a = random_matrix(4, 3, rng);
    const CMatrix p = phase_project(a);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        EXPECT_NEAR(std::abs(p(i)), 1.0, 1e-15);
        EXPECT_NEAR(std::arg(p(i)), std::arg(a(i)), 1e-12);
    }
}

TEST(InvSqrtHpd, SquaresToInverse) {
    std::mt19937_64 rng(8);
    const CMatrix b = random_matrix(4, 4, rng);
    const CMatrix c = b.adjoint() * b + 0.5 * CMatrix::Identity(4, 4);
    const CMatrix q = inv_sqrt_hpd(c);
    EXPECT_LT((q * c * q - CMatrix::Identity(4, 4)).norm(), 1e-10);
    EXPECT_LT((q - q.adjoint()).norm(), 1e-12);
}

TEST(Stacking, SplitInvertsHstack) {
    std::mt19937_64 rng(9);
    MatrixGrid blocks(2);
    blocks[0] = {random_matrix(5, 2, rng), random_matrix(5, 2, rng)};
    blocks[1] = {random_matrix(5, 1, rng), random_matrix(5, 1, rng)};
    const MatrixGrid back = split_columns(hstack(blocks), {2, 1}, 2);
    for (int u = 0; u < 2; ++u) {
        for (int k = 0; k < 2; ++k) {
            EXPECT_EQ(back[u][k], blocks[u][k]);
        }
    }
}

TEST(RequireFinite, ThrowsOnNan) {
    CMatrix a = CMatrix::Zero(2, 2);
    a(1, 0) = cdouble(std::nan(""), 0.0);
    EXPECT_THROW(require_finite(a, "a"), std::invalid_argument);
}
