#include <gtest/gtest.h>

#include "abba/arnoldi.hpp"
#include "test_helpers.hpp"

using namespace abba;
using namespace abba::testing;

namespace {

/// Dense least squares by complete orthogonal decomposition (Eigen oracle).
Vector eigenLeastSquares(const DenseMatrix& h, double beta) {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(h.rows));
  rhs(0) = beta;
  return fromEigen(toEigen(h).completeOrthogonalDecomposition().solve(rhs));
}

/// (HᵀH + λ²I)⁻¹ Hᵀ β e1 by Cholesky on the regularized normal equations.
Vector eigenTikhonov(const DenseMatrix& h, double beta, double lambda) {
  const Eigen::MatrixXd H = toEigen(h);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(H.rows());
  rhs(0) = beta;
  const Eigen::MatrixXd n = H.transpose() * H + lambda * lambda * Eigen::MatrixXd::Identity(H.cols(), H.cols());
  return fromEigen(n.llt().solve(H.transpose() * rhs));
}

}  // namespace

TEST(ArnoldiStep, IdentityBreaksDownAtStepOne) {
  ArnoldiState s = ArnoldiState::start(Vector{1, 0, 0});
  const ArnoldiStep st = arnoldiStep(s, identityOperator(3), true);
  EXPECT_TRUE(st.breakdown);
  EXPECT_EQ(s.hessenberg()(0, 0), 1.0);
  EXPECT_EQ(s.hessenberg()(1, 0), 0.0);
  EXPECT_EQ(s.basis().size(), 1u);
  EXPECT_THROW(arnoldiStep(s, identityOperator(3), true), ConfigurationError);
}

TEST(ArnoldiStep, PermutationOperator) {
  ArnoldiState s = ArnoldiState::start(Vector{1, 0});
  const auto perm = denseOperator(DenseMatrix::fromRows({{0, 1}, {1, 0}}));
  const ArnoldiStep st = arnoldiStep(s, perm, true);
  EXPECT_FALSE(st.breakdown);  // dimension 2, one step taken
  EXPECT_EQ(s.hessenberg()(0, 0), 0.0);
  EXPECT_EQ(s.hessenberg()(1, 0), 1.0);
  ASSERT_EQ(s.basis().size(), 2u);
  EXPECT_EQ(s.basis()[1], (Vector{0, 1}));
}

TEST(ArnoldiStep, Random12x12EightSteps) {
  const auto M = denseOperator(randomDense(12, 12, 17));
  ArnoldiState s = ArnoldiState::start(randomVector(12, 18));
  for (int k = 0; k < 8; ++k) {
    ASSERT_FALSE(arnoldiStep(s, M, true).breakdown);
    EXPECT_LT(orthonormalityDefect(s.basis()), 1e-12);
    EXPECT_LT(factorizationResidual(s, M), 1e-11);
  }
  const DenseMatrix h = s.hessenberg();
  for (std::size_t i = 0; i < h.rows; ++i)
    for (std::size_t j = 0; j < h.cols; ++j)
      if (i > j + 1) {
        EXPECT_EQ(h(i, j), 0.0);
      }

  // explicit recomputation: M W_8 == W_9 H_8
  for (std::size_t j = 0; j < 8; ++j) {
    Vector lhs = M.apply(s.basis()[j]);
    for (std::size_t i = 0; i < 9; ++i) axpy(-h(i, j), s.basis()[i], lhs);
    EXPECT_LT(norm2(lhs), 1e-11 * norm2(M.apply(s.basis()[j])));
  }
}

TEST(ArnoldiStep, FullDimensionTerminates) {
  const auto M = denseOperator(randomDense(5, 5, 3));
  ArnoldiState s = ArnoldiState::start(randomVector(5, 4));
  int steps = 0;
  while (!s.brokenDown()) {
    arnoldiStep(s, M, true);
    ++steps;
  }
  EXPECT_EQ(steps, 5);
  EXPECT_LT(factorizationResidual(s, M), 1e-11);
}

TEST(ArnoldiStep, ShapeMismatch) {
  ArnoldiState s = ArnoldiState::start(Vector{1, 2, 3});
  EXPECT_THROW(arnoldiStep(s, identityOperator(4), true), ConfigurationError);
}

// ---------------------------------------------------------------------------

TEST(SolveProjectedLS, TrivialCases) {
  auto a = solveProjectedLS(DenseMatrix::fromRows({{1}, {0}}), 3.0);
  EXPECT_DOUBLE_EQ(a.y[0], 3.0);
  EXPECT_DOUBLE_EQ(a.projResidualNorm, 0.0);
  EXPECT_EQ(a.lambdaUsed, 0.0);
  auto b = solveProjectedLS(DenseMatrix::fromRows({{0}, {1}}), 2.0);
  EXPECT_DOUBLE_EQ(b.y[0], 0.0);
  EXPECT_DOUBLE_EQ(b.projResidualNorm, 2.0);
}

TEST(SolveProjectedLS, MatchesDenseOracle) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const DenseMatrix h = randomHessenberg(6, seed);
    const auto sol = solveProjectedLS(h, 1.0);
    EXPECT_LT(relDiff(sol.y, eigenLeastSquares(h, 1.0)), 1e-10);
    EXPECT_NEAR(sol.projResidualNorm, projectedResidualNorm(h, 1.0, sol.y), 1e-12);
    EXPECT_FALSE(sol.rankDeficient);
  }
}

TEST(SolveProjectedLS, RankDeficientGivesMinimumNorm) {
  DenseMatrix h = DenseMatrix::fromRows({{1, 1, 0}, {1, 1, 0}, {0, 0, 2}, {0, 0, 1}});
  const auto sol = solveProjectedLS(h, 2.0);
  EXPECT_TRUE(sol.rankDeficient);
  EXPECT_LT(relDiff(sol.y, eigenLeastSquares(h, 2.0)), 1e-10);
}

TEST(SolveProjectedTikhonov, ScalarCases) {
  const DenseMatrix h = DenseMatrix::fromRows({{2}, {0}});
  EXPECT_DOUBLE_EQ(solveProjectedTikhonov(h, 1.0, 0.0).y[0], 0.5);
  EXPECT_NEAR(solveProjectedTikhonov(h, 1.0, 2.0).y[0], 0.25, 1e-15);
  EXPECT_THROW(solveProjectedTikhonov(h, 1.0, -1.0), ConfigurationError);
}

TEST(SolveProjectedTikhonov, MatchesDenseOracle) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const DenseMatrix h = randomHessenberg(8, 100 + seed);
    EXPECT_LT(relDiff(solveProjectedTikhonov(h, 1.0, 0.3).y, eigenTikhonov(h, 1.0, 0.3)), 1e-11);
  }
}

TEST(SolveProjectedTikhonov, MonotoneInLambda) {
  const DenseMatrix h = randomHessenberg(7, 55);
  double prevY = std::numeric_limits<double>::infinity(), prevR = -1.0;
  for (double lambda : {1e-4, 1e-3, 1e-2, 0.1, 0.3, 1.0, 3.0, 10.0}) {
    const auto s = solveProjectedTikhonov(h, 1.5, lambda);
    const double ny = norm2(s.y);
    EXPECT_LE(ny, prevY * (1 + 1e-12));
    EXPECT_GE(s.projResidualNorm, prevR * (1 - 1e-12));
    prevY = ny;
    prevR = s.projResidualNorm;
  }
}

TEST(SolveProjectedTikhonov, ContinuityAsLambdaVanishes) {
  const DenseMatrix h = randomHessenberg(6, 77);
  const auto ls = solveProjectedLS(h, 1.0);
  EXPECT_LT(relDiff(solveProjectedTikhonov(h, 1.0, 1e-8).y, ls.y), 1e-5);
}

// ---------------------------------------------------------------------------

TEST(SvdOfHessenberg, TrivialCases) {
  EXPECT_DOUBLE_EQ(svdOfHessenberg(DenseMatrix::fromRows({{3}, {0}})).sigma[0], 3.0);
  // orthonormal columns scaled by 2
  const DenseMatrix q = DenseMatrix::fromRows({{0.6, 0}, {0.8, 0}, {0, 1}});
  DenseMatrix h = q;
  for (auto& v : h.data) v *= 2.0;
  for (double s : svdOfHessenberg(h).sigma) EXPECT_NEAR(s, 2.0, 1e-14);
}

TEST(SvdOfHessenberg, ReconstructionAndGramOracle) {
  const DenseMatrix h = randomHessenberg(9, 31);
  const SvdResult svd = svdOfHessenberg(h);
  ASSERT_EQ(svd.sigma.size(), 9u);
  for (std::size_t i = 1; i < 9; ++i) EXPECT_GE(svd.sigma[i - 1], svd.sigma[i]);
  double worst = 0.0;
  for (std::size_t i = 0; i < h.rows; ++i)
    for (std::size_t j = 0; j < h.cols; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < 9; ++l) acc += svd.u(i, l) * svd.sigma[l] * svd.v(j, l);
      worst = std::max(worst, std::abs(acc - h(i, j)));
    }
  EXPECT_LT(worst, 1e-11 * svd.sigma[0]);
  // UᵀU = I, VᵀV = I
  const DenseMatrix utu = svd.u.transposed() * svd.u, vtv = svd.v.transposed() * svd.v;
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 9; ++j) {
      EXPECT_NEAR(utu(i, j), i == j ? 1.0 : 0.0, 1e-12);
      EXPECT_NEAR(vtv(i, j), i == j ? 1.0 : 0.0, 1e-12);
    }
  const Eigen::MatrixXd H = toEigen(h);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H.transpose() * H);
  for (std::size_t i = 0; i < 9; ++i) {
    const double oracle = std::sqrt(std::max(0.0, es.eigenvalues()(8 - static_cast<Eigen::Index>(i))));
    EXPECT_NEAR(svd.sigma[i], oracle, 1e-9 * svd.sigma[0]);
  }
}
