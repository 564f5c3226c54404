#pragma once

// Arnoldi factorization M W_k = W_{k+1} H_k and the small projected problems
// solved on H_k.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "abba/linear_operator.hpp"

namespace abba {

struct ArnoldiStep {
  bool breakdown = false;
  double subdiagonal = 0.0;  // h_{k+1,k}
};

class ArnoldiState {
 public:
  /// Starts a factorization from the initial residual r0.
  static ArnoldiState start(std::span<const double> r0) {
    ArnoldiState s;
    s.beta_ = norm2(r0);
    s.dim_ = r0.size();
    if (s.beta_ > 0.0) {
      Vector w(r0.begin(), r0.end());
      scale(1.0 / s.beta_, w);
      s.basis_.push_back(std::move(w));
    }
    return s;
  }

  double beta() const { return beta_; }
  std::size_t steps() const { return columns_.size(); }
  std::size_t dimension() const { return dim_; }
  const std::vector<Vector>& basis() const { return basis_; }
  bool brokenDown() const { return brokenDown_; }

  /// (k+1) x k upper-Hessenberg matrix.
  DenseMatrix hessenberg() const {
    const std::size_t k = steps();
    DenseMatrix h(k + 1, k);
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t i = 0; i < columns_[j].size(); ++i) h(i, j) = columns_[j][i];
    return h;
  }

 private:
  friend ArnoldiStep arnoldiStep(ArnoldiState&, const LinearOperator&, bool);

  double beta_ = 0.0;
  std::size_t dim_ = 0;
  std::vector<Vector> basis_;
  std::vector<Vector> columns_;  // column j holds h_{0..j+1, j}
  bool brokenDown_ = false;
};

inline constexpr double kBreakdownTolerance = 1e-14;

/// Extends the factorization by one column using modified Gram-Schmidt and,
/// optionally, one full reorthogonalization pass.
///
/// Breakdown is reported when h_{k+1,k} <= 1e-14 ‖M w_k‖ or when the basis
/// already spans the whole space; in that case no new basis vector is added.
inline ArnoldiStep arnoldiStep(ArnoldiState& state, const LinearOperator& M, bool reorthogonalize) {
  if (M.rows() != M.cols() || M.cols() != state.dim_)
    throw ConfigurationError("arnoldiStep: operator " + M.shapeString() + " does not match the Krylov basis");
  if (state.brokenDown_ || state.basis_.empty())
    throw ConfigurationError("arnoldiStep: factorization cannot be extended after breakdown");

  const std::size_t k = state.steps();
  Vector q = M.apply(state.basis_[k]);
  const double mwNorm = norm2(q);
  Vector h(k + 2, 0.0);
  for (std::size_t i = 0; i <= k; ++i) {
    h[i] = dot(q, state.basis_[i]);
    axpy(-h[i], state.basis_[i], q);
  }
  if (reorthogonalize) {
    for (std::size_t i = 0; i <= k; ++i) {
      const double c = dot(q, state.basis_[i]);
      h[i] += c;
      axpy(-c, state.basis_[i], q);
    }
  }
  const double hNext = norm2(q);
  h[k + 1] = hNext;
  state.columns_.push_back(std::move(h));

  ArnoldiStep out{false, hNext};
  if (hNext <= kBreakdownTolerance * mwNorm || k + 1 >= state.dim_) {
    out.breakdown = true;
    state.brokenDown_ = true;
    return out;
  }
  scale(1.0 / hNext, q);
  state.basis_.push_back(std::move(q));
  return out;
}

/// max |W^T W - I|.
inline double orthonormalityDefect(const std::vector<Vector>& basis) {
  double worst = 0.0;
  for (std::size_t i = 0; i < basis.size(); ++i)
    for (std::size_t j = i; j < basis.size(); ++j)
      worst = std::max(worst, std::abs(dot(basis[i], basis[j]) - (i == j ? 1.0 : 0.0)));
  return worst;
}

/// max_j ‖M w_j - W h_j‖ / ‖M w_j‖, re-applying M to every basis vector.
inline double factorizationResidual(const ArnoldiState& state, const LinearOperator& M) {
  const DenseMatrix h = state.hessenberg();
  const auto& w = state.basis();
  double worst = 0.0;
  for (std::size_t j = 0; j < state.steps(); ++j) {
    Vector r = M.apply(w[j]);
    const double ref = norm2(r);
    const std::size_t avail = std::min(w.size(), j + 2);
    for (std::size_t i = 0; i < avail; ++i) axpy(-h(i, j), w[i], r);
    if (avail < j + 2) {
      // breakdown column: the dropped direction has norm h_{j+1,j}
      const double dropped = h(j + 1, j);
      worst = std::max(worst, std::max(0.0, norm2(r) - dropped) / (ref > 0.0 ? ref : 1.0));
      continue;
    }
    worst = std::max(worst, norm2(r) / (ref > 0.0 ? ref : 1.0));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// small dense kernels

struct SvdResult {
  Vector sigma;   // descending
  DenseMatrix u;  // rows x cols, orthonormal columns
  DenseMatrix v;  // cols x cols, orthogonal
};

/// Thin SVD of a tall (rows >= cols) matrix by one-sided Jacobi.
inline SvdResult thinSvd(const DenseMatrix& a) {
  const std::size_t m = a.rows, n = a.cols;
  if (m < n) throw ConfigurationError("thinSvd: expected rows >= cols");
  // work column-major for cache-friendly column rotations
  std::vector<Vector> col(n, Vector(m));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) col[j][i] = a(i, j);
  std::vector<Vector> vcol(n, Vector(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) vcol[j][j] = 1.0;

  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (int sweep = 0; sweep < 80; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = dot(col[p], col[p]);
        const double beta = dot(col[q], col[q]);
        const double gamma = dot(col[p], col[q]);
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t), s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double xp = col[p][i], xq = col[q][i];
          col[p][i] = c * xp - s * xq;
          col[q][i] = s * xp + c * xq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double xp = vcol[p][i], xq = vcol[q][i];
          vcol[p][i] = c * xp - s * xq;
          vcol[q][i] = s * xp + c * xq;
        }
      }
    }
    if (!rotated) break;
  }

  Vector norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = norm2(col[j]);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  SvdResult out{Vector(n), DenseMatrix(m, n), DenseMatrix(n, n)};
  const double cutoff = n > 0 ? static_cast<double>(m) * eps * norms[order[0]] : 0.0;
  std::vector<Vector> uCols;
  std::vector<std::size_t> nullSlots;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t j = order[r];
    for (std::size_t i = 0; i < n; ++i) out.v(i, r) = vcol[j][i];
    if (norms[j] > cutoff && norms[j] > 0.0) {
      out.sigma[r] = norms[j];
      Vector uj = col[j];
      scale(1.0 / norms[j], uj);
      uCols.push_back(std::move(uj));
    } else {
      out.sigma[r] = 0.0;
      uCols.emplace_back();
      nullSlots.push_back(r);
    }
  }
  // complete the left factor for numerically zero singular values
  for (std::size_t r : nullSlots) {
    for (std::size_t e = 0; e < m; ++e) {
      Vector cand(m, 0.0);
      cand[e] = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& other : uCols)
          if (!other.empty()) axpy(-dot(cand, other), other, cand);
      const double nc = norm2(cand);
      if (nc > 0.5) {
        scale(1.0 / nc, cand);
        uCols[r] = std::move(cand);
        break;
      }
    }
  }
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < m; ++i) out.u(i, r) = uCols[r][i];
  return out;
}

/// Thin SVD of the (k+1) x k Hessenberg matrix.
inline SvdResult svdOfHessenberg(const DenseMatrix& hess) {
  if (hess.cols < 1) throw ConfigurationError("svdOfHessenberg: need at least one column");
  return thinSvd(hess);
}

// ---------------------------------------------------------------------------
// projected solves

struct ProjectedSolution {
  Vector y;
  double projResidualNorm = 0.0;  // ‖H y - beta e1‖₂ (data-fit part only)
  double lambdaUsed = 0.0;
  bool rankDeficient = false;
};

inline double projectedResidualNorm(const DenseMatrix& h, double beta, std::span<const double> y) {
  Vector r = h.multiply(y);
  r[0] -= beta;
  return norm2(r);
}

namespace detail {

inline Vector minimumNormSolve(const DenseMatrix& h, double beta) {
  const SvdResult svd = thinSvd(h);
  Vector y(h.cols, 0.0);
  for (std::size_t i = 0; i < svd.sigma.size(); ++i) {
    if (svd.sigma[i] == 0.0) continue;
    const double coeff = beta * svd.u(0, i) / svd.sigma[i];
    for (std::size_t r = 0; r < h.cols; ++r) y[r] += coeff * svd.v(r, i);
  }
  return y;
}

}  // namespace detail

/// argmin_y ‖H y - beta e1‖₂ via Givens QR of the Hessenberg matrix; falls
/// back to the minimum-norm solution when H is numerically rank deficient.
inline ProjectedSolution solveProjectedLS(const DenseMatrix& hess, double beta) {
  const std::size_t k = hess.cols;
  if (hess.rows != k + 1) throw ConfigurationError("solveProjectedLS: expected a (k+1) x k matrix");
  DenseMatrix r = hess;
  Vector g(k + 1, 0.0);
  g[0] = beta;
  double scaleRef = 0.0;
  for (double v : hess.data) scaleRef = std::max(scaleRef, std::abs(v));

  for (std::size_t j = 0; j < k; ++j) {
    // zero out everything below the diagonal in column j (only j+1 for Hessenberg input)
    for (std::size_t i = j + 1; i <= k; ++i) {
      const double a = r(j, j), b = r(i, j);
      if (b == 0.0) continue;
      const double rho = std::hypot(a, b);
      const double c = a / rho, s = b / rho;
      for (std::size_t col = j; col < k; ++col) {
        const double x1 = r(j, col), x2 = r(i, col);
        r(j, col) = c * x1 + s * x2;
        r(i, col) = -s * x1 + c * x2;
      }
      const double g1 = g[j], g2 = g[i];
      g[j] = c * g1 + s * g2;
      g[i] = -s * g1 + c * g2;
    }
  }

  ProjectedSolution sol;
  bool deficient = scaleRef == 0.0;
  for (std::size_t j = 0; j < k && !deficient; ++j)
    if (std::abs(r(j, j)) <= 1e-14 * scaleRef) deficient = true;

  if (deficient) {
    sol.y = scaleRef == 0.0 ? Vector(k, 0.0) : detail::minimumNormSolve(hess, beta);
    sol.rankDeficient = true;
    sol.projResidualNorm = projectedResidualNorm(hess, beta, sol.y);
    return sol;
  }
  sol.y.assign(k, 0.0);
  for (std::size_t jj = k; jj-- > 0;) {
    double acc = g[jj];
    for (std::size_t col = jj + 1; col < k; ++col) acc -= r(jj, col) * sol.y[col];
    sol.y[jj] = acc / r(jj, jj);
  }
  sol.projResidualNorm = std::abs(g[k]);
  return sol;
}

/// argmin_y ‖H y - beta e1‖² + lambda² ‖y‖², solved by Householder QR of the
/// stacked (2k+1) x k system [H; lambda I].
inline ProjectedSolution solveProjectedTikhonov(const DenseMatrix& hess, double beta, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw ConfigurationError("solveProjectedTikhonov: lambda must be finite and nonnegative");
  if (lambda == 0.0) return solveProjectedLS(hess, beta);

  const std::size_t k = hess.cols, m = hess.rows;
  const std::size_t rows = m + k;
  DenseMatrix s(rows, k);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) s(i, j) = hess(i, j);
  for (std::size_t j = 0; j < k; ++j) s(m + j, j) = lambda;
  Vector rhs(rows, 0.0);
  rhs[0] = beta;

  for (std::size_t j = 0; j < k; ++j) {
    double normx = 0.0;
    for (std::size_t i = j; i < rows; ++i) normx += s(i, j) * s(i, j);
    normx = std::sqrt(normx);
    if (normx == 0.0) continue;
    const double alpha = s(j, j) > 0.0 ? -normx : normx;
    Vector v(rows - j);
    for (std::size_t i = j; i < rows; ++i) v[i - j] = s(i, j);
    v[0] -= alpha;
    const double vnorm2 = dot(v, v);
    if (vnorm2 == 0.0) continue;
    for (std::size_t col = j; col < k; ++col) {
      double proj = 0.0;
      for (std::size_t i = j; i < rows; ++i) proj += v[i - j] * s(i, col);
      proj = 2.0 * proj / vnorm2;
      for (std::size_t i = j; i < rows; ++i) s(i, col) -= proj * v[i - j];
    }
    double proj = 0.0;
    for (std::size_t i = j; i < rows; ++i) proj += v[i - j] * rhs[i];
    proj = 2.0 * proj / vnorm2;
    for (std::size_t i = j; i < rows; ++i) rhs[i] -= proj * v[i - j];
  }

  ProjectedSolution sol;
  sol.lambdaUsed = lambda;
  sol.y.assign(k, 0.0);
  for (std::size_t jj = k; jj-- > 0;) {
    double acc = rhs[jj];
    for (std::size_t col = jj + 1; col < k; ++col) acc -= s(jj, col) * sol.y[col];
    sol.y[jj] = acc / s(jj, jj);
  }
  sol.projResidualNorm = projectedResidualNorm(hess, beta, sol.y);
  return sol;
}

}  // namespace abba
