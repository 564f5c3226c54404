#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace abba {

using Vector = std::vector<double>;

/// Raised when operands, configs or problem descriptions are inconsistent.
class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// small vector kernels

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(double alpha, std::span<double> x) {
  for (auto& v : x) v *= alpha;
}

inline Vector subtract(std::span<const double> a, std::span<const double> b) {
  Vector r(a.begin(), a.end());
  axpy(-1.0, b, r);
  return r;
}

// ---------------------------------------------------------------------------

/// Dense row-major matrix. Used for small projected problems and as the
/// desk-scale backend for explicit operators.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static DenseMatrix fromRows(std::initializer_list<std::initializer_list<double>> rowsInit) {
    DenseMatrix m(rowsInit.size(), rowsInit.size() ? rowsInit.begin()->size() : 0);
    std::size_t i = 0;
    for (const auto& row : rowsInit) {
      if (row.size() != m.cols) throw ConfigurationError("DenseMatrix::fromRows: ragged rows");
      std::size_t j = 0;
      for (double v : row) m(i, j++) = v;
      ++i;
    }
    return m;
  }

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  DenseMatrix transposed() const {
    DenseMatrix t(cols, rows);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Vector multiply(std::span<const double> v) const {
    Vector out(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i) out[i] = dot(row(i), v);
    return out;
  }

  Vector multiplyTransposed(std::span<const double> v) const {
    Vector out(cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i) axpy(v[i], row(i), out);
    return out;
  }

  double frobeniusNorm() const { return norm2(data); }

  bool allFinite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.rows) throw ConfigurationError("DenseMatrix product: inner dimensions differ");
  DenseMatrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

// ---------------------------------------------------------------------------

/// Matrix-free linear map R^cols -> R^rows.
///
/// Instances are immutable and cheap to copy; the apply callable is shared.
/// apply must be pure so one operator can be used from several threads.
class LinearOperator {
 public:
  using ApplyFn = std::function<Vector(std::span<const double>)>;

  LinearOperator() = default;
  LinearOperator(std::size_t rows, std::size_t cols, ApplyFn fn, std::string name = "op")
      : rows_(rows), cols_(cols), fn_(std::make_shared<const ApplyFn>(std::move(fn))), name_(std::move(name)) {
    if (rows_ == 0 || cols_ == 0) throw ConfigurationError("LinearOperator '" + name_ + "' has a zero dimension");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const std::string& name() const { return name_; }
  bool valid() const { return static_cast<bool>(fn_); }

  Vector apply(std::span<const double> v) const {
    if (v.size() != cols_) {
      std::ostringstream os;
      os << "operator '" << name_ << "' expects input of length " << cols_ << ", got " << v.size();
      throw ConfigurationError(os.str());
    }
    return (*fn_)(v);
  }

  Vector operator()(std::span<const double> v) const { return apply(v); }

  std::string shapeString() const {
    std::ostringstream os;
    os << name_ << "[" << rows_ << "x" << cols_ << "]";
    return os.str();
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::shared_ptr<const ApplyFn> fn_;
  std::string name_;
};

inline LinearOperator denseOperator(DenseMatrix m, std::string name = "dense") {
  if (!m.allFinite()) throw ConfigurationError("dense operator '" + name + "' holds non-finite entries");
  const auto rows = m.rows, cols = m.cols;
  auto shared = std::make_shared<const DenseMatrix>(std::move(m));
  return LinearOperator(rows, cols, [shared](std::span<const double> v) { return shared->multiply(v); },
                        std::move(name));
}

/// Exact adjoint of a dense matrix, applied without forming the transpose.
inline LinearOperator transposeOf(const DenseMatrix& m, std::string name = "dense^T") {
  if (!m.allFinite()) throw ConfigurationError("transposeOf: non-finite entries");
  auto shared = std::make_shared<const DenseMatrix>(m);
  return LinearOperator(m.cols, m.rows,
                        [shared](std::span<const double> v) { return shared->multiplyTransposed(v); },
                        std::move(name));
}

inline LinearOperator identityOperator(std::size_t n) {
  return LinearOperator(n, n, [](std::span<const double> v) { return Vector(v.begin(), v.end()); }, "I");
}

/// first ∘ second, i.e. v -> first(second(v)).
inline LinearOperator compose(const LinearOperator& first, const LinearOperator& second) {
  if (first.cols() != second.rows()) {
    std::ostringstream os;
    os << "compose: dimension mismatch between " << first.shapeString() << " and " << second.shapeString();
    throw ConfigurationError(os.str());
  }
  return LinearOperator(
      first.rows(), second.cols(), [first, second](std::span<const double> v) { return first.apply(second.apply(v)); },
      first.name() + "*" + second.name());
}

/// Assembles an operator column by column by applying it to unit vectors.
inline DenseMatrix assemble(const LinearOperator& op) {
  DenseMatrix m(op.rows(), op.cols());
  Vector unit(op.cols(), 0.0);
  for (std::size_t j = 0; j < op.cols(); ++j) {
    unit[j] = 1.0;
    const Vector col = op.apply(unit);
    unit[j] = 0.0;
    for (std::size_t i = 0; i < op.rows(); ++i) m(i, j) = col[i];
  }
  return m;
}

/// Power-iteration estimate of the dominant singular value of a square
/// operator. Callers wanting ‖A‖ pass compose(A^T, A) and take the root.
inline double opNormEstimate(const LinearOperator& op, int iterations, std::uint64_t seed) {
  if (op.rows() != op.cols()) throw ConfigurationError("opNormEstimate: operator must be square, got " + op.shapeString());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Vector v(op.cols());
  for (auto& x : v) x = gauss(rng);
  scale(1.0 / norm2(v), v);
  double estimate = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vector w = op.apply(v);
    estimate = norm2(w);
    if (estimate == 0.0) return 0.0;
    scale(1.0 / estimate, w);
    v = std::move(w);
  }
  return estimate;
}

}  // namespace abba
