#pragma once

// Types shared by the GMRES and Golub-Kahan solver families, lambda
// dispatch and the restart driver.

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "abba/arnoldi.hpp"
#include "abba/regparam.hpp"
#include "abba/stopping.hpp"

namespace abba {

enum class Method { Ab, Ba, AbHybrid, BaHybrid, Lsqr, Lsmr, LsqrHybrid, LsmrHybrid };

inline std::string toString(Method m) {
  switch (m) {
    case Method::Ab: return "ab";
    case Method::Ba: return "ba";
    case Method::AbHybrid: return "ab-hybrid";
    case Method::BaHybrid: return "ba-hybrid";
    case Method::Lsqr: return "lsqr";
    case Method::Lsmr: return "lsmr";
    case Method::LsqrHybrid: return "lsqr-hybrid";
    case Method::LsmrHybrid: return "lsmr-hybrid";
  }
  return "?";
}

inline Method parseMethod(const std::string& s) {
  for (Method m : {Method::Ab, Method::Ba, Method::AbHybrid, Method::BaHybrid, Method::Lsqr, Method::Lsmr,
                   Method::LsqrHybrid, Method::LsmrHybrid})
    if (toString(m) == s) return m;
  throw ConfigurationError("unknown method '" + s + "'");
}

inline bool isHybrid(Method m) {
  return m == Method::AbHybrid || m == Method::BaHybrid || m == Method::LsqrHybrid || m == Method::LsmrHybrid;
}

struct LambdaStrategy {
  enum class Kind { None, Fixed, LCurve, Gcv };
  Kind kind = Kind::None;
  double value = 0.0;

  static LambdaStrategy none() { return {}; }
  static LambdaStrategy fixed(double lambda) { return {Kind::Fixed, lambda}; }
  static LambdaStrategy lcurve() { return {Kind::LCurve, 0.0}; }
  static LambdaStrategy gcv() { return {Kind::Gcv, 0.0}; }

  std::string describe() const {
    switch (kind) {
      case Kind::None: return "none";
      case Kind::Fixed: {
        std::ostringstream os;
        os << "fixed:" << value;
        return os.str();
      }
      case Kind::LCurve: return "lcurve";
      case Kind::Gcv: return "gcv";
    }
    return "?";
  }
};

struct IterationRecord {
  int k = 0;
  int cycle = 0;
  double lambda = 0.0;
  bool lambdaFallback = false;
  double dataResidual = 0.0;          // ‖b - A x_k‖₂
  std::optional<double> baResidual;   // ‖B(b - A x_k)‖₂ (BA) or ‖Aᵀ(b - A x_k)‖₂ (LSMR)
  double projResidual = 0.0;          // ‖H y - beta e1‖₂ of the projected problem
  std::optional<double> solutionNorm; // set when x_k was formed
  std::optional<double> rre;
  std::optional<double> ssim;
  std::optional<double> elapsed;
};

using IterateObserver = std::function<void(std::span<const double> x, IterationRecord&)>;

struct SolverConfig {
  Method method = Method::Ab;
  int maxIter = 100;
  LambdaStrategy lambda = LambdaStrategy::none();
  StoppingRule stopping = StoppingRule::none();
  int restartPeriod = 0;  // 0: no restart
  bool reorthogonalize = true;
  std::optional<Vector> x0;
  std::size_t lambdaGridCount = LambdaGrid::kDefaultCount;

  // Instrumentation. Setting onIterate or keepIterates forces x_k to be
  // formed every iteration.
  IterateObserver onIterate;
  bool keepIterates = false;
  bool verifyArnoldi = false;
  bool recordTiming = false;

  void validate() const {
    if (maxIter < 1) throw ConfigurationError("maxIter must be positive");
    if (restartPeriod < 0) throw ConfigurationError("restart period must be nonnegative");
    const bool hybrid = isHybrid(method);
    if (hybrid && lambda.kind == LambdaStrategy::Kind::None)
      throw ConfigurationError("hybrid method '" + toString(method) + "' needs a lambda strategy");
    if (!hybrid && lambda.kind != LambdaStrategy::Kind::None)
      throw ConfigurationError("method '" + toString(method) + "' does not take a lambda strategy");
    if (lambda.kind == LambdaStrategy::Kind::Fixed && !(lambda.value >= 0.0 && std::isfinite(lambda.value)))
      throw ConfigurationError("fixed lambda must be finite and nonnegative");
    if (lambdaGridCount < 5) throw ConfigurationError("lambda grid needs at least 5 points");
    stopping.validate();
  }
};

struct ArnoldiDiagnostics {
  double orthonormalityDefect = 0.0;
  double factorizationResidual = 0.0;
};

struct SolveResult {
  Vector x;
  std::vector<IterationRecord> records;
  StopReason stopReason = StopReason::MaxIter;
  int cycles = 0;
  std::vector<Vector> iterates;  // x_1..x_k when keepIterates
  std::optional<ArnoldiDiagnostics> diagnostics;
  int lambdaFallbacks = 0;
};

struct LambdaChoice {
  double lambda = 0.0;
  bool fallback = false;
};

/// Picks lambda for the current projected problem. Degenerate curves fall
/// back to the previous lambda.
inline LambdaChoice selectLambda(const DenseMatrix& h, double beta, const LambdaStrategy& strategy,
                                 double previousLambda = 0.0, std::size_t gridCount = LambdaGrid::kDefaultCount) {
  switch (strategy.kind) {
    case LambdaStrategy::Kind::None: return {0.0, false};
    case LambdaStrategy::Kind::Fixed: return {strategy.value, false};
    case LambdaStrategy::Kind::LCurve:
    case LambdaStrategy::Kind::Gcv:
      break;
  }
  if (h.cols < 1) throw ConfigurationError("selectLambda: empty projected problem");
  try {
    const ProjectedSpectrum spec = spectrumOf(h, beta);
    const LambdaGrid grid = LambdaGrid::forSpectrum(spec.sigma, gridCount);
    if (strategy.kind == LambdaStrategy::Kind::LCurve) return {lcurveCorner(tikhonovCurvePoints(spec, grid)), false};
    return {gcvMinimize(spec, grid), false};
  } catch (const DegenerateCurveError&) {
    return {previousLambda, true};
  }
}

inline ProjectedSolution solveProjected(const DenseMatrix& h, double beta, double lambda) {
  return lambda > 0.0 ? solveProjectedTikhonov(h, beta, lambda) : solveProjectedLS(h, beta);
}

// ---------------------------------------------------------------------------
// restart driver

struct CycleResult {
  Vector x;
  std::vector<IterationRecord> records;
  std::vector<Vector> iterates;
  std::optional<StopReason> stop;
  std::optional<ArnoldiDiagnostics> diagnostics;
  double lastLambda = 0.0;
};

/// Runs one cycle of at most maxSteps iterations from x0. Records are
/// numbered from kOffset + 1. The monitor is shared across cycles.
using CycleRunner = std::function<CycleResult(const Vector& x0, int maxSteps, int kOffset, int cycle,
                                              StoppingMonitor& monitor, double previousLambda)>;

/// Cycles of at most `period` steps, each started from the previous
/// cycle's terminal iterate, until `totalBudget` iterations or a stop.
inline SolveResult runWithRestarts(const CycleRunner& inner, int period, int totalBudget, Vector x0,
                                   StoppingMonitor monitor) {
  if (totalBudget < 1) throw ConfigurationError("restart budget must be positive");
  if (period < 1) period = totalBudget;
  SolveResult result;
  result.x = std::move(x0);
  int k = 0;
  double lambda = 0.0;
  while (k < totalBudget) {
    const int steps = std::min(period, totalBudget - k);
    CycleResult cr = inner(result.x, steps, k, result.cycles, monitor, lambda);
    ++result.cycles;
    result.x = std::move(cr.x);
    lambda = cr.lastLambda;
    k += static_cast<int>(cr.records.size());
    for (auto& r : cr.records) {
      if (r.lambdaFallback) ++result.lambdaFallbacks;
      result.records.push_back(std::move(r));
    }
    for (auto& it : cr.iterates) result.iterates.push_back(std::move(it));
    if (cr.diagnostics) {
      if (!result.diagnostics) result.diagnostics = ArnoldiDiagnostics{};
      result.diagnostics->orthonormalityDefect =
          std::max(result.diagnostics->orthonormalityDefect, cr.diagnostics->orthonormalityDefect);
      result.diagnostics->factorizationResidual =
          std::max(result.diagnostics->factorizationResidual, cr.diagnostics->factorizationResidual);
    }
    if (cr.stop) {
      result.stopReason = *cr.stop;
      return result;
    }
    if (cr.records.empty()) break;
  }
  result.stopReason = StopReason::MaxIter;
  return result;
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double secondsSince(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// W[:, 0..y.size()) * y, optionally accumulated onto base.
inline Vector combine(const std::vector<Vector>& basis, std::span<const double> y, std::size_t dim,
                      std::span<const double> base = {}) {
  Vector out = base.empty() ? Vector(dim, 0.0) : Vector(base.begin(), base.end());
  for (std::size_t j = 0; j < y.size(); ++j) axpy(y[j], basis[j], out);
  return out;
}

/// beta e1 - H y in projected coordinates.
inline Vector projectedResidualVector(const DenseMatrix& h, double beta, std::span<const double> y) {
  Vector r = h.multiply(y);
  scale(-1.0, r);
  r[0] += beta;
  return r;
}

/// Builds a record's common fields and runs observers on x when present.
inline void finishRecord(IterationRecord& rec, const SolverConfig& cfg, const Vector* x, Clock::time_point t0) {
  if (x) {
    rec.solutionNorm = norm2(*x);
    if (cfg.onIterate) cfg.onIterate(*x, rec);
  }
  if (cfg.recordTiming) rec.elapsed = secondsSince(t0);
}

/// Adds a k=0 record when a run terminates before its first iteration.
inline void ensureRecords(SolveResult& res, std::span<const double> b, const LinearOperator& A,
                          const SolverConfig& cfg) {
  if (!res.records.empty()) return;
  IterationRecord rec;
  rec.k = 0;
  const Vector r = subtract(b, A.apply(res.x));
  rec.dataResidual = norm2(r);
  rec.projResidual = rec.dataResidual;
  finishRecord(rec, cfg, &res.x, Clock::now());
  rec.elapsed.reset();
  res.records.push_back(rec);
}

}  // namespace detail

}  // namespace abba
