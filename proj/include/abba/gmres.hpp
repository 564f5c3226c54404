#pragma once

// AB-GMRES and BA-GMRES for A x ≈ b with a (possibly unmatched)
// backprojector B, plain or hybrid (Tikhonov on the projected problem).
//
//   AB: Krylov space K_k(AB, r0), r0 = b - A x0,     x_k = x0 + B W_k y_k
//   BA: Krylov space K_k(BA, r0), r0 = B(b - A x0),  x_k = x0 + W_k y_k

#include "abba/solver.hpp"

namespace abba {

namespace detail {

struct GmresSetup {
  const LinearOperator& A;
  const LinearOperator& B;
  std::span<const double> b;
  const SolverConfig& cfg;
  bool ba;
  Clock::time_point t0;
};

inline CycleResult gmresCycle(const GmresSetup& s, const Vector& x0, int maxSteps, int kOffset, int cycle,
                              StoppingMonitor& monitor, double previousLambda) {
  CycleResult out;
  out.lastLambda = previousLambda;
  const bool wantX = static_cast<bool>(s.cfg.onIterate) || s.cfg.keepIterates;
  const std::size_t m = s.A.rows();

  const Vector dataR0 = subtract(s.b, s.A.apply(x0));
  const LinearOperator M = s.ba ? compose(s.B, s.A) : compose(s.A, s.B);
  const Vector r0 = s.ba ? s.B.apply(dataR0) : dataR0;
  ArnoldiState state = ArnoldiState::start(r0);
  if (state.beta() == 0.0) {
    out.x = x0;
    out.stop = StopReason::Breakdown;
    return out;
  }

  auto formIterate = [&](std::span<const double> y) {
    if (s.ba) return combine(state.basis(), y, x0.size(), x0);
    const Vector z = combine(state.basis(), y, m);
    Vector x = s.B.apply(z);
    axpy(1.0, x0, x);
    return x;
  };

  double lambda = previousLambda;
  for (int j = 1; j <= maxSteps; ++j) {
    const ArnoldiStep step = arnoldiStep(state, M, s.cfg.reorthogonalize);
    const DenseMatrix h = state.hessenberg();
    const LambdaChoice choice = selectLambda(h, state.beta(), s.cfg.lambda, lambda, s.cfg.lambdaGridCount);
    lambda = choice.lambda;
    const ProjectedSolution sol = solveProjected(h, state.beta(), lambda);

    IterationRecord rec;
    rec.k = kOffset + j;
    rec.cycle = cycle;
    rec.lambda = lambda;
    rec.lambdaFallback = choice.fallback;
    rec.projResidual = sol.projResidualNorm;

    std::optional<Vector> x;
    Vector residual;
    if (s.ba) {
      x = formIterate(sol.y);
      residual = subtract(s.b, s.A.apply(*x));
      rec.dataResidual = norm2(residual);
      rec.baResidual = sol.projResidualNorm;
    } else {
      // b - A x_k = W_{k+1}(beta e1 - H y), so the data residual norm is the
      // projected one.
      rec.dataResidual = sol.projResidualNorm;
      if (monitor.needsResidualVector()) {
        const Vector coeffs = projectedResidualVector(h, state.beta(), sol.y);
        residual = combine(state.basis(), std::span<const double>(coeffs).first(state.basis().size()), m);
      }
      if (wantX) x = formIterate(sol.y);
    }

    std::optional<StopReason> stop = monitor.observe(rec.dataResidual, residual);
    if (!stop && step.breakdown) stop = StopReason::Breakdown;
    const bool last = stop.has_value() || j == maxSteps;
    if (last && !x) x = formIterate(sol.y);
    if (last && !s.ba) rec.dataResidual = norm2(subtract(s.b, s.A.apply(*x)));

    finishRecord(rec, s.cfg, x ? &*x : nullptr, s.t0);
    if (s.cfg.keepIterates) out.iterates.push_back(*x);
    out.records.push_back(std::move(rec));
    if (last) {
      out.x = std::move(*x);
      out.stop = stop;
      break;
    }
  }
  out.lastLambda = lambda;
  if (s.cfg.verifyArnoldi)
    out.diagnostics = ArnoldiDiagnostics{orthonormalityDefect(state.basis()), factorizationResidual(state, M)};
  return out;
}

inline void checkShapes(const LinearOperator& A, const LinearOperator& B, std::span<const double> b,
                        const SolverConfig& cfg) {
  if (A.rows() != b.size())
    throw ConfigurationError("right-hand side has length " + std::to_string(b.size()) + " but " + A.shapeString() +
                             " produces " + std::to_string(A.rows()));
  if (B.rows() != A.cols() || B.cols() != A.rows())
    throw ConfigurationError("backprojector " + B.shapeString() + " does not pair with " + A.shapeString());
  if (cfg.x0 && cfg.x0->size() != A.cols()) throw ConfigurationError("x0 has the wrong length");
}

inline SolveResult runGmres(const LinearOperator& A, const LinearOperator& B, std::span<const double> b,
                            const SolverConfig& cfg, bool ba) {
  cfg.validate();
  checkShapes(A, B, b, cfg);
  const GmresSetup setup{A, B, b, cfg, ba, Clock::now()};
  CycleRunner runner = [&setup](const Vector& x0, int steps, int kOffset, int cycle, StoppingMonitor& mon,
                                double prev) { return gmresCycle(setup, x0, steps, kOffset, cycle, mon, prev); };
  SolveResult res = runWithRestarts(runner, cfg.restartPeriod, cfg.maxIter, cfg.x0.value_or(Vector(A.cols(), 0.0)),
                                    StoppingMonitor(cfg.stopping));
  ensureRecords(res, b, A, cfg);
  return res;
}

}  // namespace detail

/// AB-GMRES (cfg.method ab) or hybrid AB-GMRES (ab-hybrid).
inline SolveResult runAbGmres(const LinearOperator& A, const LinearOperator& B, std::span<const double> b,
                              const SolverConfig& cfg) {
  if (cfg.method != Method::Ab && cfg.method != Method::AbHybrid)
    throw ConfigurationError("runAbGmres: method must be ab or ab-hybrid, got " + toString(cfg.method));
  return detail::runGmres(A, B, b, cfg, false);
}

/// BA-GMRES (cfg.method ba) or hybrid BA-GMRES (ba-hybrid).
inline SolveResult runBaGmres(const LinearOperator& A, const LinearOperator& B, std::span<const double> b,
                              const SolverConfig& cfg) {
  if (cfg.method != Method::Ba && cfg.method != Method::BaHybrid)
    throw ConfigurationError("runBaGmres: method must be ba or ba-hybrid, got " + toString(cfg.method));
  return detail::runGmres(A, B, b, cfg, true);
}

}  // namespace abba
