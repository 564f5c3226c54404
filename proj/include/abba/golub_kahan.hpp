#pragma once

// LSQR and LSMR (plus hybrid variants) built on an explicit Golub-Kahan
// bidiagonalization with stored, fully reorthogonalized bases.
//
//   A V_k = U_{k+1} B_k,   Aᵀ U_{k+1} = V_{k+1} L_{k+1}ᵀ,
//   B_k lower bidiagonal with diagonal alpha_1..alpha_k and subdiagonal
//   beta_2..beta_{k+1}.
//
// LSQR solves  min ‖B_k y - beta_1 e1‖ (+ lambda² ‖y‖²).
// LSMR solves  min ‖[B_kᵀB_k; alpha_{k+1} beta_{k+1} e_kᵀ] y - alpha_1 beta_1 e1‖ (+ lambda² ‖y‖²).

#include "abba/gmres.hpp"

namespace abba {

class BidiagState {
 public:
  static BidiagState start(const LinearOperator& A, const LinearOperator& At, std::span<const double> r0) {
    BidiagState s;
    s.betaInit_ = norm2(r0);
    s.maxRank_ = std::min(A.rows(), A.cols());
    if (s.betaInit_ == 0.0) return s;
    Vector u(r0.begin(), r0.end());
    scale(1.0 / s.betaInit_, u);
    s.u_.push_back(std::move(u));
    Vector v = At.apply(s.u_[0]);
    const double alpha = norm2(v);
    s.alpha_.push_back(alpha);
    if (alpha == 0.0) return s;
    scale(1.0 / alpha, v);
    s.v_.push_back(std::move(v));
    return s;
  }

  double betaInit() const { return betaInit_; }
  double alpha1() const { return alpha_.empty() ? 0.0 : alpha_[0]; }
  std::size_t steps() const { return beta_.size(); }
  bool canStep() const { return !brokenDown_ && v_.size() == steps() + 1; }
  const std::vector<Vector>& uBasis() const { return u_; }
  const std::vector<Vector>& vBasis() const { return v_; }

  /// Computes beta_{k+1}, u_{k+1}, alpha_{k+1}, v_{k+1}. Returns true on breakdown.
  bool step(const LinearOperator& A, const LinearOperator& At, bool reorthogonalize) {
    const std::size_t k = steps();
    Vector p = A.apply(v_[k]);
    const double ref = norm2(p);
    axpy(-alpha_[k], u_[k], p);
    if (reorthogonalize)
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& u : u_) axpy(-dot(p, u), u, p);
    const double beta = norm2(p);
    beta_.push_back(beta);
    if (beta <= kBreakdownTolerance * ref || k + 1 >= maxRank_) {
      alpha_.push_back(0.0);
      brokenDown_ = true;
      return true;
    }
    scale(1.0 / beta, p);
    u_.push_back(std::move(p));

    Vector q = At.apply(u_.back());
    const double refq = norm2(q);
    axpy(-beta, v_[k], q);
    if (reorthogonalize)
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& v : v_) axpy(-dot(q, v), v, q);
    const double alpha = norm2(q);
    alpha_.push_back(alpha);
    if (alpha <= kBreakdownTolerance * refq) {
      brokenDown_ = true;
      return true;
    }
    scale(1.0 / alpha, q);
    v_.push_back(std::move(q));
    return false;
  }

  /// (k+1) x k lower-bidiagonal B_k.
  DenseMatrix bidiagonal() const {
    const std::size_t k = steps();
    DenseMatrix b(k + 1, k);
    for (std::size_t j = 0; j < k; ++j) {
      b(j, j) = alpha_[j];
      b(j + 1, j) = beta_[j];
    }
    return b;
  }

  /// (k+1) x k matrix [B_kᵀ B_k; alpha_{k+1} beta_{k+1} e_kᵀ] of the LSMR subproblem.
  DenseMatrix lsmrMatrix() const {
    const std::size_t k = steps();
    const DenseMatrix bk = bidiagonal();
    const DenseMatrix gram = bk.transposed() * bk;
    DenseMatrix out(k + 1, k);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) out(i, j) = gram(i, j);
    out(k, k - 1) = alpha_[k] * beta_[k - 1];
    return out;
  }

 private:
  double betaInit_ = 0.0;
  std::size_t maxRank_ = 0;
  std::vector<Vector> u_, v_;
  std::vector<double> alpha_, beta_;  // alpha_1.., beta_2..
  bool brokenDown_ = false;
};

namespace detail {

struct GkSetup {
  const LinearOperator& A;
  const LinearOperator& At;
  std::span<const double> b;
  const SolverConfig& cfg;
  bool lsmr;
  Clock::time_point t0;
};

inline CycleResult gkCycle(const GkSetup& s, const Vector& x0, int maxSteps, int kOffset, int cycle,
                           StoppingMonitor& monitor, double previousLambda) {
  CycleResult out;
  out.lastLambda = previousLambda;
  const Vector r0 = subtract(s.b, s.A.apply(x0));
  BidiagState state = BidiagState::start(s.A, s.At, r0);
  if (!state.canStep()) {
    out.x = x0;
    out.stop = StopReason::Breakdown;
    return out;
  }
  const std::size_t m = s.A.rows();
  double lambda = previousLambda;
  for (int j = 1; j <= maxSteps; ++j) {
    const bool breakdown = state.step(s.A, s.At, s.cfg.reorthogonalize);
    const DenseMatrix bk = state.bidiagonal();
    const DenseMatrix h = s.lsmr ? state.lsmrMatrix() : bk;
    const double rhs = s.lsmr ? state.alpha1() * state.betaInit() : state.betaInit();
    const LambdaChoice choice = selectLambda(h, rhs, s.cfg.lambda, lambda, s.cfg.lambdaGridCount);
    lambda = choice.lambda;
    const ProjectedSolution sol = solveProjected(h, rhs, lambda);

    IterationRecord rec;
    rec.k = kOffset + j;
    rec.cycle = cycle;
    rec.lambda = lambda;
    rec.lambdaFallback = choice.fallback;
    rec.projResidual = sol.projResidualNorm;
    if (s.lsmr) rec.baResidual = sol.projResidualNorm;

    Vector x = combine(state.vBasis(), sol.y, x0.size(), x0);
    // b - A x_k = U_{k+1}(beta_1 e1 - B_k y)
    const Vector coeffs = projectedResidualVector(bk, state.betaInit(), sol.y);
    const auto avail = std::min(coeffs.size(), state.uBasis().size());
    rec.dataResidual = norm2(std::span<const double>(coeffs).first(avail));
    Vector residual;
    if (monitor.needsResidualVector())
      residual = combine(state.uBasis(), std::span<const double>(coeffs).first(avail), m);

    std::optional<StopReason> stop = monitor.observe(rec.dataResidual, residual);
    if (!stop && breakdown) stop = StopReason::Breakdown;
    const bool last = stop.has_value() || j == maxSteps;
    if (last) rec.dataResidual = norm2(subtract(s.b, s.A.apply(x)));

    finishRecord(rec, s.cfg, &x, s.t0);
    if (s.cfg.keepIterates) out.iterates.push_back(x);
    out.records.push_back(std::move(rec));
    if (last) {
      out.x = std::move(x);
      out.stop = stop;
      break;
    }
  }
  out.lastLambda = lambda;
  if (s.cfg.verifyArnoldi)
    out.diagnostics = ArnoldiDiagnostics{
        std::max(orthonormalityDefect(state.uBasis()), orthonormalityDefect(state.vBasis())), 0.0};
  return out;
}

inline SolveResult runGk(const LinearOperator& A, const LinearOperator& At, std::span<const double> b,
                         const SolverConfig& cfg, bool lsmr) {
  cfg.validate();
  checkShapes(A, At, b, cfg);
  const GkSetup setup{A, At, b, cfg, lsmr, Clock::now()};
  CycleRunner runner = [&setup](const Vector& x0, int steps, int kOffset, int cycle, StoppingMonitor& mon,
                                double prev) { return gkCycle(setup, x0, steps, kOffset, cycle, mon, prev); };
  SolveResult res = runWithRestarts(runner, cfg.restartPeriod, cfg.maxIter, cfg.x0.value_or(Vector(A.cols(), 0.0)),
                                    StoppingMonitor(cfg.stopping));
  ensureRecords(res, b, A, cfg);
  return res;
}

}  // namespace detail

/// LSQR or hybrid LSQR. `At` must be the exact adjoint of A.
inline SolveResult runLsqr(const LinearOperator& A, const LinearOperator& At, std::span<const double> b,
                           const SolverConfig& cfg) {
  if (cfg.method != Method::Lsqr && cfg.method != Method::LsqrHybrid)
    throw ConfigurationError("runLsqr: method must be lsqr or lsqr-hybrid, got " + toString(cfg.method));
  return detail::runGk(A, At, b, cfg, false);
}

/// LSMR or hybrid LSMR. `At` must be the exact adjoint of A.
inline SolveResult runLsmr(const LinearOperator& A, const LinearOperator& At, std::span<const double> b,
                           const SolverConfig& cfg) {
  if (cfg.method != Method::Lsmr && cfg.method != Method::LsmrHybrid)
    throw ConfigurationError("runLsmr: method must be lsmr or lsmr-hybrid, got " + toString(cfg.method));
  return detail::runGk(A, At, b, cfg, true);
}

/// Dispatches on cfg.method. For the Golub-Kahan methods B is used as Aᵀ.
inline SolveResult solve(const LinearOperator& A, const LinearOperator& B, std::span<const double> b,
                         const SolverConfig& cfg) {
  switch (cfg.method) {
    case Method::Ab:
    case Method::AbHybrid: return runAbGmres(A, B, b, cfg);
    case Method::Ba:
    case Method::BaHybrid: return runBaGmres(A, B, b, cfg);
    case Method::Lsqr:
    case Method::LsqrHybrid: return runLsqr(A, B, b, cfg);
    case Method::Lsmr:
    case Method::LsmrHybrid: return runLsmr(A, B, b, cfg);
  }
  throw ConfigurationError("unknown method");
}

}  // namespace abba
