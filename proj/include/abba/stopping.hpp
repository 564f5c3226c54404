#pragma once

// Stopping rules evaluated on the data-space residual b - A x_k:
// discrepancy principle, normalized cumulative periodogram and residual
// norm stagnation.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "abba/linear_operator.hpp"

namespace abba {

enum class StopReason { MaxIter, Dp, Ncp, Rns, Breakdown };

inline std::string toString(StopReason r) {
  switch (r) {
    case StopReason::MaxIter: return "maxIter";
    case StopReason::Dp: return "dp";
    case StopReason::Ncp: return "ncp";
    case StopReason::Rns: return "rns";
    case StopReason::Breakdown: return "breakdown";
  }
  return "unknown";
}

/// Stop once ‖A x_k - b‖ <= tau ‖e‖.
inline bool dpShouldStop(double residualNorm, double noiseNorm, double tau) {
  return residualNorm <= tau * noiseNorm;
}

namespace detail {

inline std::mutex& fftwPlannerMutex() {
  static std::mutex m;
  return m;
}

/// |X_f|² for f = 0..n/2 of a real signal.
inline Vector powerSpectrum(std::span<const double> signal) {
  const int n = static_cast<int>(signal.size());
  std::vector<double> in(signal.begin(), signal.end());
  std::vector<std::complex<double>> out(static_cast<std::size_t>(n / 2 + 1));
  fftw_plan plan;
  {
    std::lock_guard lock(fftwPlannerMutex());
    plan = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(fftwPlannerMutex());
    fftw_destroy_plan(plan);
  }
  Vector p(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) p[i] = std::norm(out[i]);
  return p;
}

}  // namespace detail

/// Kolmogorov-Smirnov distance between the normalized cumulative
/// periodogram of the residual and the white-noise diagonal.
///
/// window == 0 treats the residual as one signal (detector-major order);
/// window > 0 sums the periodograms of consecutive length-window segments.
inline double ncpDistance(std::span<const double> residual, std::size_t window = 0) {
  const std::size_t seg = window == 0 ? residual.size() : window;
  if (seg < 8 || residual.size() < seg) throw ConfigurationError("NCP: residual segments need at least 8 samples");
  const std::size_t q = seg / 2;
  Vector power(q, 0.0);
  for (std::size_t start = 0; start + seg <= residual.size(); start += seg) {
    const Vector p = detail::powerSpectrum(residual.subspan(start, seg));
    for (std::size_t f = 1; f <= q; ++f) power[f - 1] += p[f];
  }
  double total = 0.0;
  for (double v : power) total += v;
  if (!(total > 0.0)) return 0.0;
  double acc = 0.0, worst = 0.0;
  for (std::size_t j = 1; j <= q; ++j) {
    acc += power[j - 1];
    worst = std::max(worst, std::abs(acc / total - static_cast<double>(j) / static_cast<double>(q)));
  }
  return worst;
}

inline bool ncpShouldStop(std::span<const double> residual, double threshold, std::size_t window = 0) {
  if (norm2(residual) == 0.0) return true;
  return ncpDistance(residual, window) <= threshold;
}

inline bool rnsShouldStop(std::span<const double> history, double epsilon) {
  if (history.size() < 2) return false;
  const double prev = history[history.size() - 2];
  const double cur = history.back();
  if (prev == 0.0) return true;
  return std::abs(prev - cur) / prev < epsilon;
}

struct StoppingRule {
  enum class Kind { None, Dp, Ncp, Rns };
  Kind kind = Kind::None;
  double tau = 1.01;
  double noiseNorm = 0.0;
  double ncpThreshold = 0.05;
  std::size_t ncpWindow = 0;
  double rnsEpsilon = 1e-4;

  static StoppingRule none() { return {}; }
  static StoppingRule dp(double noiseNorm, double tau = 1.01) {
    StoppingRule r;
    r.kind = Kind::Dp;
    r.noiseNorm = noiseNorm;
    r.tau = tau;
    return r;
  }
  static StoppingRule ncp(double threshold = 0.05, std::size_t window = 0) {
    StoppingRule r;
    r.kind = Kind::Ncp;
    r.ncpThreshold = threshold;
    r.ncpWindow = window;
    return r;
  }
  static StoppingRule rns(double epsilon = 1e-4) {
    StoppingRule r;
    r.kind = Kind::Rns;
    r.rnsEpsilon = epsilon;
    return r;
  }

  void validate() const {
    if (kind == Kind::Dp && !(tau >= 1.0)) throw ConfigurationError("DP requires tau >= 1");
    if (kind == Kind::Dp && !(noiseNorm >= 0.0)) throw ConfigurationError("DP requires a nonnegative noise norm");
    if (kind == Kind::Ncp && !(ncpThreshold > 0.0)) throw ConfigurationError("NCP requires a positive threshold");
    if (kind == Kind::Rns && !(rnsEpsilon > 0.0)) throw ConfigurationError("RNS requires epsilon > 0");
  }

  std::string describe() const {
    switch (kind) {
      case Kind::None: return "none";
      case Kind::Dp: return "dp(tau=" + std::to_string(tau) + ")";
      case Kind::Ncp: return "ncp(threshold=" + std::to_string(ncpThreshold) + ")";
      case Kind::Rns: return "rns(eps=" + std::to_string(rnsEpsilon) + ")";
    }
    return "?";
  }
};

/// Run-confined stopping state. One observe() call per iteration.
class StoppingMonitor {
 public:
  explicit StoppingMonitor(StoppingRule rule) : rule_(rule) { rule_.validate(); }

  bool needsResidualVector() const { return rule_.kind == StoppingRule::Kind::Ncp; }
  const std::vector<double>& history() const { return history_; }
  const StoppingRule& rule() const { return rule_; }

  /// Returns the reason to stop, if any, after recording this iteration.
  std::optional<StopReason> observe(double dataResidualNorm, std::span<const double> residual = {}) {
    history_.push_back(dataResidualNorm);
    switch (rule_.kind) {
      case StoppingRule::Kind::None:
        return std::nullopt;
      case StoppingRule::Kind::Dp:
        if (dpShouldStop(dataResidualNorm, rule_.noiseNorm, rule_.tau)) return StopReason::Dp;
        return std::nullopt;
      case StoppingRule::Kind::Ncp:
        if (residual.empty()) throw ConfigurationError("NCP needs the residual vector");
        if (ncpShouldStop(residual, rule_.ncpThreshold, rule_.ncpWindow)) return StopReason::Ncp;
        return std::nullopt;
      case StoppingRule::Kind::Rns:
        if (rnsShouldStop(history_, rule_.rnsEpsilon)) return StopReason::Rns;
        return std::nullopt;
    }
    return std::nullopt;
  }

 private:
  StoppingRule rule_;
  std::vector<double> history_;
};

}  // namespace abba
