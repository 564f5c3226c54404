#pragma once

// Tikhonov parameter selection on the projected problem
//   min ‖H y - beta e1‖² + lambda² ‖y‖²
// via filter factors of the SVD of H.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "abba/arnoldi.hpp"

namespace abba {

/// The curve (or GCV function) carries no usable information.
class DegenerateCurveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// SVD data of a projected problem with (k+1) x k matrix H.
struct ProjectedSpectrum {
  Vector sigma;                 // nonzero singular values, descending
  Vector coeffs;                // c_i = u_iᵀ (beta e1)
  double beta = 0.0;
  std::size_t rows = 0;         // k + 1
  double incompatibility = 0.0; // ‖beta e1‖² outside the range of H
};

inline ProjectedSpectrum spectrumOf(const DenseMatrix& h, double beta) {
  const SvdResult svd = svdOfHessenberg(h);
  ProjectedSpectrum s;
  s.beta = beta;
  s.rows = h.rows;
  for (std::size_t i = 0; i < svd.sigma.size(); ++i) {
    if (svd.sigma[i] == 0.0) continue;
    s.sigma.push_back(svd.sigma[i]);
    s.coeffs.push_back(beta * svd.u(0, i));
  }
  // The least-squares residual is the incompatible part; the Givens route
  // avoids the cancellation in beta² - Σ c_i².
  const double ls = solveProjectedLS(h, beta).projResidualNorm;
  s.incompatibility = ls * ls;
  return s;
}

struct LambdaGrid {
  Vector values;

  static constexpr std::size_t kDefaultCount = 200;

  static LambdaGrid logSpaced(double lo, double hi, std::size_t count) {
    if (!(lo > 0.0) || !(hi > lo) || count < 2) throw DegenerateCurveError("LambdaGrid: invalid bounds");
    LambdaGrid g;
    g.values.resize(count);
    const double a = std::log(lo), b = std::log(hi);
    for (std::size_t i = 0; i < count; ++i)
      g.values[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
    g.values.front() = lo;
    g.values.back() = hi;
    return g;
  }

  /// [max(sigma_min * 1e-4, 1e-12), sigma_max]
  static LambdaGrid forSpectrum(std::span<const double> sigma, std::size_t count = kDefaultCount) {
    if (sigma.empty() || !(sigma.front() > 0.0)) throw DegenerateCurveError("LambdaGrid: all singular values vanish");
    const double hi = *std::max_element(sigma.begin(), sigma.end());
    const double lo = std::max(*std::min_element(sigma.begin(), sigma.end()) * 1e-4, 1e-12);
    if (!(hi > lo)) throw DegenerateCurveError("LambdaGrid: singular values too small to bracket");
    return logSpaced(lo, hi, count);
  }
};

struct LCurvePoint {
  double lambda = 0.0;
  double logResidual = 0.0;
  double logSolution = 0.0;
};

struct TikhonovNorms {
  double residualSquared = 0.0;
  double solutionSquared = 0.0;
  double filterSum = 0.0;  // Σ sigma²/(sigma² + lambda²)
};

inline TikhonovNorms tikhonovNorms(const ProjectedSpectrum& s, double lambda) {
  TikhonovNorms t;
  const double l2 = lambda * lambda;
  for (std::size_t i = 0; i < s.sigma.size(); ++i) {
    const double sg2 = s.sigma[i] * s.sigma[i];
    const double denom = sg2 + l2;
    const double sol = s.sigma[i] * s.coeffs[i] / denom;
    const double res = l2 / denom * s.coeffs[i];
    t.solutionSquared += sol * sol;
    t.residualSquared += res * res;
    t.filterSum += sg2 / denom;
  }
  t.residualSquared += s.incompatibility;
  return t;
}

inline std::vector<LCurvePoint> tikhonovCurvePoints(const ProjectedSpectrum& s, const LambdaGrid& grid) {
  if (s.sigma.empty()) throw DegenerateCurveError("L-curve: all singular values vanish");
  if (!(s.beta > 0.0)) throw DegenerateCurveError("L-curve: zero right-hand side");
  std::vector<LCurvePoint> pts;
  pts.reserve(grid.values.size());
  for (double lambda : grid.values) {
    const TikhonovNorms t = tikhonovNorms(s, lambda);
    pts.push_back({lambda, 0.5 * std::log(t.residualSquared), 0.5 * std::log(t.solutionSquared)});
  }
  return pts;
}

/// Signed curvature of the discrete curve by centered differences in the
/// point index. Entry i is NaN where it is undefined (end points, points
/// where the curve is numerically stationary, non-finite input).
/// Points moving slower than this fraction of the fastest point are not corner candidates.
inline constexpr double kLCurveMinSpeed = 1e-3;

inline Vector discreteCurvature(const std::vector<LCurvePoint>& pts) {
  const std::size_t n = pts.size();
  Vector kappa(n, std::numeric_limits<double>::quiet_NaN());
  if (n < 3) return kappa;
  Vector speed(n, 0.0);
  double maxSpeed = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double dr = 0.5 * (pts[i + 1].logResidual - pts[i - 1].logResidual);
    const double ds = 0.5 * (pts[i + 1].logSolution - pts[i - 1].logSolution);
    speed[i] = std::hypot(dr, ds);
    if (std::isfinite(speed[i])) maxSpeed = std::max(maxSpeed, speed[i]);
  }
  // At the saturated ends of the lambda range the curve creeps towards a
  // point; the curvature there is rounding noise or the vertex of a vanishing
  // arc, never the corner. Such points get no curvature.
  const double minSpeed = kLCurveMinSpeed * maxSpeed;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!std::isfinite(speed[i]) || !(speed[i] > minSpeed)) continue;
    const double dr = 0.5 * (pts[i + 1].logResidual - pts[i - 1].logResidual);
    const double ds = 0.5 * (pts[i + 1].logSolution - pts[i - 1].logSolution);
    const double ddr = pts[i + 1].logResidual - 2.0 * pts[i].logResidual + pts[i - 1].logResidual;
    const double dds = pts[i + 1].logSolution - 2.0 * pts[i].logSolution + pts[i - 1].logSolution;
    kappa[i] = (dr * dds - ddr * ds) / (speed[i] * speed[i] * speed[i]);
  }
  return kappa;
}

/// lambda at the corner: the largest interior local maximum of the signed
/// curvature, or the largest curvature overall when there is none. Ties go to
/// larger lambda.
inline double lcurveCorner(const std::vector<LCurvePoint>& pts) {
  if (pts.size() < 5) throw DegenerateCurveError("L-curve: need at least 5 points");
  const Vector kappa = discreteCurvature(pts);
  std::size_t peak = pts.size(), top = pts.size();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!std::isfinite(kappa[i])) continue;
    if (top == pts.size() || kappa[i] >= kappa[top]) top = i;
    const bool interior = i > 0 && i + 1 < pts.size() && std::isfinite(kappa[i - 1]) && std::isfinite(kappa[i + 1]);
    if (interior && kappa[i] >= kappa[i - 1] && kappa[i] >= kappa[i + 1] &&
        (peak == pts.size() || kappa[i] >= kappa[peak]))
      peak = i;
  }
  if (top == pts.size()) throw DegenerateCurveError("L-curve: curvature undefined everywhere");
  const std::size_t best = peak != pts.size() && kappa[peak] > 1e-8 ? peak : top;
  if (!(kappa[best] > 1e-8)) throw DegenerateCurveError("L-curve: no corner (curve is straight)");
  return pts[best].lambda;
}

/// ‖H y_λ - beta e1‖² / trace(I - H H_λ)², trace over the (k+1)-dimensional data space.
inline double gcvValue(const ProjectedSpectrum& s, double lambda) {
  const TikhonovNorms t = tikhonovNorms(s, lambda);
  const double trace = static_cast<double>(s.rows) - t.filterSum;
  if (!(trace > 1e-300)) throw DegenerateCurveError("GCV: vanishing trace");
  return t.residualSquared / (trace * trace);
}

/// Grid minimizer of GCV; ties go to larger lambda.
inline double gcvMinimize(const ProjectedSpectrum& s, const LambdaGrid& grid) {
  if (s.sigma.empty()) throw DegenerateCurveError("GCV: all singular values vanish");
  if (!(s.beta > 0.0)) throw DegenerateCurveError("GCV: zero right-hand side");
  double best = std::numeric_limits<double>::infinity();
  double bestLambda = 0.0;
  for (double lambda : grid.values) {
    const double g = gcvValue(s, lambda);
    if (!std::isfinite(g)) continue;
    if (g <= best) {
      best = g;
      bestLambda = lambda;
    }
  }
  if (!(bestLambda > 0.0)) throw DegenerateCurveError("GCV: no finite value on the grid");
  return bestLambda;
}

}  // namespace abba
