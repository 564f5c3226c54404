#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "abba/ct_model.hpp"

namespace abba {

class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct MetricReport {
  double rre = 0.0;
  double ssim = 1.0;
};

/// ‖x - xTrue‖₂ / ‖xTrue‖₂
inline double rre(std::span<const double> x, std::span<const double> xTrue) {
  if (x.size() != xTrue.size()) throw ConfigurationError("rre: length mismatch");
  const double ref = norm2(xTrue);
  if (!(ref > 0.0)) throw UndefinedMetricError("rre: ground truth has zero norm");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - xTrue[i]) * (x[i] - xTrue[i]);
  return std::sqrt(acc) / ref;
}

inline constexpr std::size_t kSsimWindow = 8;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

/// Normalized 8x8 Gaussian window (sigma 1.5) centered between the middle pixels.
inline const std::array<double, kSsimWindow * kSsimWindow>& ssimWeights() {
  static const auto weights = [] {
    std::array<double, kSsimWindow * kSsimWindow> w{};
    const double c = 0.5 * static_cast<double>(kSsimWindow - 1);
    double total = 0.0;
    for (std::size_t i = 0; i < kSsimWindow; ++i)
      for (std::size_t j = 0; j < kSsimWindow; ++j) {
        const double di = static_cast<double>(i) - c, dj = static_cast<double>(j) - c;
        w[i * kSsimWindow + j] = std::exp(-(di * di + dj * dj) / (2.0 * kSsimSigma * kSsimSigma));
        total += w[i * kSsimWindow + j];
      }
    for (auto& v : w) v /= total;
    return w;
  }();
  return weights;
}

/// Mean SSIM over all 8x8 windows (stride 1) with an explicit dynamic range.
inline double ssimWithRange(std::span<const double> x, std::span<const double> ref, const ImageGrid& grid,
                            double dynamicRange) {
  if (x.size() != grid.size() || ref.size() != grid.size()) throw ConfigurationError("ssim: image/grid size mismatch");
  if (grid.nx < kSsimWindow || grid.ny < kSsimWindow) throw ConfigurationError("ssim: image smaller than 8x8");
  if (!(dynamicRange > 0.0)) throw UndefinedMetricError("ssim: zero dynamic range");
  const double c1 = (kSsimK1 * dynamicRange) * (kSsimK1 * dynamicRange);
  const double c2 = (kSsimK2 * dynamicRange) * (kSsimK2 * dynamicRange);
  const auto& w = ssimWeights();

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y0 = 0; y0 + kSsimWindow <= grid.ny; ++y0) {
    for (std::size_t x0 = 0; x0 + kSsimWindow <= grid.nx; ++x0) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (std::size_t i = 0; i < kSsimWindow; ++i) {
        const std::size_t rowOff = (y0 + i) * grid.nx + x0;
        for (std::size_t j = 0; j < kSsimWindow; ++j) {
          const double wij = w[i * kSsimWindow + j];
          const double a = x[rowOff + j], b = ref[rowOff + j];
          mx += wij * a;
          my += wij * b;
          sxx += wij * a * a;
          syy += wij * b * b;
          sxy += wij * a * b;
        }
      }
      const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

/// SSIM of x against xTrue with dynamic range max(xTrue) - min(xTrue).
inline double ssim(std::span<const double> x, std::span<const double> xTrue, const ImageGrid& grid) {
  if (x.size() != grid.size() || xTrue.size() != grid.size()) throw ConfigurationError("ssim: image/grid size mismatch");
  if (grid.nx < kSsimWindow || grid.ny < kSsimWindow) throw ConfigurationError("ssim: image smaller than 8x8");
  const auto [lo, hi] = std::minmax_element(xTrue.begin(), xTrue.end());
  if (!(*hi > *lo)) throw UndefinedMetricError("ssim: constant ground truth");
  return ssimWithRange(x, xTrue, grid, *hi - *lo);
}

inline MetricReport evaluate(std::span<const double> x, std::span<const double> xTrue, const ImageGrid& grid) {
  return {rre(x, xTrue), ssim(x, xTrue, grid)};
}

}  // namespace abba
