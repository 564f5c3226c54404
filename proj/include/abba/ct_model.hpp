#pragma once

// 2-D parallel-beam CT test problems: phantom, ray-driven forward projector,
// pixel-driven (unmatched) backprojector, exact-transpose backprojector and
// sinogram noise.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "abba/linear_operator.hpp"

namespace abba {

/// Centered pixel grid; pixel (ix, iy) is stored at iy * nx + ix and y grows with iy.
struct ImageGrid {
  std::size_t nx = 0;
  std::size_t ny = 0;
  double pixelSize = 1.0;

  std::size_t size() const { return nx * ny; }
  double halfWidth() const { return 0.5 * static_cast<double>(nx) * pixelSize; }
  double halfHeight() const { return 0.5 * static_cast<double>(ny) * pixelSize; }
  double centerX(std::size_t ix) const { return (static_cast<double>(ix) + 0.5) * pixelSize - halfWidth(); }
  double centerY(std::size_t iy) const { return (static_cast<double>(iy) + 0.5) * pixelSize - halfHeight(); }

  void validate() const {
    if (nx == 0 || ny == 0) throw ConfigurationError("ImageGrid: nx and ny must be positive");
    if (!(pixelSize > 0.0) || !std::isfinite(pixelSize)) throw ConfigurationError("ImageGrid: pixelSize must be positive");
  }
};

/// Parallel-beam acquisition. Sinogram entry (a, j) is stored at a * detCount + j.
struct ParallelGeometry {
  std::vector<double> angles;
  std::size_t detCount = 0;
  double detSpacing = 1.0;

  std::size_t measurements() const { return angles.size() * detCount; }

  /// Signed distance of bin j's center from the central ray.
  double detectorOffset(std::size_t j) const {
    return (static_cast<double>(j) - 0.5 * static_cast<double>(detCount - 1)) * detSpacing;
  }

  static ParallelGeometry uniform(std::size_t angleCount, std::size_t detCount, double detSpacing) {
    ParallelGeometry g;
    g.detCount = detCount;
    g.detSpacing = detSpacing;
    g.angles.resize(angleCount);
    for (std::size_t i = 0; i < angleCount; ++i)
      g.angles[i] = std::numbers::pi * static_cast<double>(i) / static_cast<double>(angleCount);
    return g;
  }

  void validate() const {
    if (angles.empty()) throw ConfigurationError("ParallelGeometry: no view angles");
    if (detCount == 0) throw ConfigurationError("ParallelGeometry: detCount must be positive");
    if (!(detSpacing > 0.0)) throw ConfigurationError("ParallelGeometry: detSpacing must be positive");
    for (std::size_t i = 0; i < angles.size(); ++i) {
      if (!(angles[i] >= 0.0 && angles[i] < std::numbers::pi))
        throw ConfigurationError("ParallelGeometry: angles must lie in [0, pi)");
      if (i > 0 && !(angles[i] > angles[i - 1]))
        throw ConfigurationError("ParallelGeometry: angles must be strictly increasing");
    }
  }
};

// ---------------------------------------------------------------------------
// phantom

struct Ellipse {
  double intensity, semiX, semiY, centerX, centerY, rotationDeg;

  /// (x, y) in normalized coordinates where the image spans [-1, 1]^2.
  bool contains(double x, double y) const {
    const double phi = rotationDeg * std::numbers::pi / 180.0;
    const double dx = x - centerX, dy = y - centerY;
    const double u = dx * std::cos(phi) + dy * std::sin(phi);
    const double v = -dx * std::sin(phi) + dy * std::cos(phi);
    return (u * u) / (semiX * semiX) + (v * v) / (semiY * semiY) <= 1.0;
  }
};

/// Modified (high-contrast) Shepp-Logan ellipse table; intensities stack to [0, 1].
inline const std::array<Ellipse, 10>& sheppLoganEllipses() {
  static const std::array<Ellipse, 10> table{{
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
      {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
      {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
      {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
      {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
      {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
      {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
      {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
      {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
      {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
  }};
  return table;
}

inline Vector sheppLogan(const ImageGrid& grid) {
  grid.validate();
  if (grid.nx != grid.ny) throw ConfigurationError("sheppLogan: grid must be square");
  Vector img(grid.size(), 0.0);
  for (std::size_t iy = 0; iy < grid.ny; ++iy) {
    const double y = grid.centerY(iy) / grid.halfHeight();
    for (std::size_t ix = 0; ix < grid.nx; ++ix) {
      const double x = grid.centerX(ix) / grid.halfWidth();
      double value = 0.0;
      for (const auto& e : sheppLoganEllipses())
        if (e.contains(x, y)) value += e.intensity;
      img[iy * grid.nx + ix] = value;
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// projectors

namespace detail {

/// Sparse row storage of the ray-driven system matrix.
struct RayMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<std::size_t> rowStart{0};
  std::vector<std::uint32_t> pixel;
  std::vector<double> length;
};

/// Siddon traversal of the line {s*n + t*d}, n = (cos, sin), d = (-sin, cos).
/// Calls emit(pixelIndex, intersectionLength) in order of increasing t.
/// Pixels are half-open, [x0, x0 + h) x [y0, y0 + h): a ray running along a
/// pixel edge belongs to the pixel on its positive side.
template <typename Emit>
void traceRay(const ImageGrid& grid, double theta, double s, Emit&& emit) {
  const double c = std::cos(theta), sn = std::sin(theta);
  const double px = s * c, py = s * sn;
  const double dx = -sn, dy = c;
  const double X = grid.halfWidth(), Y = grid.halfHeight(), h = grid.pixelSize;
  constexpr double tiny = 1e-14;

  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  auto clip = [&](double p, double d, double half) {
    if (std::abs(d) < tiny) return p >= -half && p < half;
    double t1 = (-half - p) / d, t2 = (half - p) / d;
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
    return true;
  };
  if (!clip(px, dx, X) || !clip(py, dy, Y) || !(tmax > tmin)) return;

  std::vector<double> ts;
  ts.reserve(grid.nx + grid.ny + 4);
  ts.push_back(tmin);
  auto planes = [&](double p, double d, std::size_t count, double half) {
    if (std::abs(d) < tiny) return;
    for (std::size_t k = 0; k <= count; ++k) {
      const double t = (-half + static_cast<double>(k) * h - p) / d;
      if (t > tmin && t < tmax) ts.push_back(t);
    }
  };
  planes(px, dx, grid.nx, X);
  planes(py, dy, grid.ny, Y);
  ts.push_back(tmax);
  std::sort(ts.begin(), ts.end());

  for (std::size_t i = 1; i < ts.size(); ++i) {
    const double len = ts[i] - ts[i - 1];
    if (!(len > 0.0)) continue;
    const double mid = 0.5 * (ts[i] + ts[i - 1]);
    const double x = std::abs(dx) < tiny ? px : px + mid * dx;
    const double y = std::abs(dy) < tiny ? py : py + mid * dy;
    const auto ix = static_cast<std::ptrdiff_t>(std::floor((x + X) / h));
    const auto iy = static_cast<std::ptrdiff_t>(std::floor((y + Y) / h));
    const auto cx = std::clamp<std::ptrdiff_t>(ix, 0, static_cast<std::ptrdiff_t>(grid.nx) - 1);
    const auto cy = std::clamp<std::ptrdiff_t>(iy, 0, static_cast<std::ptrdiff_t>(grid.ny) - 1);
    emit(static_cast<std::size_t>(cy) * grid.nx + static_cast<std::size_t>(cx), len);
  }
}

inline RayMatrix buildRayMatrix(const ImageGrid& grid, const ParallelGeometry& geometry) {
  RayMatrix rm;
  rm.rows = geometry.measurements();
  rm.cols = grid.size();
  rm.rowStart.reserve(rm.rows + 1);
  for (double theta : geometry.angles) {
    for (std::size_t j = 0; j < geometry.detCount; ++j) {
      traceRay(grid, theta, geometry.detectorOffset(j), [&](std::size_t p, double len) {
        rm.pixel.push_back(static_cast<std::uint32_t>(p));
        rm.length.push_back(len);
      });
      rm.rowStart.push_back(rm.pixel.size());
    }
  }
  return rm;
}

}  // namespace detail

/// Ray-driven forward projector with exact (Siddon) intersection lengths.
inline LinearOperator forwardRayDriven(const ImageGrid& grid, const ParallelGeometry& geometry) {
  grid.validate();
  geometry.validate();
  auto rm = std::make_shared<const detail::RayMatrix>(detail::buildRayMatrix(grid, geometry));
  return LinearOperator(rm->rows, rm->cols,
                        [rm](std::span<const double> x) {
                          Vector out(rm->rows, 0.0);
                          for (std::size_t r = 0; r < rm->rows; ++r) {
                            double acc = 0.0;
                            for (std::size_t e = rm->rowStart[r]; e < rm->rowStart[r + 1]; ++e)
                              acc += rm->length[e] * x[rm->pixel[e]];
                            out[r] = acc;
                          }
                          return out;
                        },
                        "A_ray");
}

/// Pixel-driven backprojector: each pixel center is projected onto the
/// detector and the sinogram row is sampled by linear interpolation.
/// Deliberately not the adjoint of forwardRayDriven.
inline LinearOperator backPixelDriven(const ImageGrid& grid, const ParallelGeometry& geometry) {
  grid.validate();
  geometry.validate();
  const std::size_t nAngles = geometry.angles.size();
  std::vector<double> cs(nAngles), sn(nAngles);
  for (std::size_t a = 0; a < nAngles; ++a) {
    cs[a] = std::cos(geometry.angles[a]);
    sn[a] = std::sin(geometry.angles[a]);
  }
  const std::size_t det = geometry.detCount;
  const double spacing = geometry.detSpacing;
  const double mid = 0.5 * static_cast<double>(det - 1);
  return LinearOperator(
      grid.size(), geometry.measurements(),
      [grid, cs, sn, det, spacing, mid](std::span<const double> sino) {
        Vector out(grid.size(), 0.0);
        for (std::size_t iy = 0; iy < grid.ny; ++iy) {
          const double y = grid.centerY(iy);
          for (std::size_t ix = 0; ix < grid.nx; ++ix) {
            const double x = grid.centerX(ix);
            double acc = 0.0;
            for (std::size_t a = 0; a < cs.size(); ++a) {
              const double u = (x * cs[a] + y * sn[a]) / spacing + mid;
              const double fl = std::floor(u);
              const double frac = u - fl;
              const auto i0 = static_cast<std::ptrdiff_t>(fl);
              const double* row = sino.data() + a * det;
              if (i0 >= 0 && i0 < static_cast<std::ptrdiff_t>(det)) acc += (1.0 - frac) * row[i0];
              if (i0 + 1 >= 0 && i0 + 1 < static_cast<std::ptrdiff_t>(det)) acc += frac * row[i0 + 1];
            }
            out[iy * grid.nx + ix] = grid.pixelSize * acc;
          }
        }
        return out;
      },
      "B_pix");
}

inline constexpr std::size_t kMatchedAssemblyLimit = 10'000'000;

/// Exact transpose of an explicitly assembled forward operator (desk scale only).
inline LinearOperator matchedBack(const LinearOperator& forward) {
  if (forward.rows() * forward.cols() > kMatchedAssemblyLimit)
    throw ConfigurationError("matchedBack: " + forward.shapeString() +
                             " exceeds the dense assembly limit; matched mode is desk-scale only");
  return transposeOf(assemble(forward), forward.name() + "^T");
}

// ---------------------------------------------------------------------------
// noise and test problems

struct NoisySinogram {
  Vector noisy;
  double noiseNorm = 0.0;
};

/// Adds Gaussian noise scaled to exactly level * ‖b‖₂.
inline NoisySinogram addNoise(std::span<const double> clean, double level, std::uint64_t seed) {
  if (!(level >= 0.0)) throw ConfigurationError("addNoise: level must be nonnegative");
  NoisySinogram out{Vector(clean.begin(), clean.end()), 0.0};
  if (level == 0.0 || clean.empty()) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Vector g(clean.size());
  for (auto& v : g) v = gauss(rng);
  out.noiseNorm = level * norm2(clean);
  axpy(out.noiseNorm / norm2(g), g, out.noisy);
  return out;
}

struct CtProblem {
  std::string name;
  ImageGrid grid;
  ParallelGeometry geometry;
  Vector xTrue;
  Vector bClean;
  Vector bNoisy;
  double noiseNorm = 0.0;
  LinearOperator forward;
  LinearOperator back;
  bool matched = false;
};

/// Free-form description of a Shepp-Logan parallel-beam problem.
struct CtProblemSpec {
  std::string name = "custom";
  std::size_t size = 64;
  std::size_t angleCount = 60;
  std::size_t detCount = 0;   // 0: same as size
  double detSpacing = 0.0;    // 0: detector extent equals the image diagonal
  double pixelSize = 1.0;
  double noiseLevel = 0.025;
  bool matched = false;
  std::uint64_t seed = 0;
};

inline CtProblem buildProblem(const CtProblemSpec& spec) {
  CtProblem p;
  p.name = spec.name;
  p.grid = ImageGrid{spec.size, spec.size, spec.pixelSize};
  p.grid.validate();
  const std::size_t det = spec.detCount ? spec.detCount : spec.size;
  const double spacing = spec.detSpacing > 0.0
                             ? spec.detSpacing
                             : std::numbers::sqrt2 * static_cast<double>(spec.size) * spec.pixelSize / static_cast<double>(det);
  p.geometry = ParallelGeometry::uniform(spec.angleCount, det, spacing);
  p.geometry.validate();
  p.xTrue = sheppLogan(p.grid);
  p.forward = forwardRayDriven(p.grid, p.geometry);
  p.matched = spec.matched;
  p.back = spec.matched ? matchedBack(p.forward) : backPixelDriven(p.grid, p.geometry);
  p.bClean = p.forward.apply(p.xTrue);
  auto noisy = addNoise(p.bClean, spec.noiseLevel, spec.seed);
  p.bNoisy = std::move(noisy.noisy);
  p.noiseNorm = noisy.noiseNorm;
  return p;
}

enum class TestProblem { Tp1Like, Tp2, Tp3Desk };

inline CtProblemSpec testProblemSpec(TestProblem which, bool matched, std::uint64_t seed) {
  CtProblemSpec s;
  s.matched = matched;
  s.seed = seed;
  switch (which) {
    case TestProblem::Tp1Like:
      s.name = "tp1-like";
      s.size = 128;
      s.angleCount = 180;
      s.detCount = 128;
      s.noiseLevel = 0.001;
      break;
    case TestProblem::Tp2:
      s.name = "tp2";
      s.size = 128;
      s.angleCount = 50;
      s.detCount = 128;
      s.noiseLevel = 0.025;
      break;
    case TestProblem::Tp3Desk:
      s.name = "tp3-desk";
      s.size = 256;
      s.angleCount = 50;
      s.detCount = 256;
      s.noiseLevel = 0.015;
      break;
  }
  return s;
}

inline CtProblem buildTestProblem(TestProblem which, bool matched, std::uint64_t seed) {
  return buildProblem(testProblemSpec(which, matched, seed));
}

inline TestProblem parseTestProblem(const std::string& name) {
  if (name == "tp1-like") return TestProblem::Tp1Like;
  if (name == "tp2") return TestProblem::Tp2;
  if (name == "tp3-desk") return TestProblem::Tp3Desk;
  throw ConfigurationError("unknown test problem '" + name + "' (expected tp1-like, tp2 or tp3-desk)");
}

}  // namespace abba
