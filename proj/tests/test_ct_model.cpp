#include <gtest/gtest.h>

#include <numbers>

#include "abba/ct_model.hpp"
#include "test_helpers.hpp"

using namespace abba;
using namespace abba::testing;

namespace {

/// Length of the segment of line p + t d inside [x0,x1)x[y0,y1) (Liang-Barsky).
double clippedLength(double px, double py, double dx, double dy, double x0, double x1, double y0, double y1) {
  double lo = -1e300, hi = 1e300;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {px - x0, x1 - px, py - y0, y1 - py};
  for (int i = 0; i < 4; ++i) {
    if (std::abs(p[i]) < 1e-14) {
      // parallel to this edge: inside a half-open box [lo, hi)
      if (i % 2 == 0 ? q[i] < 0.0 : q[i] <= 0.0) return 0.0;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0) lo = std::max(lo, t);
    else hi = std::min(hi, t);
  }
  return hi > lo ? hi - lo : 0.0;
}

/// Dense system matrix built by clipping every ray against every pixel box.
DenseMatrix clippingOracle(const ImageGrid& g, const ParallelGeometry& geo) {
  DenseMatrix a(geo.measurements(), g.size());
  for (std::size_t ai = 0; ai < geo.angles.size(); ++ai) {
    const double th = geo.angles[ai];
    for (std::size_t j = 0; j < geo.detCount; ++j) {
      const double s = (static_cast<double>(j) - 0.5 * static_cast<double>(geo.detCount - 1)) * geo.detSpacing;
      const double px = s * std::cos(th), py = s * std::sin(th);
      const double dx = -std::sin(th), dy = std::cos(th);
      for (std::size_t iy = 0; iy < g.ny; ++iy)
        for (std::size_t ix = 0; ix < g.nx; ++ix) {
          const double x0 = -0.5 * g.nx * g.pixelSize + ix * g.pixelSize;
          const double y0 = -0.5 * g.ny * g.pixelSize + iy * g.pixelSize;
          a(ai * geo.detCount + j, iy * g.nx + ix) =
              clippedLength(px, py, dx, dy, x0, x0 + g.pixelSize, y0, y0 + g.pixelSize);
        }
    }
  }
  return a;
}

double maxAbsDiff(const DenseMatrix& a, const DenseMatrix& b) {
  double w = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) w = std::max(w, std::abs(a.data[i] - b.data[i]));
  return w;
}

double frobeniusGap(const DenseMatrix& a, const DenseMatrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
  return std::sqrt(s);
}

/// Chord length of the line {s n + t d} through the centered square of half-width h.
double analyticChord(double theta, double s, double h) {
  return clippedLength(s * std::cos(theta), s * std::sin(theta), -std::sin(theta), std::cos(theta), -h, h, -h, h);
}

}  // namespace

// ---------------------------------------------------------------------------
// phantom

TEST(SheppLogan, TwoByTwoMatchesEllipseMembership) {
  const ImageGrid g{2, 2, 1.0};
  const Vector img = sheppLogan(g);
  for (std::size_t iy = 0; iy < 2; ++iy)
    for (std::size_t ix = 0; ix < 2; ++ix) {
      const double x = (ix + 0.5) - 1.0, y = (iy + 0.5) - 1.0;  // normalized: half-width 1
      double v = 0.0;
      for (const auto& e : sheppLoganEllipses()) {
        const double phi = e.rotationDeg * std::numbers::pi / 180.0;
        const double u = (x - e.centerX) * std::cos(phi) + (y - e.centerY) * std::sin(phi);
        const double w = -(x - e.centerX) * std::sin(phi) + (y - e.centerY) * std::cos(phi);
        if (u * u / (e.semiX * e.semiX) + w * w / (e.semiY * e.semiY) <= 1.0) v += e.intensity;
      }
      EXPECT_DOUBLE_EQ(img[iy * 2 + ix], v);
    }
}

TEST(SheppLogan, CenterOf65GridIsAnalyticSum) {
  // Ellipses containing the origin: outer (1.0), brain (-0.8), and the
  // small ellipse at (0, 0.1) with radius 0.046 does not reach it; the one
  // at (0, 0.35) does not either. Sum = 0.2.
  const ImageGrid g{65, 65, 1.0};
  const Vector img = sheppLogan(g);
  EXPECT_NEAR(img[32 * 65 + 32], 1.0 - 0.8, 1e-15);
}

TEST(SheppLogan, CornerIsBackgroundAndRangeIsUnit) {
  const ImageGrid g{64, 64, 1.0};
  const Vector img = sheppLogan(g);
  EXPECT_EQ(img[0], 0.0);
  EXPECT_EQ(img[63], 0.0);
  EXPECT_EQ(img[64 * 64 - 1], 0.0);
  for (double v : img) {
    EXPECT_GE(v, -1e-12);
    EXPECT_LE(v, 1.0 + 1e-12);
  }
  EXPECT_EQ(img, sheppLogan(g));
}

TEST(SheppLogan, NonSquareIsConfigurationError) {
  EXPECT_THROW(sheppLogan(ImageGrid{4, 5, 1.0}), ConfigurationError);
}

// ---------------------------------------------------------------------------
// forward projector

TEST(ForwardRayDriven, VerticalChordThroughCenter) {
  const ImageGrid g{10, 10, 0.5};
  ParallelGeometry geo;
  geo.angles = {0.0};
  geo.detCount = 1;
  geo.detSpacing = 1.0;
  const Vector ones(g.size(), 1.0);
  EXPECT_NEAR(forwardRayDriven(g, geo).apply(ones)[0], 10 * 0.5, 1e-12);
}

TEST(ForwardRayDriven, DiagonalChord) {
  const ImageGrid g{9, 9, 1.0};
  ParallelGeometry geo;
  geo.angles = {std::numbers::pi / 4};
  geo.detCount = 1;
  geo.detSpacing = 1.0;
  EXPECT_NEAR(forwardRayDriven(g, geo).apply(Vector(g.size(), 1.0))[0], std::numbers::sqrt2 * 9, 1e-12);
}

TEST(ForwardRayDriven, FourByFourMatchesClippingOracle) {
  const ImageGrid g{4, 4, 1.0};
  const auto geo = ParallelGeometry::uniform(3, 5, 1.0);
  const DenseMatrix a = assemble(forwardRayDriven(g, geo));
  EXPECT_LT(maxAbsDiff(a, clippingOracle(g, geo)), 1e-12);
}

TEST(ForwardRayDriven, NonDegenerateGeometriesMatchClippingOracle) {
  // Oblique angles, then a uniform set whose axis-aligned rays run along pixel edges.
  const ImageGrid g{7, 7, 0.8};
  ParallelGeometry geo;
  geo.angles = {0.1, 1.0, 2.2};
  geo.detCount = 9;
  geo.detSpacing = 1.3 * 0.8;
  EXPECT_LT(maxAbsDiff(assemble(forwardRayDriven(g, geo)), clippingOracle(g, geo)), 1e-12);

  const ImageGrid g2{12, 12, 1.0};
  const auto geo2 = ParallelGeometry::uniform(7, 17, 1.0);
  EXPECT_LT(maxAbsDiff(assemble(forwardRayDriven(g2, geo2)), clippingOracle(g2, geo2)), 1e-12);
}

TEST(ForwardRayDriven, MassConsistencyOnRandomRays) {
  const ImageGrid g{16, 16, 1.0};
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi), off(-12.0, 12.0);
  const Vector ones(g.size(), 1.0);
  for (int t = 0; t < 100; ++t) {
    ParallelGeometry geo;
    geo.angles = {angle(rng)};
    geo.detCount = 1;
    geo.detSpacing = 1.0;
    const double s = off(rng);
    // Shift the single-bin detector by evaluating the ray directly.
    double sum = 0.0;
    detail::traceRay(g, geo.angles[0], s, [&](std::size_t p, double len) { sum += len * ones[p]; });
    EXPECT_NEAR(sum, analyticChord(geo.angles[0], s, 8.0), 1e-10);
  }
}

TEST(ForwardRayDriven, MirroredProfilesForSymmetricPhantom) {
  // A centrally symmetric image projects to a mirrored profile at theta and
  // theta + pi; the latter is the same line set with s -> -s.
  const ImageGrid g{20, 20, 1.0};
  Vector img(g.size());
  for (std::size_t iy = 0; iy < 20; ++iy)
    for (std::size_t ix = 0; ix < 20; ++ix) {
      const double x = g.centerX(ix), y = g.centerY(iy);
      img[iy * 20 + ix] = std::exp(-(x * x + 2 * y * y) / 30.0) + (std::abs(x) < 3 && std::abs(y) < 6 ? 0.5 : 0.0);
    }
  const auto geo = ParallelGeometry::uniform(8, 29, 1.0);
  const Vector sino = forwardRayDriven(g, geo).apply(img);
  for (std::size_t a = 0; a < geo.angles.size(); ++a)
    for (std::size_t j = 0; j < geo.detCount; ++j) {
      double mirrored = 0.0;
      detail::traceRay(g, geo.angles[a] + std::numbers::pi, geo.detectorOffset(j),
                       [&](std::size_t p, double len) { mirrored += len * img[p]; });
      EXPECT_NEAR(sino[a * geo.detCount + (geo.detCount - 1 - j)], mirrored, 1e-10);
    }
}

TEST(ForwardRayDriven, RaysMissingTheImageGiveZeroRows) {
  const ImageGrid g{4, 4, 1.0};
  ParallelGeometry geo;
  geo.angles = {0.3};
  geo.detCount = 3;
  geo.detSpacing = 10.0;
  const Vector out = forwardRayDriven(g, geo).apply(Vector(g.size(), 1.0));
  EXPECT_EQ(out[0], 0.0);
  EXPECT_EQ(out[2], 0.0);
  EXPECT_GT(out[1], 0.0);
}

TEST(ParallelGeometry, ValidationErrors) {
  ParallelGeometry geo = ParallelGeometry::uniform(3, 4, 1.0);
  geo.angles = {0.5, 0.2};
  EXPECT_THROW(forwardRayDriven(ImageGrid{4, 4, 1.0}, geo), ConfigurationError);
  geo.angles = {0.0, std::numbers::pi};
  EXPECT_THROW(forwardRayDriven(ImageGrid{4, 4, 1.0}, geo), ConfigurationError);
  EXPECT_THROW(forwardRayDriven(ImageGrid{0, 4, 1.0}, ParallelGeometry::uniform(3, 4, 1.0)), ConfigurationError);
}

// ---------------------------------------------------------------------------
// backprojectors

TEST(BackPixelDriven, ZeroInZeroOut) {
  const ImageGrid g{8, 8, 1.0};
  const auto geo = ParallelGeometry::uniform(6, 11, 1.0);
  const Vector out = backPixelDriven(g, geo).apply(Vector(geo.measurements(), 0.0));
  for (double v : out) EXPECT_EQ(v, 0.0);
}

TEST(BackPixelDriven, SingleBinMatchesClosedFormInterpolation) {
  const ImageGrid g{10, 10, 0.7};
  ParallelGeometry geo;
  geo.angles = {0.4};
  geo.detCount = 9;
  geo.detSpacing = 1.1;
  const std::size_t bin = 5;
  Vector u(9, 0.0);
  u[bin] = 1.0;
  const Vector out = backPixelDriven(g, geo).apply(u);
  const double center = (static_cast<double>(bin) - 4.0) * 1.1;
  for (std::size_t iy = 0; iy < 10; ++iy)
    for (std::size_t ix = 0; ix < 10; ++ix) {
      const double s = g.centerX(ix) * std::cos(0.4) + g.centerY(iy) * std::sin(0.4);
      const double hat = std::max(0.0, 1.0 - std::abs(s - center) / 1.1);
      EXPECT_NEAR(out[iy * 10 + ix], 0.7 * hat, 1e-13);
    }
}

TEST(BackPixelDriven, GenuinelyUnmatched) {
  const ImageGrid g{8, 8, 1.0};
  const auto geo = ParallelGeometry::uniform(6, 11, 1.0);
  const DenseMatrix a = assemble(forwardRayDriven(g, geo));
  const DenseMatrix b = assemble(backPixelDriven(g, geo));
  EXPECT_GT(frobeniusGap(b, a.transposed()), 1e-3 * a.frobeniusNorm());
}

TEST(MatchedBack, IdentityForward) {
  const auto b = assemble(matchedBack(identityOperator(5)));
  EXPECT_EQ(b.data, DenseMatrix::identity(5).data);
}

TEST(MatchedBack, AdjointIdentityOn16Grid) {
  const ImageGrid g{16, 16, 1.0};
  const auto geo = ParallelGeometry::uniform(12, 23, 1.0);
  const auto A = forwardRayDriven(g, geo);
  const auto B = matchedBack(A);
  for (int t = 0; t < 50; ++t) {
    const Vector u = randomVector(g.size(), 10 + t), v = randomVector(geo.measurements(), 500 + t);
    const double lhs = dot(A.apply(u), v), rhs = dot(u, B.apply(v));
    EXPECT_LT(std::abs(lhs - rhs), 1e-12 * norm2(A.apply(u)) * norm2(v) * 10);
  }
  EXPECT_EQ(frobeniusGap(assemble(B), assemble(A).transposed()), 0.0);
}

TEST(MatchedBack, SizeGuard) {
  const auto big = LinearOperator(20000, 1000, [](std::span<const double>) { return Vector(20000, 0.0); }, "big");
  try {
    matchedBack(big);
    FAIL();
  } catch (const ConfigurationError& e) {
    EXPECT_NE(std::string(e.what()).find("desk-scale"), std::string::npos);
  }
}

TEST(Mismatch, UnmatchedGapOnEveryDeskGeometry) {
  for (const auto& [n, angles, det] : std::vector<std::tuple<std::size_t, std::size_t, std::size_t>>{
           {8, 6, 11}, {12, 10, 17}, {16, 9, 16}, {10, 30, 15}}) {
    CtProblemSpec spec;
    spec.size = n;
    spec.angleCount = angles;
    spec.detCount = det;
    spec.noiseLevel = 0.0;
    const CtProblem un = buildProblem(spec);
    spec.matched = true;
    const CtProblem ma = buildProblem(spec);
    const DenseMatrix a = assemble(un.forward);
    EXPECT_GT(frobeniusGap(assemble(un.back), a.transposed()), 1e-3 * a.frobeniusNorm());
    EXPECT_EQ(frobeniusGap(assemble(ma.back), a.transposed()), 0.0);
  }
}

// ---------------------------------------------------------------------------
// noise and problems

TEST(AddNoise, ZeroLevel) {
  const Vector b = randomVector(30, 1);
  const auto out = addNoise(b, 0.0, 5);
  EXPECT_EQ(out.noisy, b);
  EXPECT_EQ(out.noiseNorm, 0.0);
}

TEST(AddNoise, ExactRelativeLevel) {
  const Vector b = randomVector(6400, 3);
  const auto out = addNoise(b, 0.025, 9);
  EXPECT_NEAR(norm2(subtract(out.noisy, b)) / norm2(b), 0.025, 1e-14);
  const auto out2 = addNoise(b, 0.015, 10);
  EXPECT_NEAR(out2.noiseNorm, 0.015 * norm2(b), 1e-15 * norm2(b));
}

TEST(AddNoise, DeterministicGivenSeed) {
  const Vector b = randomVector(100, 3);
  EXPECT_EQ(addNoise(b, 0.1, 4).noisy, addNoise(b, 0.1, 4).noisy);
  EXPECT_NE(addNoise(b, 0.1, 4).noisy, addNoise(b, 0.1, 5).noisy);
  EXPECT_THROW(addNoise(b, -0.1, 4), ConfigurationError);
}

TEST(TestProblems, Dimensions) {
  const auto tp2 = testProblemSpec(TestProblem::Tp2, false, 0);
  EXPECT_EQ(tp2.angleCount * tp2.detCount, 6400u);
  EXPECT_EQ(tp2.size * tp2.size, 16384u);
  EXPECT_DOUBLE_EQ(tp2.noiseLevel, 0.025);
  const auto tp1 = testProblemSpec(TestProblem::Tp1Like, false, 0);
  EXPECT_EQ(tp1.angleCount * tp1.detCount, 23040u);
  EXPECT_EQ(tp1.size * tp1.size, 16384u);
  const auto tp3 = testProblemSpec(TestProblem::Tp3Desk, false, 0);
  EXPECT_EQ(tp3.size, 256u);
  EXPECT_EQ(tp3.angleCount * tp3.detCount, 12800u);
  EXPECT_EQ(tp3.size * tp3.size, 65536u);
  EXPECT_DOUBLE_EQ(tp3.noiseLevel, 0.015);
  EXPECT_THROW(parseTestProblem("tp4"), ConfigurationError);
}

TEST(TestProblems, Tp2BuildsConsistently) {
  const CtProblem p = buildTestProblem(TestProblem::Tp2, false, 7);
  EXPECT_EQ(p.forward.rows(), 6400u);
  EXPECT_EQ(p.forward.cols(), 16384u);
  EXPECT_EQ(p.back.rows(), 16384u);
  EXPECT_EQ(p.back.cols(), 6400u);
  EXPECT_NEAR(norm2(subtract(p.bNoisy, p.bClean)) / p.noiseNorm, 1.0, 1e-12);
  // detector covers the image diagonal
  EXPECT_GE(p.geometry.detCount * p.geometry.detSpacing, std::numbers::sqrt2 * 128 - 1e-9);
  EXPECT_THROW(buildTestProblem(TestProblem::Tp2, true, 7), ConfigurationError);
}
