#include <gtest/gtest.h>

#include "abba/metrics.hpp"
#include "test_helpers.hpp"

using namespace abba;
using namespace abba::testing;

namespace {

/// Two-pass SSIM: window means first, then centered second moments.
double ssimOracle(const Vector& x, const Vector& y, std::size_t n, double L) {
  const double c1 = std::pow(0.01 * L, 2), c2 = std::pow(0.03 * L, 2);
  double w[8][8], tot = 0;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) tot += (w[i][j] = std::exp(-((i - 3.5) * (i - 3.5) + (j - 3.5) * (j - 3.5)) / 4.5));
  double sum = 0;
  int cnt = 0;
  for (std::size_t r = 0; r + 8 <= n; ++r)
    for (std::size_t c = 0; c + 8 <= n; ++c) {
      double mx = 0, my = 0;
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
          mx += w[i][j] / tot * x[(r + i) * n + c + j];
          my += w[i][j] / tot * y[(r + i) * n + c + j];
        }
      double vx = 0, vy = 0, cv = 0;
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
          const double a = x[(r + i) * n + c + j] - mx, b = y[(r + i) * n + c + j] - my;
          vx += w[i][j] / tot * a * a;
          vy += w[i][j] / tot * b * b;
          cv += w[i][j] / tot * a * b;
        }
      sum += (2 * mx * my + c1) * (2 * cv + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++cnt;
    }
  return sum / cnt;
}

Vector structuredFixture(std::size_t n) {
  Vector img(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      img[i * n + j] = 0.5 + 0.4 * std::sin(0.7 * i) * std::cos(0.45 * j) + ((i / 4 + j / 4) % 2 ? 0.1 : 0.0);
  return img;
}

}  // namespace

TEST(Rre, Examples) {
  const Vector t = randomVector(50, 1);
  EXPECT_EQ(rre(t, t), 0.0);
  EXPECT_DOUBLE_EQ(rre(Vector(50, 0.0), t), 1.0);
  Vector two = t;
  scale(2.0, two);
  EXPECT_NEAR(rre(two, t), 1.0, 1e-15);
  EXPECT_THROW(rre(t, Vector(50, 0.0)), UndefinedMetricError);
  EXPECT_THROW(rre(t, Vector(3, 1.0)), ConfigurationError);
}

TEST(Rre, TriangleBound) {
  for (int k = 0; k < 100; ++k) {
    const Vector x = randomVector(20, 3 * k), y = randomVector(20, 3 * k + 1), t = randomVector(20, 3 * k + 2);
    EXPECT_LE(rre(x, t), rre(x, y) * norm2(y) / norm2(t) + rre(y, t) + 1e-12);
  }
}

TEST(Ssim, IdentityIsOne) {
  const ImageGrid g{16, 16, 1.0};
  const Vector x = structuredFixture(16);
  EXPECT_NEAR(ssim(x, x, g), 1.0, 1e-12);
}

TEST(Ssim, ShiftedMatchesDirectEvaluation) {
  const ImageGrid g{16, 16, 1.0};
  const Vector t = structuredFixture(16);
  const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
  const double L = *hi - *lo;
  Vector x = t;
  for (auto& v : x) v += 0.5 * L;
  const double s = ssim(x, t, g);
  EXPECT_LT(s, 1.0);
  EXPECT_NEAR(s, ssimOracle(x, t, 16, L), 1e-12);
}

TEST(Ssim, ContrastInversionIsNegative) {
  // x = lo + hi - t keeps the local means positive and flips every covariance.
  const ImageGrid g{16, 16, 1.0};
  const Vector t = structuredFixture(16);
  const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
  Vector x = t;
  for (auto& v : x) v = *lo + *hi - v;
  const double s = ssim(x, t, g);
  EXPECT_LT(s, 0.0);
  EXPECT_NEAR(s, ssimOracle(x, t, 16, *hi - *lo), 1e-12);
}

TEST(Ssim, SymmetricUnderJointRange) {
  const ImageGrid g{12, 12, 1.0};
  const Vector a = randomVector(144, 4), b = randomVector(144, 5);
  const auto [alo, ahi] = std::minmax_element(a.begin(), a.end());
  const auto [blo, bhi] = std::minmax_element(b.begin(), b.end());
  const double L = std::max(*ahi, *bhi) - std::min(*alo, *blo);
  EXPECT_NEAR(ssimWithRange(a, b, g, L), ssimWithRange(b, a, g, L), 1e-14);
}

TEST(Ssim, Errors) {
  const ImageGrid g{8, 8, 1.0};
  EXPECT_THROW(ssim(Vector(64, 1.0), Vector(64, 1.0), g), UndefinedMetricError);
  EXPECT_THROW(ssim(Vector(49, 1.0), Vector(49, 1.0), ImageGrid{7, 7, 1.0}), ConfigurationError);
  const Vector t = structuredFixture(8);
  const auto r = evaluate(t, t, g);
  EXPECT_EQ(r.rre, 0.0);
  EXPECT_NEAR(r.ssim, 1.0, 1e-12);
}
