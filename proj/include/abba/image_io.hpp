#pragma once

// PGM (16-bit, binary) and CSV export of images and sinograms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>

#include "abba/linear_operator.hpp"

namespace abba {

/// Writes a width x height row-major array as a 16-bit binary PGM. Values are
/// mapped linearly from [lo, hi] to [0, 65535] and clamped. Row 0 of the
/// array becomes the bottom row of the picture, so y points up.
inline void writePgm16(const std::string& path, std::span<const double> values, std::size_t width, std::size_t height,
                       double lo, double hi) {
  if (values.size() != width * height) throw ConfigurationError("writePgm16: size mismatch for " + path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "P5\n" << width << " " << height << "\n65535\n";
  const double span = hi > lo ? hi - lo : 1.0;
  for (std::size_t r = height; r-- > 0;) {
    for (std::size_t c = 0; c < width; ++c) {
      double t = (values[r * width + c] - lo) / span;
      if (!std::isfinite(t)) t = 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const auto v = static_cast<std::uint16_t>(std::lround(t * 65535.0));
      const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
      out.write(bytes, 2);
    }
  }
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

inline void writePgm16(const std::string& path, std::span<const double> values, std::size_t width,
                       std::size_t height) {
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  writePgm16(path, values, width, height, values.empty() ? 0.0 : *lo, values.empty() ? 1.0 : *hi);
}

/// Row-major CSV, one array row per line, full precision.
inline void writeCsvMatrix(const std::string& path, std::span<const double> values, std::size_t width,
                           std::size_t height) {
  if (values.size() != width * height) throw ConfigurationError("writeCsvMatrix: size mismatch for " + path);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  char buf[32];
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", values[r * width + c]);
      if (c) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace abba
