#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/stats.hpp"

namespace ftsbench::evaluation {

/// Population moments; kurt is excess kurtosis.
struct MomentSet {
  double mean = 0.0;
  double std = 0.0;
  double skew = 0.0;
  double kurt = 0.0;
};

/// Mean and standard deviation are always defined; skew and kurtosis only when the series has
/// non-negligible variance.
struct SeriesStats {
  MomentSet m;
  bool shape_defined = false;
};

inline SeriesStats series_stats(std::span<const double> x) {
  if (x.empty()) throw DegenerateData("moments of empty series");
  const double n = static_cast<double>(x.size());
  SeriesStats s;
  double sum = 0.0, raw = 0.0;
  for (double v : x) {
    sum += v;
    raw += v * v;
  }
  s.m.mean = sum / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - s.m.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  s.m.std = std::sqrt(m2 / n);
  if (negligible_variance(m2, raw)) return s;
  m2 /= n;
  m3 /= n;
  m4 /= n;
  s.m.skew = m3 / std::pow(m2, 1.5);
  s.m.kurt = m4 / (m2 * m2) - 3.0;
  s.shape_defined = true;
  return s;
}

inline MomentSet moments(std::span<const double> x) {
  if (x.size() < 4) throw DegenerateData("moments: need at least 4 observations, got " + std::to_string(x.size()));
  for (double v : x)
    if (!std::isfinite(v)) throw NonFiniteError("moments: non-finite value");
  const SeriesStats s = series_stats(x);
  if (!s.shape_defined) throw DegenerateData("moments: zero variance");
  return s.m;
}

inline std::size_t rolling_window_length(std::size_t len) { return len / 3; }

struct RollingMoments {
  std::vector<MomentSet> values;
  std::size_t window = 0;
  std::size_t skipped = 0;  // degenerate windows
};

/// Stride-1 windows of `window` steps (0 selects a third of the length).
inline RollingMoments rolling_moments(std::span<const double> x, std::size_t window = 0) {
  if (window == 0) window = rolling_window_length(x.size());
  if (window == 0 || window > x.size())
    throw DegenerateData("rolling moments: window " + std::to_string(window) + " does not fit series of length " +
                         std::to_string(x.size()));
  RollingMoments out;
  out.window = window;
  for (std::size_t s = 0; s + window <= x.size(); ++s) {
    try {
      out.values.push_back(moments(x.subspan(s, window)));
    } catch (const DegenerateData&) {
      ++out.skipped;
    }
  }
  return out;
}

}  // namespace ftsbench::evaluation
