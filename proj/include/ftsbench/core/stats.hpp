#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "ftsbench/core/error.hpp"

namespace ftsbench {

/// True when a centered sum of squares is negligible next to the raw sum of squares, i.e. the
/// series is constant up to rounding.
inline bool negligible_variance(double centered_ss, double raw_ss) noexcept {
  return !(centered_ss > 1e-14 * raw_ss) || centered_ss <= 0.0;
}

inline double mean(std::span<const double> v) {
  if (v.empty()) throw DegenerateData("mean of empty series");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Linear-interpolation percentile, q in [0, 100].
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw DegenerateData("percentile of empty set");
  if (q < 0.0 || q > 100.0) throw InvalidParameters("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline double median(std::vector<double> values) { return percentile(std::move(values), 50.0); }

/// Sample standard deviation (n - 1 denominator).
inline double sample_std(std::span<const double> v) {
  if (v.size() < 2) throw DegenerateData("sample std needs at least 2 values");
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct TTest {
  double mean = 0.0;
  double t = 0.0;
  double p_two_sided = 1.0;
  double p_greater = 0.5;  // H1: mean > mu0
  std::size_t df = 0;
};

/// One-sample Student t test of mean == mu0.
inline TTest one_sample_t_test(std::span<const double> v, double mu0 = 0.0) {
  TTest r;
  r.mean = mean(v);
  const double sd = sample_std(v);
  r.df = v.size() - 1;
  if (!(sd > 0.0)) {
    r.t = r.mean == mu0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.mean - mu0);
    r.p_two_sided = r.mean == mu0 ? 1.0 : 0.0;
    r.p_greater = r.mean > mu0 ? 0.0 : 1.0;
    return r;
  }
  r.t = (r.mean - mu0) / (sd / std::sqrt(static_cast<double>(v.size())));
  const boost::math::students_t dist(static_cast<double>(r.df));
  r.p_greater = boost::math::cdf(boost::math::complement(dist, r.t));
  r.p_two_sided = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

}  // namespace ftsbench
