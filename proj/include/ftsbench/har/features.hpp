#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/matrix.hpp"
#include "ftsbench/evaluation/correlation.hpp"

namespace ftsbench::har {

inline constexpr double kTradingDays = 252.0;
inline constexpr std::size_t kDaily = 1, kWeekly = 5, kMonthly = 22;

/// Abs: mean of |r|*sqrt(252) over the horizon. Squared: sqrt(252 * mean r^2).
enum class RvProxy { Abs, Squared };

inline RvProxy parse_proxy(const std::string& s) {
  if (s == "abs") return RvProxy::Abs;
  if (s == "squared") return RvProxy::Squared;
  throw ConfigError("unknown rv proxy '" + s + "' (expected abs or squared)");
}

inline std::string to_string(RvProxy p) { return p == RvProxy::Abs ? "abs" : "squared"; }

/// Annualized realized-volatility proxy of a run of returns.
inline double rv_proxy(std::span<const double> r, RvProxy proxy) {
  if (r.empty()) return 0.0;
  double s = 0.0;
  for (double v : r) s += proxy == RvProxy::Abs ? std::abs(v) : v * v;
  s /= static_cast<double>(r.size());
  return proxy == RvProxy::Abs ? s * std::sqrt(kTradingDays) : std::sqrt(kTradingDays * s);
}

struct RvTriple {
  double d = 0.0, w = 0.0, m = 0.0;
};

/// Features as of `t` observations: the daily, weekly and monthly proxies over the last 1, 5
/// and 22 returns r[t-22 .. t-1].
inline RvTriple rv_features(std::span<const double> returns, std::size_t t, RvProxy proxy = RvProxy::Abs) {
  if (t < kMonthly) throw DegenerateData("rv features: need 22 returns of history, got " + std::to_string(t));
  if (t > returns.size()) throw DimensionError("rv features: t beyond the series");
  auto tail = [&](std::size_t k) { return returns.subspan(t - k, k); };
  return {rv_proxy(tail(kDaily), proxy), rv_proxy(tail(kWeekly), proxy), rv_proxy(tail(kMonthly), proxy)};
}

/// Correlation-network feature. Instruments i != j are linked when their correlation over the
/// N x c window is strictly above `threshold`; the feature is the mean (or, unnormalized, the
/// sum) of the neighbours' rv, 0 for isolated instruments.
inline std::vector<double> network_feature(std::span<const double> rv, const Matrix& window, double threshold,
                                           bool normalized = true) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidParameters("network feature: threshold must be in (0, 1)");
  if (rv.size() != window.rows()) throw DimensionError("network feature: rv length differs from instrument count");
  const Matrix c = evaluation::correlation_matrix(window);
  const std::size_t n = rv.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    std::size_t deg = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !(c(i, j) > threshold)) continue;
      s += rv[j];
      ++deg;
    }
    if (deg > 0) out[i] = normalized ? s / static_cast<double>(deg) : s;
  }
  return out;
}

/// Expected future proxies per instrument: each N x h path contributes its first 1, 5 and 22
/// steps; results are averaged over the batch. An empty batch gives zeros.
inline std::vector<RvTriple> generative_features(std::span<const Matrix> batch, std::size_t instruments,
                                                 RvProxy proxy = RvProxy::Abs) {
  std::vector<RvTriple> out(instruments);
  if (batch.empty()) return out;
  for (const Matrix& p : batch) {
    if (p.rows() != instruments || p.cols() < kMonthly)
      throw DimensionError("generative features: paths must be N x (>= 22)");
    for (std::size_t i = 0; i < instruments; ++i) {
      const auto row = p.row(i);
      out[i].d += rv_proxy(row.first(kDaily), proxy);
      out[i].w += rv_proxy(row.first(kWeekly), proxy);
      out[i].m += rv_proxy(row.first(kMonthly), proxy);
    }
  }
  const double b = static_cast<double>(batch.size());
  for (auto& f : out) {
    f.d /= b;
    f.w /= b;
    f.m /= b;
  }
  return out;
}

}  // namespace ftsbench::har
