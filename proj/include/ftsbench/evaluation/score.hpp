#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <string>
#include <vector>

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/matrix.hpp"
#include "ftsbench/core/parallel.hpp"
#include "ftsbench/core/random.hpp"
#include "ftsbench/evaluation/correlation.hpp"
#include "ftsbench/evaluation/emd.hpp"
#include "ftsbench/evaluation/metric_table.hpp"
#include "ftsbench/evaluation/moments.hpp"
#include "ftsbench/evaluation/sampler.hpp"
#include "ftsbench/generators/dataset.hpp"

namespace ftsbench::evaluation {

struct ScoreConfig {
  std::size_t condition = generators::kConditionLength;
  std::size_t horizon = generators::kTargetLength;
  std::size_t batch = 100;
  std::size_t stride = 1;
  std::size_t max_windows = 0;     // 0: every window
  std::size_t rolling_window = 0;  // 0: a third of the horizon
  /// Mean and Std values are multiplied by this before the EMD (percent returns by default).
  double return_scale = 100.0;
  double failure_tolerance = 0.01;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  void validate() const {
    if (condition == 0 || horizon < 4) throw InvalidParameters("score: condition > 0 and horizon >= 4 required");
    if (batch == 0 || stride == 0) throw InvalidParameters("score: batch and stride must be positive");
    if (!(return_scale > 0.0)) throw InvalidParameters("score: return_scale must be positive");
  }
};

/// Pooled lag-1 autocorrelation of a set of series, each centered on the pooled mean.
class PooledAutocorr {
 public:
  void add(std::span<const double> x) {
    if (x.size() < 2) return;
    for (std::size_t t = 0; t < x.size(); ++t) {
      s1_ += x[t];
      s2_ += x[t] * x[t];
      if (t + 1 < x.size()) {
        sxy_ += x[t] * x[t + 1];
        head_ += x[t];
        tail_ += x[t + 1];
      }
    }
    n_ += static_cast<double>(x.size());
    pairs_ += static_cast<double>(x.size() - 1);
  }

  void merge(const PooledAutocorr& o) {
    s1_ += o.s1_;
    s2_ += o.s2_;
    sxy_ += o.sxy_;
    head_ += o.head_;
    tail_ += o.tail_;
    n_ += o.n_;
    pairs_ += o.pairs_;
  }

  double value() const {
    if (pairs_ == 0.0) return std::numeric_limits<double>::quiet_NaN();
    const double mu = s1_ / n_;
    const double var = s2_ / n_ - mu * mu;
    if (!(var > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double cov = (sxy_ - mu * (head_ + tail_)) / pairs_ + mu * mu;
    return cov / var;
  }

 private:
  double s1_ = 0.0, s2_ = 0.0, sxy_ = 0.0, head_ = 0.0, tail_ = 0.0, n_ = 0.0, pairs_ = 0.0;
};

struct ScoreResult {
  std::array<double, kMeasures.size()> emd{};
  std::size_t windows = 0;
  std::size_t failures = 0;
  bool flagged = false;  // failure share above tolerance
  std::string first_failure;
  std::size_t degenerate_real = 0;       // series or windows skipped for shape/correlation measures
  std::size_t degenerate_generated = 0;
  std::array<std::size_t, kMeasures.size()> real_pool{};
  std::array<std::size_t, kMeasures.size()> generated_pool{};
  double real_sq_autocorr = std::numeric_limits<double>::quiet_NaN();
  double generated_sq_autocorr = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

using Pools = std::array<std::vector<double>, kMeasures.size()>;

struct WindowSample {
  Pools real, generated;
  PooledAutocorr real_ac, generated_ac;
  std::size_t degenerate_real = 0, degenerate_generated = 0;
  bool failed = false;
  std::string failure;
};

inline void add_stats(Pools& pools, std::size_t base, std::span<const double> x, double scale, std::size_t& degenerate) {
  const SeriesStats s = series_stats(x);
  pools[base + Mean].push_back(scale * s.m.mean);
  pools[base + Std].push_back(scale * s.m.std);
  if (s.shape_defined) {
    pools[base + Skew].push_back(s.m.skew);
    pools[base + Kurt].push_back(s.m.kurt);
  } else {
    ++degenerate;
  }
}

inline void add_correlations(std::vector<double>& pool, const Matrix& window, std::size_t& degenerate) {
  try {
    const auto c = correlation_values(window);
    pool.insert(pool.end(), c.begin(), c.end());
  } catch (const DegenerateData&) {
    ++degenerate;
  }
}

inline Matrix column_range(const Matrix& m, std::size_t start, std::size_t len) {
  Matrix out(m.rows(), len);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t k = 0; k < len; ++k) out(i, k) = m(i, start + k);
  return out;
}

/// Adds the full and rolling measures of one N x horizon path.
inline void add_path(Pools& pools, PooledAutocorr& ac, const Matrix& path, std::size_t rolling, double scale,
                     std::size_t& degenerate) {
  const std::size_t n = path.rows(), h = path.cols();
  std::vector<double> sq(h);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = path.row(i);
    add_stats(pools, 0, row, scale, degenerate);
    for (std::size_t s = 0; s + rolling <= h; ++s) add_stats(pools, CorrR - Corr, row.subspan(s, rolling), scale, degenerate);
    for (std::size_t t = 0; t < h; ++t) sq[t] = row[t] * row[t];
    ac.add(sq);
  }
  if (n >= 2) {
    add_correlations(pools[Corr], path, degenerate);
    for (std::size_t s = 0; s + rolling <= h; ++s)
      add_correlations(pools[CorrR], column_range(path, s, rolling), degenerate);
  }
}

}  // namespace detail

/// Scores a conditional sampler against the realized continuations of a T x N panel. Each
/// measure pools per-instrument values (or pairwise correlations) over all windows, separately
/// for real and generated paths, and reports the EMD between the two pools.
inline ScoreResult score_model(const Matrix& returns, const Sampler& sampler, const ScoreConfig& cfg) {
  cfg.validate();
  const std::size_t total = generators::window_count(returns.rows(), cfg.condition, cfg.horizon);
  if (total == 0) throw DegenerateData("score: panel too short for one conditioning window");
  std::size_t count = (total + cfg.stride - 1) / cfg.stride;
  if (cfg.max_windows > 0) count = std::min(count, cfg.max_windows);
  const std::size_t rolling = cfg.rolling_window ? cfg.rolling_window : rolling_window_length(cfg.horizon);
  if (rolling < 3 || rolling > cfg.horizon) throw InvalidParameters("score: rolling window must lie in [3, horizon]");

  std::vector<detail::WindowSample> samples(count);
  parallel_for(count, cfg.jobs, [&](std::size_t k) {
    detail::WindowSample& w = samples[k];
    const std::size_t start = k * cfg.stride;
    const Matrix condition = generators::window_of(returns, start, cfg.condition);
    const Matrix target = generators::window_of(returns, start + cfg.condition, cfg.horizon);
    detail::add_path(w.real, w.real_ac, target, rolling, cfg.return_scale, w.degenerate_real);
    std::vector<Matrix> paths;
    try {
      paths = sampler(condition, cfg.batch, derive_seed(cfg.seed, "window", start));
      if (paths.size() != cfg.batch) throw DimensionError("sampler returned " + std::to_string(paths.size()) + " paths");
      for (const auto& p : paths) {
        if (p.rows() != returns.cols() || p.cols() != cfg.horizon) throw DimensionError("sampler path has wrong shape");
        if (!p.all_finite()) throw NonFiniteError("sampler path is not finite");
      }
    } catch (const std::exception& e) {
      w.failed = true;
      w.failure = "window " + std::to_string(start) + ": " + e.what();
      return;
    }
    for (const auto& p : paths) detail::add_path(w.generated, w.generated_ac, p, rolling, cfg.return_scale, w.degenerate_generated);
  });

  ScoreResult out;
  out.windows = count;
  detail::Pools real, generated;
  PooledAutocorr real_ac, generated_ac;
  for (auto& w : samples) {
    if (w.failed) {
      if (out.failures++ == 0) out.first_failure = w.failure;
      continue;
    }
    for (std::size_t i = 0; i < kMeasures.size(); ++i) {
      real[i].insert(real[i].end(), w.real[i].begin(), w.real[i].end());
      generated[i].insert(generated[i].end(), w.generated[i].begin(), w.generated[i].end());
    }
    real_ac.merge(w.real_ac);
    generated_ac.merge(w.generated_ac);
    out.degenerate_real += w.degenerate_real;
    out.degenerate_generated += w.degenerate_generated;
  }
  out.flagged = static_cast<double>(out.failures) > cfg.failure_tolerance * static_cast<double>(count);
  for (std::size_t i = 0; i < kMeasures.size(); ++i) {
    out.real_pool[i] = real[i].size();
    out.generated_pool[i] = generated[i].size();
    out.emd[i] = real[i].empty() || generated[i].empty() ? std::numeric_limits<double>::quiet_NaN()
                                                          : emd1d_squared(real[i], generated[i]);
  }
  out.real_sq_autocorr = real_ac.value();
  out.generated_sq_autocorr = generated_ac.value();
  return out;
}

/// Writes a score into a metric table column; flagged columns are left missing.
inline void record(MetricTable& table, const std::string& model, const ScoreResult& r) {
  std::size_t j;
  try {
    j = table.model_index(model);
  } catch (const InvalidParameters&) {
    j = table.add_model(model);
  }
  for (std::size_t i = 0; i < kMeasures.size(); ++i) table.set(i, j, r.flagged ? std::numeric_limits<double>::quiet_NaN() : r.emd[i]);
}

}  // namespace ftsbench::evaluation
