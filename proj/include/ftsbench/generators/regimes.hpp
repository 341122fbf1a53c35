#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/stats.hpp"
#include "ftsbench/core/matrix.hpp"
#include "ftsbench/generators/correlation.hpp"

namespace ftsbench::generators {

struct RegimeConfig {
  std::size_t window = 20;
  double percentile = 80.0;
  BlockCorrelationSpec low;
  BlockCorrelationSpec high;

  void validate() const {
    if (window < 2) throw InvalidParameters("regimes: rolling window must be >= 2");
    if (!(percentile >= 0.0 && percentile <= 100.0))
      throw InvalidParameters("regimes: percentile must be in [0, 100]");
    low.validate();
    high.validate();
  }
};

/// Causal regime switch. The volatility measure is the cross-sectional mean of per-instrument
/// rolling standard deviations. Its percentile over the burn-in fixes the threshold once; after
/// the burn-in, the high regime applies to the next step whenever the measure exceeds it.
/// Percentile 0 means always high after burn-in, 100 means never.
class RegimeTracker {
 public:
  RegimeTracker(const RegimeConfig& cfg, std::size_t instruments, std::size_t burn_in)
      : cfg_(cfg), n_(instruments), burn_in_(burn_in) {
    if (burn_in < cfg.window)
      throw InvalidParameters("regimes: burn-in (" + std::to_string(burn_in) +
                              ") shorter than rolling window (" + std::to_string(cfg.window) + ")");
  }

  /// Label governing the shocks of the next step (0 = low, 1 = high).
  int label() const noexcept { return label_; }
  double threshold() const noexcept { return threshold_; }

  void observe(std::span<const double> row) {
    history_.emplace_back(row.begin(), row.end());
    if (history_.size() > cfg_.window) history_.pop_front();
    ++seen_;
    const bool full = history_.size() == cfg_.window;
    const double measure = full ? volatility_measure() : 0.0;
    if (seen_ <= burn_in_) {
      if (full) burn_measures_.push_back(measure);
      if (seen_ == burn_in_) threshold_ = percentile(burn_measures_, cfg_.percentile);
      label_ = 0;
      if (seen_ < burn_in_) return;
    }
    if (cfg_.percentile <= 0.0) {
      label_ = 1;
    } else if (cfg_.percentile >= 100.0) {
      label_ = 0;
    } else {
      label_ = measure > threshold_ ? 1 : 0;
    }
  }

 private:
  double volatility_measure() const {
    const double w = static_cast<double>(history_.size());
    double total = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      double mean = 0.0;
      for (const auto& r : history_) mean += r[i];
      mean /= w;
      double ss = 0.0;
      for (const auto& r : history_) ss += (r[i] - mean) * (r[i] - mean);
      total += std::sqrt(ss / (w - 1.0));
    }
    return total / static_cast<double>(n_);
  }

  RegimeConfig cfg_;
  std::size_t n_;
  std::size_t burn_in_;
  std::deque<std::vector<double>> history_;
  std::vector<double> burn_measures_;
  std::size_t seen_ = 0;
  double threshold_ = 0.0;
  int label_ = 0;
};

struct RegimeSeries {
  std::vector<int> labels;  // label in force at each step
  Matrix low;
  Matrix high;
  double threshold = 0.0;

  const Matrix& correlation_at(std::size_t t) const { return labels.at(t) == 1 ? high : low; }
};

/// Replays the regime rule over a realized T x N path whose first `burn_in` rows are burn-in.
inline RegimeSeries apply_regimes(const Matrix& returns, const RegimeConfig& cfg, std::size_t burn_in) {
  cfg.validate();
  RegimeTracker tracker(cfg, returns.cols(), burn_in);
  RegimeSeries out;
  out.low = cfg.low.matrix();
  out.high = cfg.high.matrix();
  out.labels.reserve(returns.rows());
  for (std::size_t t = 0; t < returns.rows(); ++t) {
    out.labels.push_back(tracker.label());
    tracker.observe(returns.row(t));
  }
  out.threshold = tracker.threshold();
  return out;
}

}  // namespace ftsbench::generators
