#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/matrix.hpp"
#include "ftsbench/core/parallel.hpp"
#include "ftsbench/core/random.hpp"
#include "ftsbench/core/stats.hpp"
#include "ftsbench/evaluation/correlation.hpp"
#include "ftsbench/evaluation/sampler.hpp"
#include "ftsbench/generators/dataset.hpp"
#include "ftsbench/generators/panel_io.hpp"

namespace ftsbench::evaluation {

/// Undirected graph over N instruments built from thresholded correlations.
struct CorrelationNetwork {
  std::size_t n = 0;
  std::vector<char> adjacency;  // N x N, symmetric, zero diagonal
  double percentile = 0.0;
  std::size_t window = 0;
  std::size_t bootstrap = 0;
  std::size_t resamples_used = 0;

  bool edge(std::size_t i, std::size_t j) const { return adjacency.at(i * n + j) != 0; }

  void set_edge(std::size_t i, std::size_t j, bool on) {
    if (i == j) throw InvalidParameters("network: self loops are not allowed");
    adjacency.at(i * n + j) = adjacency.at(j * n + i) = on ? 1 : 0;
  }

  std::size_t edge_count() const {
    std::size_t c = 0;
    for (std::size_t i = 1; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) c += edge(i, j);
    return c;
  }

  static CorrelationNetwork empty(std::size_t n) {
    CorrelationNetwork g;
    g.n = n;
    g.adjacency.assign(n * n, 0);
    return g;
  }
};

/// Edges of a lower-triangle value vector at or above its own q-th percentile.
inline CorrelationNetwork threshold_values(const std::vector<double>& lower, std::size_t n, double q) {
  CorrelationNetwork g = CorrelationNetwork::empty(n);
  g.percentile = q;
  if (lower.empty()) return g;
  const double threshold = percentile(lower, q) - 1e-12;
  std::size_t p = 0;
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j, ++p)
      if (lower[p] >= threshold) g.set_edge(i, j, true);
  return g;
}

/// Median over bootstrap resamples (time indices drawn with replacement) of each pairwise
/// correlation of an N x T window. Degenerate resamples are skipped; at most 3B draws are made.
struct BootstrapCorrelation {
  std::vector<double> median;
  std::size_t used = 0;
};

inline BootstrapCorrelation bootstrap_correlations(const Matrix& window, std::size_t b, Engine& rng) {
  if (b == 0) throw InvalidParameters("bootstrap: B must be at least 1");
  const std::size_t n = window.rows(), t = window.cols();
  if (n < 2) throw InvalidParameters("bootstrap: need at least two instruments");
  const std::size_t pairs = n * (n - 1) / 2;
  std::vector<std::vector<double>> draws(pairs);
  std::uniform_int_distribution<std::size_t> pick(0, t - 1);
  Matrix resample(n, t);
  std::size_t used = 0;
  for (std::size_t attempt = 0; attempt < 3 * b && used < b; ++attempt) {
    for (std::size_t k = 0; k < t; ++k) {
      const std::size_t s = pick(rng);
      for (std::size_t i = 0; i < n; ++i) resample(i, k) = window(i, s);
    }
    std::vector<double> c;
    try {
      c = correlation_values(resample);
    } catch (const DegenerateData&) {
      continue;
    }
    for (std::size_t p = 0; p < pairs; ++p) draws[p].push_back(c[p]);
    ++used;
  }
  if (used == 0) throw DegenerateData("bootstrap: every resample was degenerate");
  BootstrapCorrelation out;
  out.used = used;
  out.median.reserve(pairs);
  for (auto& d : draws) out.median.push_back(median(std::move(d)));
  return out;
}

/// Edge (i, j) iff the median bootstrap correlation reaches the q-th percentile of the median
/// bootstrap correlations of the window.
inline CorrelationNetwork bootstrap_network(const Matrix& window, double q, std::size_t b, Engine& rng) {
  const BootstrapCorrelation bc = bootstrap_correlations(window, b, rng);
  CorrelationNetwork g = threshold_values(bc.median, window.rows(), q);
  g.window = window.cols();
  g.bootstrap = b;
  g.resamples_used = bc.used;
  return g;
}

/// Networks for several percentiles that share one set of bootstrap medians.
inline std::vector<CorrelationNetwork> bootstrap_networks(const Matrix& window, const std::vector<double>& qs,
                                                          std::size_t b, Engine& rng) {
  const BootstrapCorrelation bc = bootstrap_correlations(window, b, rng);
  std::vector<CorrelationNetwork> out;
  for (double q : qs) {
    out.push_back(threshold_values(bc.median, window.rows(), q));
    out.back().window = window.cols();
    out.back().bootstrap = b;
    out.back().resamples_used = bc.used;
  }
  return out;
}

/// Intersection over union of edge sets; two empty graphs score 1.
inline double jaccard(const CorrelationNetwork& a, const CorrelationNetwork& b) {
  if (a.n != b.n) throw DimensionError("jaccard: networks have different sizes");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 1; i < a.n; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const bool x = a.edge(i, j), y = b.edge(i, j);
      inter += x && y;
      uni += x || y;
    }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct JaccardConfig {
  std::vector<double> percentiles{50, 60, 70, 80, 90, 95};
  std::size_t bootstrap = 100;
  std::size_t batch = 10;
  std::size_t condition = generators::kConditionLength;
  std::size_t horizon = generators::kTargetLength;
  std::size_t stride = 1;
  std::size_t max_days = 0;  // 0: every day
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

struct JaccardCurve {
  std::vector<double> percentiles;
  std::vector<double> past;       // past vs future
  std::vector<double> generated;  // generated vs future, averaged over the batch
  std::size_t days = 0;
};

/// For each day, compares the networks of the condition window (past), the realized next
/// window (future) and each generated path with the future network. All networks of a day use
/// the same bootstrap index stream, so a sampler replaying the future scores exactly 1.
inline JaccardCurve jaccard_curve(const Matrix& returns, const Sampler& sampler, const JaccardConfig& cfg) {
  if (cfg.percentiles.empty()) throw InvalidParameters("jaccard curve: empty percentile grid");
  if (cfg.batch == 0 || cfg.stride == 0) throw InvalidParameters("jaccard curve: batch and stride must be positive");
  if (cfg.condition != cfg.horizon)
    throw InvalidParameters("jaccard curve: past and future windows must have equal length");
  const std::size_t total = generators::window_count(returns.rows(), cfg.condition, cfg.horizon);
  if (total == 0) throw DegenerateData("jaccard curve: panel too short for past and future windows");
  std::size_t days = (total + cfg.stride - 1) / cfg.stride;
  if (cfg.max_days > 0) days = std::min(days, cfg.max_days);
  const std::size_t np = cfg.percentiles.size();

  std::vector<std::vector<double>> past(days, std::vector<double>(np)), gen(days, std::vector<double>(np));
  parallel_for(days, cfg.jobs, [&](std::size_t d) {
    const std::size_t start = d * cfg.stride;
    const std::uint64_t boot_seed = derive_seed(cfg.seed, "bootstrap", start);
    auto networks = [&](const Matrix& w) {
      Engine rng(boot_seed);
      return bootstrap_networks(w, cfg.percentiles, cfg.bootstrap, rng);
    };
    const Matrix condition = generators::window_of(returns, start, cfg.condition);
    const auto past_net = networks(condition);
    const auto future_net = networks(generators::window_of(returns, start + cfg.condition, cfg.horizon));
    const auto paths = sampler(condition, cfg.batch, derive_seed(cfg.seed, "jaccard-window", start));
    if (paths.size() != cfg.batch) throw DimensionError("jaccard curve: sampler returned the wrong batch size");
    for (std::size_t q = 0; q < np; ++q) past[d][q] = jaccard(past_net[q], future_net[q]);
    for (const auto& p : paths) {
      const auto g = networks(p);
      for (std::size_t q = 0; q < np; ++q) gen[d][q] += jaccard(g[q], future_net[q]);
    }
  });

  JaccardCurve out;
  out.percentiles = cfg.percentiles;
  out.days = days;
  out.past.assign(np, 0.0);
  out.generated.assign(np, 0.0);
  for (std::size_t d = 0; d < days; ++d)
    for (std::size_t q = 0; q < np; ++q) {
      out.past[q] += past[d][q];
      out.generated[q] += gen[d][q] / static_cast<double>(cfg.batch);
    }
  for (std::size_t q = 0; q < np; ++q) {
    out.past[q] /= static_cast<double>(days);
    out.generated[q] /= static_cast<double>(days);
  }
  return out;
}

/// Rows of (percentile, past, one column per model curve).
inline std::string jaccard_csv(const std::vector<std::string>& models, const std::vector<JaccardCurve>& curves) {
  if (models.size() != curves.size() || curves.empty()) throw InvalidParameters("jaccard csv: need one curve per model");
  std::string out = "percentile,past";
  for (const auto& m : models) out += "," + m;
  out += "\n";
  for (std::size_t q = 0; q < curves[0].percentiles.size(); ++q) {
    out += generators::format_real(curves[0].percentiles[q]) + "," + generators::format_real(curves[0].past[q]);
    for (const auto& c : curves) out += "," + generators::format_real(c.generated.at(q));
    out += "\n";
  }
  return out;
}

}  // namespace ftsbench::evaluation
