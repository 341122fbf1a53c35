#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/matrix.hpp"
#include "ftsbench/core/stats.hpp"
#include "ftsbench/core/tape.hpp"

namespace ftsbench::dgm {

/// Gaussian kernels exp(-d^2 / (base * m)) for each multiplier m.
struct MmdSpec {
  double base = 1.0;
  std::vector<double> multipliers{0.5, 1.0, 2.0, 4.0, 8.0};

  void validate() const {
    if (!(base > 0.0) || !std::isfinite(base)) throw InvalidParameters("mmd: base bandwidth must be positive");
    if (multipliers.empty()) throw InvalidParameters("mmd: no bandwidth multipliers");
    for (double m : multipliers)
      if (!(m > 0.0)) throw InvalidParameters("mmd: multipliers must be positive");
  }
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

/// Median squared Euclidean distance over all unordered pairs of rows of x and y pooled.
inline double median_bandwidth(const Matrix& x, const Matrix& y) {
  if (x.cols() != y.cols() && !x.empty() && !y.empty()) throw DimensionError("median bandwidth: dimension mismatch");
  const std::size_t n = x.rows() + y.rows();
  if (n < 2) throw DegenerateData("median bandwidth: need at least two samples");
  auto row = [&](std::size_t i) { return i < x.rows() ? x.row(i) : y.row(i - x.rows()); };
  std::vector<double> d;
  d.reserve(n * (n - 1) / 2);
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) d.push_back(squared_distance(row(i), row(j)));
  const double med = median(std::move(d));
  if (!(med > 0.0)) throw DegenerateData("zero bandwidth");
  return med;
}

inline double median_bandwidth(const Matrix& pooled) { return median_bandwidth(pooled, Matrix(0, pooled.cols())); }

/// Biased (V-statistic) MMD^2 summed over the bandwidth multipliers.
inline double mmd_squared(const Matrix& x, const Matrix& y, const MmdSpec& spec) {
  spec.validate();
  if (x.empty() || y.empty()) throw DegenerateData("mmd: empty sample set");
  if (x.cols() != y.cols()) throw DimensionError("mmd: dimension mismatch");
  auto block = [&](const Matrix& a, const Matrix& b) {
    std::vector<double> d(a.rows() * b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < b.rows(); ++j) d[i * b.rows() + j] = squared_distance(a.row(i), b.row(j));
    return d;
  };
  const auto dxx = block(x, x), dyy = block(y, y), dxy = block(x, y);
  auto mean_kernel = [](const std::vector<double>& d, double bw) {
    double s = 0.0;
    for (double v : d) s += std::exp(-v / bw);
    return s / static_cast<double>(d.size());
  };
  double total = 0.0;
  for (double m : spec.multipliers) {
    const double bw = spec.base * m;
    total += mean_kernel(dxx, bw) + mean_kernel(dyy, bw) - 2.0 * mean_kernel(dxy, bw);
  }
  return total;
}

/// Tape version of mmd_squared; the bandwidth is a constant.
inline NodeId record_mmd(Tape& tape, NodeId x, NodeId y, const MmdSpec& spec) {
  spec.validate();
  const NodeId dxx = tape.sqdist(x, x), dyy = tape.sqdist(y, y), dxy = tape.sqdist(x, y);
  NodeId total = 0;
  bool first = true;
  for (double m : spec.multipliers) {
    const double c = -1.0 / (spec.base * m);
    const NodeId kxx = tape.mean(tape.exp(tape.scale(dxx, c)));
    const NodeId kyy = tape.mean(tape.exp(tape.scale(dyy, c)));
    const NodeId kxy = tape.mean(tape.exp(tape.scale(dxy, c)));
    const NodeId term = tape.sub(tape.add(kxx, kyy), tape.scale(kxy, 2.0));
    total = first ? term : tape.add(total, term);
    first = false;
  }
  return total;
}

/// Multipliers for the three loss channels.
struct GmmnLossSpec {
  std::vector<double> multipliers{0.5, 1.0, 2.0, 4.0, 8.0};
  double returns_weight = 1.0;
  double abs_weight = 1.0;
  double corr_weight = 1.0;
  /// Base bandwidths for the returns, absolute-return and correlation channels; 0 selects the
  /// median heuristic on each batch.
  std::array<double, 3> fixed_bandwidth{0.0, 0.0, 0.0};
};

struct GmmnLoss {
  NodeId total = 0;
  double returns_term = 0.0;
  double abs_term = 0.0;
  double corr_term = 0.0;
  std::size_t skipped_real = 0;       // windows without a correlation vector
  std::size_t skipped_generated = 0;
};

namespace detail {

inline Matrix rows_except(const Matrix& m, const std::vector<std::size_t>& skip, std::vector<std::size_t>& kept) {
  kept.clear();
  std::size_t s = 0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (s < skip.size() && skip[s] == r) {
      ++s;
      continue;
    }
    kept.push_back(r);
  }
  Matrix out(kept.size(), m.cols());
  for (std::size_t k = 0; k < kept.size(); ++k)
    for (std::size_t c = 0; c < m.cols(); ++c) out(k, c) = m(kept[k], c);
  return out;
}

}  // namespace detail

/// MMD^2 of one-step return vectors (averaged over the horizon steps), of their absolute values,
/// and of the lower-triangle correlation vector of each window. `real` and `generated` are
/// B x steps*N, time-major. Windows with a constant instrument drop out of the correlation term.
/// Each MMD uses the median bandwidth of its own pooled samples.
inline GmmnLoss record_gmmn_loss(Tape& tape, NodeId real, NodeId generated, std::size_t n, std::size_t steps,
                                 const GmmnLossSpec& spec) {
  if (tape.value(real).cols() != n * steps || tape.value(generated).cols() != n * steps)
    throw DimensionError("gmmn loss: batch width must be steps * N");
  GmmnLoss out;
  auto channel = [&](NodeId a, NodeId b, std::size_t which) {
    const double fixed = spec.fixed_bandwidth[which];
    const MmdSpec s{fixed > 0.0 ? fixed : median_bandwidth(tape.value(a), tape.value(b)), spec.multipliers};
    return record_mmd(tape, a, b, s);
  };
  const NodeId real_abs = tape.abs(real), gen_abs = tape.abs(generated);
  NodeId ret = 0, abs_term = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    const NodeId r = channel(tape.slice_cols(real, t * n, n), tape.slice_cols(generated, t * n, n), 0);
    const NodeId a = channel(tape.slice_cols(real_abs, t * n, n), tape.slice_cols(gen_abs, t * n, n), 1);
    ret = t == 0 ? r : tape.add(ret, r);
    abs_term = t == 0 ? a : tape.add(abs_term, a);
  }
  ret = tape.scale(ret, spec.returns_weight / static_cast<double>(steps));
  abs_term = tape.scale(abs_term, spec.abs_weight / static_cast<double>(steps));
  out.returns_term = tape.value(ret)(0, 0);
  out.abs_term = tape.value(abs_term)(0, 0);
  out.total = tape.add(ret, abs_term);
  if (n >= 2 && steps >= 2) {
    const NodeId rc = tape.lower_corr(real, n, steps), gc = tape.lower_corr(generated, n, steps);
    out.skipped_real = tape.degenerate_rows(rc).size();
    out.skipped_generated = tape.degenerate_rows(gc).size();
    std::vector<std::size_t> kr, kg;
    detail::rows_except(tape.value(rc), tape.degenerate_rows(rc), kr);
    detail::rows_except(tape.value(gc), tape.degenerate_rows(gc), kg);
    if (!kr.empty() && !kg.empty() && kr.size() + kg.size() >= 2) {
      const NodeId rs = tape.select_rows(rc, kr), gs = tape.select_rows(gc, kg);
      try {
        const NodeId c = tape.scale(channel(rs, gs, 2), spec.corr_weight);
        out.corr_term = tape.value(c)(0, 0);
        out.total = tape.add(out.total, c);
      } catch (const DegenerateData&) {
        // All correlation vectors coincide: nothing to match.
      }
    }
  }
  return out;
}

/// Value-only loss for two aligned batches of N x steps windows.
inline double gmmn_loss(const std::vector<Matrix>& real, const std::vector<Matrix>& generated,
                        const GmmnLossSpec& spec = {}, GmmnLoss* parts = nullptr) {
  if (real.empty() || generated.empty()) throw DegenerateData("gmmn loss: empty batch");
  const std::size_t n = real[0].rows(), steps = real[0].cols();
  auto pack = [&](const std::vector<Matrix>& b) {
    Matrix m(b.size(), n * steps);
    for (std::size_t k = 0; k < b.size(); ++k) {
      if (b[k].rows() != n || b[k].cols() != steps) throw DimensionError("gmmn loss: window shape mismatch");
      for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t i = 0; i < n; ++i) m(k, t * n + i) = b[k](i, t);
    }
    return m;
  };
  Tape tape;
  const GmmnLoss l = record_gmmn_loss(tape, tape.leaf(pack(real)), tape.leaf(pack(generated)), n, steps, spec);
  if (parts) *parts = l;
  return tape.value(l.total)(0, 0);
}

}  // namespace ftsbench::dgm
