#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <vector>

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/matrix.hpp"
#include "ftsbench/core/random.hpp"

namespace ftsbench::generators {

/// Poisson jump counts with normally distributed log-return sizes.
struct JumpLaw {
  double intensity = 0.0;  // expected jumps per day per instrument
  double mean = 0.0;
  double std = 0.01;
};

/// The large-jump regime is drawn daily with probability
/// clamp(p_base + p_amplitude * max(0, sin(2 pi t / period)), 0, 1), and every full block of
/// `horizon` days is forced to contain at least one large-regime day.
struct JumpConfig {
  double p_base = 0.0;
  double p_amplitude = 0.15;
  double period = 63.0;
  JumpLaw normal{0.01, 0.0, 0.02};
  JumpLaw large{0.15, -0.01, 0.05};
  std::size_t horizon = 126;

  double large_probability(std::size_t t) const {
    const double s = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period);
    return std::clamp(p_base + p_amplitude * std::max(0.0, s), 0.0, 1.0);
  }

  void validate() const {
    if (normal.intensity < 0.0 || large.intensity < 0.0) throw InvalidParameters("jumps: intensities must be >= 0");
    if (!(normal.std > 0.0 && large.std > 0.0)) throw InvalidParameters("jumps: size stds must be > 0");
    if (!(period > 0.0) || horizon == 0) throw InvalidParameters("jumps: period and horizon must be > 0");
    if (p_base < 0.0 || p_base > 1.0 || p_base + p_amplitude > 1.0 || p_base + p_amplitude < 0.0)
      throw InvalidParameters("jumps: large-regime probability must stay in [0, 1]");
  }
};

struct JumpSample {
  Matrix additions;  // T x N summed jump log-returns
  Matrix counts;     // T x N jump counts
  std::vector<int> large_regime;
};

inline JumpSample sample_jumps(const JumpConfig& cfg, std::size_t steps, std::size_t instruments,
                               Engine& rng) {
  cfg.validate();
  JumpSample out{Matrix(steps, instruments), Matrix(steps, instruments),
                 std::vector<int>(steps, 0)};
  for (std::size_t start = 0; start < steps; start += cfg.horizon) {
    const std::size_t end = std::min(steps, start + cfg.horizon);
    bool any = false;
    for (std::size_t t = start; t < end; ++t) {
      out.large_regime[t] = uniform01(rng) < cfg.large_probability(t) ? 1 : 0;
      any = any || out.large_regime[t] == 1;
    }
    if (!any && end - start == cfg.horizon) {
      std::uniform_int_distribution<std::size_t> pick(start, end - 1);
      out.large_regime[pick(rng)] = 1;
    }
  }
  std::normal_distribution<double> nd(0.0, 1.0);
  for (std::size_t t = 0; t < steps; ++t) {
    const JumpLaw& law = out.large_regime[t] ? cfg.large : cfg.normal;
    if (law.intensity <= 0.0) continue;
    std::poisson_distribution<int> pois(law.intensity);
    for (std::size_t i = 0; i < instruments; ++i) {
      const int k = pois(rng);
      double total = 0.0;
      for (int j = 0; j < k; ++j) total += law.mean + law.std * nd(rng);
      out.counts(t, i) = k;
      out.additions(t, i) = total;
    }
  }
  return out;
}

}  // namespace ftsbench::generators
