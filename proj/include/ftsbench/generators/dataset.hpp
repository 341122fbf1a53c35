#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/hash.hpp"
#include "ftsbench/core/matrix.hpp"
#include "ftsbench/core/random.hpp"
#include "ftsbench/generators/correlation.hpp"
#include "ftsbench/generators/jumps.hpp"
#include "ftsbench/generators/processes.hpp"
#include "ftsbench/generators/regimes.hpp"

namespace ftsbench::generators {

inline constexpr std::size_t kConditionLength = 40;
inline constexpr std::size_t kTargetLength = 40;

enum class ModelFamily { NGarch, Heston, Fsv };

/// Per-instrument parameters (a single entry is broadcast to every instrument).
using SegmentParams =
    std::variant<std::vector<NGarchParams>, std::vector<HestonParams>, FsvForwardParams>;

struct Segment {
  std::size_t length = 500;
  SegmentParams params;
};

struct GeneratorSpec {
  ModelFamily family = ModelFamily::NGarch;
  std::size_t instruments = 5;
  std::vector<Segment> segments;
  BlockCorrelationSpec correlation;
  std::optional<RegimeConfig> regimes;
  std::optional<JumpConfig> jumps;
  std::size_t burn_in = 500;
  std::uint64_t seed = 1;
  std::vector<std::string> ids;  // defaults to i0..i{N-1}

  std::size_t total_length() const {
    std::size_t t = 0;
    for (const auto& s : segments) t += s.length;
    return t;
  }

  std::vector<std::string> instrument_ids() const {
    if (!ids.empty()) return ids;
    std::vector<std::string> out;
    for (std::size_t i = 0; i < instruments; ++i) out.push_back("i" + std::to_string(i));
    return out;
  }

  void validate() const;
};

/// T x N log returns plus per-step auxiliary channels.
struct ReturnPanel {
  Matrix returns;    // T x N
  Matrix variance;   // T x N true conditional variance of each return
  Matrix jumps;      // T x N jump counts
  std::vector<int> regime;       // correlation regime label per step
  std::vector<int> jump_regime;  // large-jump regime indicator per step
  std::vector<std::string> ids;
  std::string spec_hash;

  std::size_t steps() const noexcept { return returns.rows(); }
  std::size_t instruments() const noexcept { return returns.cols(); }

  ReturnPanel slice(std::size_t begin, std::size_t end) const {
    ReturnPanel p;
    p.returns = returns.row_range(begin, end);
    p.variance = variance.row_range(begin, end);
    p.jumps = jumps.row_range(begin, end);
    p.regime.assign(regime.begin() + static_cast<std::ptrdiff_t>(begin),
                    regime.begin() + static_cast<std::ptrdiff_t>(end));
    p.jump_regime.assign(jump_regime.begin() + static_cast<std::ptrdiff_t>(begin),
                         jump_regime.begin() + static_cast<std::ptrdiff_t>(end));
    p.ids = ids;
    p.spec_hash = spec_hash;
    return p;
  }

  void validate() const {
    if (!returns.all_finite()) throw NonFiniteError("panel: non-finite returns");
    if (!variance.all_finite()) throw NonFiniteError("panel: non-finite variance");
    const std::size_t t = steps();
    if (variance.rows() != t || jumps.rows() != t || regime.size() != t || jump_regime.size() != t)
      throw DimensionError("panel: auxiliary channels differ in length from returns");
  }

  /// Panel with only returns populated; auxiliary channels zeroed.
  static ReturnPanel from_returns(Matrix r) {
    ReturnPanel p;
    const std::size_t t = r.rows(), n = r.cols();
    p.returns = std::move(r);
    p.variance = Matrix(t, n);
    p.jumps = Matrix(t, n);
    p.regime.assign(t, 0);
    p.jump_regime.assign(t, 0);
    for (std::size_t i = 0; i < n; ++i) p.ids.push_back("i" + std::to_string(i));
    return p;
  }
};

std::string spec_hash(const GeneratorSpec& spec);

inline void GeneratorSpec::validate() const {
  if (segments.empty()) throw InvalidParameters("generator spec: at least one segment required");
  if (instruments == 0) throw InvalidParameters("generator spec: no instruments");
  if (!ids.empty() && ids.size() != instruments) throw InvalidParameters("generator spec: ids length mismatch");
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const Segment& s = segments[k];
    if (s.length < kConditionLength)
      throw InvalidParameters("generator spec: segment " + std::to_string(k) + " shorter than " +
                              std::to_string(kConditionLength));
    auto check_count = [&](std::size_t c) {
      if (c != 1 && c != instruments)
        throw InvalidParameters("generator spec: segment " + std::to_string(k) +
                                " needs 1 or N parameter sets");
    };
    switch (family) {
      case ModelFamily::NGarch: {
        const auto* p = std::get_if<std::vector<NGarchParams>>(&s.params);
        if (!p) throw InvalidParameters("generator spec: segment family mismatch (expected ngarch)");
        check_count(p->size());
        for (const auto& q : *p) q.validate();
        break;
      }
      case ModelFamily::Heston: {
        const auto* p = std::get_if<std::vector<HestonParams>>(&s.params);
        if (!p) throw InvalidParameters("generator spec: segment family mismatch (expected heston)");
        check_count(p->size());
        for (const auto& q : *p) q.validate();
        break;
      }
      case ModelFamily::Fsv: {
        const auto* p = std::get_if<FsvForwardParams>(&s.params);
        if (!p) throw InvalidParameters("generator spec: segment family mismatch (expected fsv)");
        if (p->instruments() != instruments) throw InvalidParameters("generator spec: fsv loadings rows != N");
        p->validate();
        break;
      }
    }
  }
  if (family != ModelFamily::Fsv) {
    if (correlation.size() != instruments)
      throw InvalidParameters("generator spec: correlation blocks cover " +
                              std::to_string(correlation.size()) + " instruments, expected " +
                              std::to_string(instruments));
    correlation.validate();
  }
  if (regimes) {
    if (family == ModelFamily::Fsv) throw InvalidParameters("generator spec: regimes need ngarch or heston");
    regimes->validate();
    if (regimes->low.size() != instruments || regimes->high.size() != instruments)
      throw InvalidParameters("generator spec: regime correlation size mismatch");
    if (burn_in < regimes->window) throw InvalidParameters("generator spec: burn-in too short for regimes");
  }
  if (jumps) jumps->validate();
}

/// Whole simulated path, burn-in included.
struct FullPath {
  ReturnPanel panel;
  std::size_t burn_in = 0;
};

template <class T>
const T& param_for(const std::vector<T>& v, std::size_t i) {
  return v.size() == 1 ? v[0] : v[i];
}

/// Simulates burn-in plus every segment. The burn-in reuses the first segment's parameters and
/// process state carries across segment boundaries.
inline FullPath simulate_full(const GeneratorSpec& spec) {
  spec.validate();
  const std::size_t n = spec.instruments;
  const std::size_t burn = spec.burn_in;
  const std::size_t total = burn + spec.total_length();

  Engine price_rng = make_engine(spec.seed, "price");
  Engine variance_rng = make_engine(spec.seed, "variance");
  Engine fsv_rng = make_engine(spec.seed, "fsv");
  Engine jump_rng = make_engine(spec.seed, "jumps");

  std::optional<JumpSample> jumps;
  if (spec.jumps) jumps = sample_jumps(*spec.jumps, spec.total_length(), n, jump_rng);

  Matrix factor[2];
  if (spec.family != ModelFamily::Fsv) {
    if (spec.regimes) {
      factor[0] = cholesky(spec.regimes->low.matrix());
      factor[1] = cholesky(spec.regimes->high.matrix());
    } else {
      factor[0] = cholesky(spec.correlation.matrix());
      factor[1] = factor[0];
    }
  }
  std::optional<RegimeTracker> tracker;
  if (spec.regimes) tracker.emplace(*spec.regimes, n, burn);

  FullPath out;
  out.burn_in = burn;
  ReturnPanel& p = out.panel;
  p.returns = Matrix(total, n);
  p.variance = Matrix(total, n);
  p.jumps = Matrix(total, n);
  p.regime.assign(total, 0);
  p.jump_regime.assign(total, 0);
  p.ids = spec.instrument_ids();

  std::vector<NGarchState> ngarch_state;
  std::vector<HestonState> heston_state;
  std::optional<FsvState> fsv_state;
  const SegmentParams& first = spec.segments.front().params;
  switch (spec.family) {
    case ModelFamily::NGarch:
      for (std::size_t i = 0; i < n; ++i)
        ngarch_state.push_back(NGarchState::initial(param_for(std::get<0>(first), i)));
      break;
    case ModelFamily::Heston:
      for (std::size_t i = 0; i < n; ++i)
        heston_state.push_back(HestonState::initial(param_for(std::get<1>(first), i)));
      break;
    case ModelFamily::Fsv:
      fsv_state = FsvState::initial(std::get<2>(first), fsv_rng);
      break;
  }

  std::size_t seg = 0, seg_end = burn + spec.segments[0].length;
  std::vector<double> z(n), eta(n);
  std::normal_distribution<double> nd_price(0.0, 1.0), nd_variance(0.0, 1.0);
  for (std::size_t t = 0; t < total; ++t) {
    if (t >= burn) {
      while (t >= seg_end) {
        ++seg;
        seg_end += spec.segments[seg].length;
      }
    }
    const SegmentParams& params = spec.segments[seg].params;
    const int label = tracker ? tracker->label() : 0;
    auto ret = p.returns.row(t);
    auto var = p.variance.row(t);
    if (spec.family == ModelFamily::Fsv) {
      fsv_state->step(std::get<2>(params), fsv_rng, ret, var);
    } else {
      for (double& v : z) v = nd_price(price_rng);
      color_in_place(factor[label], z);
      if (spec.family == ModelFamily::NGarch) {
        const auto& ps = std::get<0>(params);
        for (std::size_t i = 0; i < n; ++i) {
          auto [r, v] = ngarch_state[i].step(param_for(ps, i), z[i]);
          ret[i] = r;
          var[i] = v;
        }
      } else {
        const auto& ps = std::get<1>(params);
        for (double& v : eta) v = nd_variance(variance_rng);
        for (std::size_t i = 0; i < n; ++i) {
          const HestonParams& hp = param_for(ps, i);
          auto [r, vp] = heston_state[i].step(hp, z[i], correlate_variance_shock(hp.rho, z[i], eta[i]));
          ret[i] = r;
          var[i] = vp * hp.dt;
        }
      }
    }
    if (jumps && t >= burn) {
      const std::size_t k = t - burn;
      for (std::size_t i = 0; i < n; ++i) {
        ret[i] += jumps->additions(k, i);
        p.jumps(t, i) = jumps->counts(k, i);
      }
      p.jump_regime[t] = jumps->large_regime[k];
    }
    p.regime[t] = label;
    if (tracker) tracker->observe(ret);
  }
  p.spec_hash = spec_hash(spec);
  p.validate();
  return out;
}

/// Simulates the spec and discards the burn-in. Deterministic per seed.
inline ReturnPanel build_dataset(const GeneratorSpec& spec) {
  FullPath full = simulate_full(spec);
  return full.panel.slice(full.burn_in, full.panel.steps());
}

struct DatasetSplits {
  ReturnPanel train;
  ReturnPanel validation;
  ReturnPanel test;
};

/// Contiguous chronological split. Every non-empty part must hold at least one
/// condition + target window.
inline DatasetSplits split_dataset(const ReturnPanel& panel, std::array<double, 3> fractions = {0.6, 0.2, 0.2}) {
  double sum = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw InvalidParameters("split: negative fraction");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidParameters("split: fractions must sum to 1");
  const std::size_t t = panel.steps();
  const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(t)));
  const auto n_val = static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(t)));
  if (n_train + n_val > t) throw InvalidParameters("split: rounding overflow");
  const std::size_t n_test = t - n_train - n_val;
  for (std::size_t len : {n_train, n_val, n_test})
    if (len > 0 && len < kConditionLength + kTargetLength)
      throw DegenerateData("split: panel too short for conditioning windows (part of length " +
                           std::to_string(len) + ")");
  return {panel.slice(0, n_train), panel.slice(n_train, n_train + n_val),
          panel.slice(n_train + n_val, t)};
}

/// Rows [start, start + length) of a T x N panel as an N x length window.
inline Matrix window_of(const Matrix& returns, std::size_t start, std::size_t length) {
  if (start + length > returns.rows()) throw DimensionError("window out of range");
  Matrix w(returns.cols(), length);
  for (std::size_t t = 0; t < length; ++t)
    for (std::size_t i = 0; i < returns.cols(); ++i) w(i, t) = returns(start + t, i);
  return w;
}

struct WindowPair {
  Matrix condition;  // N x condition length
  Matrix target;     // N x target length
};

inline std::size_t window_count(std::size_t steps, std::size_t condition = kConditionLength,
                                std::size_t target = kTargetLength) {
  return steps >= condition + target ? steps - condition - target + 1 : 0;
}

/// Stride-1 sliding (condition, next-target) pairs; count = T - condition - target + 1.
inline std::vector<WindowPair> conditioning_windows(const Matrix& returns,
                                                    std::size_t condition = kConditionLength,
                                                    std::size_t target = kTargetLength) {
  if (returns.rows() < condition + target)
    throw DegenerateData("conditioning windows: panel has " + std::to_string(returns.rows()) +
                         " steps, need " + std::to_string(condition + target));
  std::vector<WindowPair> out;
  const std::size_t count = window_count(returns.rows(), condition, target);
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k)
    out.push_back({window_of(returns, k, condition), window_of(returns, k + condition, target)});
  return out;
}

}  // namespace ftsbench::generators

#include "ftsbench/generators/spec_io.hpp"
