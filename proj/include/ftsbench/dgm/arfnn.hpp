#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/matrix.hpp"
#include "ftsbench/core/net.hpp"
#include "ftsbench/core/random.hpp"
#include "ftsbench/core/tape.hpp"
#include "ftsbench/evaluation/sampler.hpp"
#include "ftsbench/generators/dataset.hpp"

namespace ftsbench::dgm {

/// One-step conditional generator. Input row: the condition window flattened time-major
/// (step t occupies columns t*N .. t*N+N-1), the same block in absolute value, then noise.
/// Returns enter and leave the network divided by `scale`.
struct ArFnnModel {
  FeedForwardNet network;
  std::size_t instruments = 0;
  std::size_t condition = generators::kConditionLength;
  std::size_t noise_dim = 0;
  double scale = 1.0;

  std::size_t input_width() const noexcept { return 2 * instruments * condition + noise_dim; }

  void validate() const {
    if (instruments == 0 || condition == 0) throw InvalidParameters("arfnn: instruments and condition must be positive");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidParameters("arfnn: scale must be positive");
    if (network.input_dim() != input_width())
      throw DimensionError("arfnn: network input width " + std::to_string(network.input_dim()) + " != " +
                           std::to_string(input_width()));
    if (network.output_dim() != instruments)
      throw DimensionError("arfnn: network output width must equal the instrument count");
  }
};

struct ArFnnShape {
  std::size_t instruments = 0;
  std::size_t condition = generators::kConditionLength;
  std::size_t noise_dim = 0;  // 0: one noise input per instrument
  std::size_t hidden = 32;
  std::size_t residual_blocks = 2;
  double scale = 1.0;
};

inline ArFnnModel make_arfnn(const ArFnnShape& s, Engine& rng) {
  ArFnnModel m;
  m.instruments = s.instruments;
  m.condition = s.condition;
  m.noise_dim = s.noise_dim ? s.noise_dim : s.instruments;
  m.scale = s.scale;
  m.network = make_net({m.input_width(), s.hidden, s.residual_blocks, s.instruments}, rng);
  m.validate();
  return m;
}

/// N x c condition window -> time-major row of c*N scaled values.
inline std::vector<double> flatten_condition(const ArFnnModel& m, const Matrix& condition) {
  if (condition.rows() != m.instruments || condition.cols() != m.condition)
    throw DimensionError("arfnn: condition must be " + std::to_string(m.instruments) + " x " +
                         std::to_string(m.condition) + ", got " + std::to_string(condition.rows()) + " x " +
                         std::to_string(condition.cols()));
  std::vector<double> out(m.condition * m.instruments);
  for (std::size_t t = 0; t < m.condition; ++t)
    for (std::size_t i = 0; i < m.instruments; ++i) out[t * m.instruments + i] = condition(i, t) / m.scale;
  return out;
}

/// Batched rollout in scaled units. `windows` is B x c*N (time-major); `noise` is B x
/// steps*noise_dim with step t in columns t*noise_dim ... Output is B x steps*N.
inline Matrix rollout_scaled(const ArFnnModel& m, Matrix windows, const Matrix& noise, std::size_t steps) {
  const std::size_t b = windows.rows(), n = m.instruments, cn = m.condition * n;
  if (windows.cols() != cn) throw DimensionError("rollout: window width mismatch");
  if (noise.rows() != b || noise.cols() != steps * m.noise_dim) throw DimensionError("rollout: noise shape mismatch");
  Matrix input(b, m.input_width());
  Matrix out(b, steps * n);
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t r = 0; r < b; ++r) {
      for (std::size_t k = 0; k < cn; ++k) {
        input(r, k) = windows(r, k);
        input(r, cn + k) = std::abs(windows(r, k));
      }
      for (std::size_t k = 0; k < m.noise_dim; ++k) input(r, 2 * cn + k) = noise(r, s * m.noise_dim + k);
    }
    const Matrix y = forward_batch(m.network, input);
    for (std::size_t r = 0; r < b; ++r) {
      auto w = windows.row(r);
      std::copy(w.begin() + static_cast<std::ptrdiff_t>(n), w.end(), w.begin());
      for (std::size_t i = 0; i < n; ++i) {
        w[cn - n + i] = y(r, i);
        out(r, s * n + i) = y(r, i);
      }
    }
  }
  return out;
}

/// Noise for one path: steps * noise_dim standard normals, drawn step by step.
inline std::vector<double> path_noise(const ArFnnModel& m, std::size_t steps, Engine& rng) {
  std::vector<double> z(steps * m.noise_dim);
  fill_normal(rng, z);
  return z;
}

/// Single-path rollout: N x steps generated returns. Consumes exactly steps * noise_dim
/// normals from `noise`.
inline Matrix rollout(const ArFnnModel& m, const Matrix& condition, std::size_t steps, Engine& noise) {
  m.validate();
  const auto w = flatten_condition(m, condition);
  const auto z = path_noise(m, steps, noise);
  const Matrix y = rollout_scaled(m, Matrix(1, w.size(), w), Matrix(1, z.size(), z), steps);
  Matrix out(m.instruments, steps);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t i = 0; i < m.instruments; ++i) out(i, t) = y(0, t * m.instruments + i) * m.scale;
  return out;
}

/// `batch` independent N x steps rollouts; path k draws its noise from derive_seed(seed, "path", k),
/// so each path equals rollout() with that engine.
inline std::vector<Matrix> sample_conditional(const ArFnnModel& m, const Matrix& condition, std::size_t batch,
                                              std::uint64_t seed, std::size_t steps = generators::kTargetLength) {
  m.validate();
  if (batch == 0) return {};
  const auto w = flatten_condition(m, condition);
  Matrix windows(batch, w.size()), noise(batch, steps * m.noise_dim);
  for (std::size_t k = 0; k < batch; ++k) {
    std::copy(w.begin(), w.end(), windows.row(k).begin());
    Engine rng = make_engine(seed, "path", k);
    const auto z = path_noise(m, steps, rng);
    std::copy(z.begin(), z.end(), noise.row(k).begin());
  }
  const Matrix y = rollout_scaled(m, std::move(windows), noise, steps);
  std::vector<Matrix> out(batch, Matrix(m.instruments, steps));
  for (std::size_t k = 0; k < batch; ++k)
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t i = 0; i < m.instruments; ++i) out[k](i, t) = y(k, t * m.instruments + i) * m.scale;
  return out;
}

inline evaluation::Sampler model_sampler(ArFnnModel m, std::size_t steps = generators::kTargetLength) {
  return [m = std::move(m), steps](const Matrix& condition, std::size_t batch, std::uint64_t seed) {
    return sample_conditional(m, condition, batch, seed, steps);
  };
}

/// Records a batched rollout on the tape. `windows` is a B x c*N leaf, `noise[s]` a B x noise_dim
/// leaf per step; returns the B x steps*N node of scaled outputs.
inline NodeId record_rollout(Tape& tape, const ArFnnModel& m, const NetBinding& binding, NodeId windows,
                             const std::vector<NodeId>& noise) {
  const std::size_t n = m.instruments, cn = m.condition * n;
  NodeId w = windows;
  std::vector<NodeId> outputs;
  for (NodeId z : noise) {
    const NodeId parts[] = {w, tape.abs(w), z};
    const NodeId y = record_forward(tape, m.network, binding, tape.concat_cols(parts));
    outputs.push_back(y);
    if (m.condition == 1) {
      w = y;
    } else {
      const NodeId next[] = {tape.slice_cols(w, n, cn - n), y};
      w = tape.concat_cols(next);
    }
  }
  return tape.concat_cols(outputs);
}

}  // namespace ftsbench::dgm
