#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "ftsbench/core/adam.hpp"
#include "ftsbench/core/error.hpp"
#include "ftsbench/core/matrix.hpp"
#include "ftsbench/core/random.hpp"
#include "ftsbench/dgm/arfnn.hpp"
#include "ftsbench/dgm/mmd.hpp"
#include "ftsbench/evaluation/score.hpp"
#include "ftsbench/generators/dataset.hpp"

namespace ftsbench::dgm {

struct TrainConfig {
  std::size_t batch = 64;
  std::size_t steps = 1000;
  double learning_rate = 1e-3;
  double discriminator_learning_rate = 1e-3;
  std::size_t discriminator_steps = 1;  // per generator step (RCGAN)
  std::size_t check_interval = 100;
  std::size_t patience = 5;
  std::size_t horizon = generators::kTargetLength;  // GMMN training rollout length
  std::size_t hidden = 32;
  std::size_t residual_blocks = 2;
  std::size_t noise_dim = 0;  // 0: N
  std::size_t condition = generators::kConditionLength;
  std::vector<double> mmd_multipliers{0.5, 1.0, 2.0, 4.0, 8.0};
  // Validation EMD suite.
  std::size_t validation_batch = 20;
  std::size_t validation_stride = 10;
  std::size_t validation_windows = 0;
  std::size_t jobs = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch == 0 || check_interval == 0 || horizon == 0 || hidden == 0 || condition == 0)
      throw InvalidParameters("train config: batch, check_interval, horizon, hidden and condition must be positive");
    if (!(learning_rate > 0.0) || !(discriminator_learning_rate > 0.0))
      throw InvalidParameters("train config: learning rates must be positive");
    if (validation_batch == 0 || validation_stride == 0 || discriminator_steps == 0)
      throw InvalidParameters("train config: validation batch/stride and discriminator steps must be positive");
  }
};

struct CheckRecord {
  std::size_t step = 0;
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  double validation = std::numeric_limits<double>::quiet_NaN();  // mean of the 10 EMD measures
  double generated_std = 0.0;
};

struct TrainingHistory {
  std::vector<CheckRecord> checks;
  std::size_t best_check = 0;
  std::size_t steps_run = 0;
  bool early_stopped = false;
  double initial_loss = std::numeric_limits<double>::quiet_NaN();
  double best_loss = std::numeric_limits<double>::quiet_NaN();  // training loss at the best checkpoint
};

/// Standard deviation used to normalize network inputs and outputs.
inline double return_scale(const Matrix& returns) {
  double s = 0.0, ss = 0.0;
  for (double v : returns.data()) {
    s += v;
    ss += v * v;
  }
  const double n = static_cast<double>(returns.size());
  const double var = ss / n - (s / n) * (s / n);
  if (!(var > 0.0)) throw DegenerateData("training panel has zero variance");
  return std::sqrt(var);
}

/// Random (condition, next `horizon` steps) pairs, scaled and time-major.
struct TrainingBatch {
  Matrix windows;  // B x c*N
  Matrix targets;  // B x horizon*N
};

inline TrainingBatch draw_batch(const Matrix& returns, std::size_t condition, std::size_t horizon, std::size_t batch,
                                double scale, Engine& rng) {
  const std::size_t n = returns.cols();
  if (returns.rows() < condition + horizon)
    throw DegenerateData("training panel has " + std::to_string(returns.rows()) + " steps, need " +
                         std::to_string(condition + horizon));
  std::uniform_int_distribution<std::size_t> pick(0, returns.rows() - condition - horizon);
  TrainingBatch b{Matrix(batch, condition * n), Matrix(batch, horizon * n)};
  for (std::size_t k = 0; k < batch; ++k) {
    const std::size_t s = pick(rng);
    for (std::size_t t = 0; t < condition; ++t)
      for (std::size_t i = 0; i < n; ++i) b.windows(k, t * n + i) = returns(s + t, i) / scale;
    for (std::size_t t = 0; t < horizon; ++t)
      for (std::size_t i = 0; i < n; ++i) b.targets(k, t * n + i) = returns(s + condition + t, i) / scale;
  }
  return b;
}

inline double mean_emd(const evaluation::ScoreResult& r) {
  double s = 0.0;
  for (double v : r.emd) {
    if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
    s += v;
  }
  return r.flagged ? std::numeric_limits<double>::infinity() : s / static_cast<double>(r.emd.size());
}

inline evaluation::ScoreConfig validation_score_config(const TrainConfig& cfg) {
  evaluation::ScoreConfig s;
  s.condition = cfg.condition;
  s.batch = cfg.validation_batch;
  s.stride = cfg.validation_stride;
  s.max_windows = cfg.validation_windows;
  s.seed = derive_seed(cfg.seed, "validation");
  s.jobs = cfg.jobs;
  return s;
}

/// Mean validation EMD of a generator; infinite when the sampler fails.
inline double validation_score(const ArFnnModel& m, const Matrix& validation, const TrainConfig& cfg) {
  try {
    return mean_emd(evaluation::score_model(validation, model_sampler(m), validation_score_config(cfg)));
  } catch (const DegenerateData&) {
    return std::numeric_limits<double>::infinity();
  }
}

/// Std of a batch of generated one-step outputs relative to the scaled data (which has unit std).
inline double batch_std(const Matrix& m) {
  double s = 0.0, ss = 0.0;
  for (double v : m.data()) {
    s += v;
    ss += v * v;
  }
  const double n = static_cast<double>(m.size());
  return std::sqrt(std::max(0.0, ss / n - (s / n) * (s / n)));
}

/// Keeps the best checkpoint and decides when to stop: after every check, training ends once
/// `patience` consecutive checks have not improved on the best score. With patience 0 the
/// first check (taken before any update) ends training.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Returns true when the score is a new best.
  bool observe(double score) {
    ++checks_;
    if (checks_ == 1 || score < best_) {
      best_ = score;
      stale_ = 0;
      return true;
    }
    ++stale_;
    return false;
  }

  bool should_stop() const noexcept { return checks_ > 0 && stale_ >= patience_; }
  double best() const noexcept { return best_; }

 private:
  std::size_t patience_;
  std::size_t checks_ = 0;
  std::size_t stale_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

}  // namespace ftsbench::dgm
