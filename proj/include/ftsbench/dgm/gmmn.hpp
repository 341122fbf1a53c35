#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ftsbench/core/adam.hpp"
#include "ftsbench/core/error.hpp"
#include "ftsbench/core/net.hpp"
#include "ftsbench/core/random.hpp"
#include "ftsbench/core/tape.hpp"
#include "ftsbench/dgm/arfnn.hpp"
#include "ftsbench/dgm/mmd.hpp"
#include "ftsbench/dgm/training.hpp"

namespace ftsbench::dgm {

struct GmmnModel {
  ArFnnModel generator;
  TrainConfig config;
  TrainingHistory history;
};

/// Gradient-descent state for a GMMN generator trained on rolled-out windows.
class GmmnTrainer {
 public:
  GmmnTrainer(const Matrix& train, const TrainConfig& cfg) : train_(train), cfg_(cfg) {
    cfg_.validate();
    Engine init = make_engine(cfg_.seed, "gmmn-init");
    model_ = make_arfnn({train.cols(), cfg_.condition, cfg_.noise_dim, cfg_.hidden, cfg_.residual_blocks,
                         return_scale(train)},
                        init);
    adam_ = AdamState(model_.network.parameter_count(), {cfg_.learning_rate});
    batch_rng_ = make_engine(cfg_.seed, "gmmn-batch");
    noise_rng_ = make_engine(cfg_.seed, "gmmn-noise");
    Engine monitor_rng = make_engine(cfg_.seed, "gmmn-monitor");
    monitor_ = draw_batch(train_, cfg_.condition, cfg_.horizon, cfg_.batch, model_.scale, monitor_rng);
    monitor_noise_ = draw_noise(monitor_rng);
  }

  const ArFnnModel& model() const noexcept { return model_; }
  ArFnnModel& model() noexcept { return model_; }
  const TrainConfig& config() const noexcept { return cfg_; }

  /// Loss and parameter gradient on one batch with the given noise (B x horizon*noise_dim).
  double loss_and_gradient(const TrainingBatch& b, const Matrix& noise, std::vector<double>* grad,
                           GmmnLoss* parts = nullptr) const {
    Tape tape;
    const NetBinding binding = bind(tape, model_.network, grad != nullptr);
    const NodeId windows = tape.leaf(b.windows);
    std::vector<NodeId> z;
    const std::size_t nd = model_.noise_dim;
    for (std::size_t s = 0; s < cfg_.horizon; ++s) {
      Matrix zs(noise.rows(), nd);
      for (std::size_t r = 0; r < noise.rows(); ++r)
        for (std::size_t k = 0; k < nd; ++k) zs(r, k) = noise(r, s * nd + k);
      z.push_back(tape.leaf(std::move(zs)));
    }
    const NodeId generated = record_rollout(tape, model_, binding, windows, z);
    const GmmnLoss loss = record_gmmn_loss(tape, tape.leaf(b.targets), generated, model_.instruments, cfg_.horizon,
                                           {cfg_.mmd_multipliers});
    if (parts) *parts = loss;
    const double value = tape.value(loss.total)(0, 0);
    if (grad && std::isfinite(value)) {
      tape.backward(loss.total);
      *grad = gather_gradients(tape, model_.network, binding);
    }
    return value;
  }

  /// One Adam update on a fresh batch; returns the batch loss.
  double step() {
    const TrainingBatch b = draw_batch(train_, cfg_.condition, cfg_.horizon, cfg_.batch, model_.scale, batch_rng_);
    const Matrix noise = draw_noise(noise_rng_);
    std::vector<double> grad;
    const double loss = loss_and_gradient(b, noise, &grad);
    if (!std::isfinite(loss)) throw TrainingAborted("gmmn: non-finite loss at step " + std::to_string(steps_));
    auto params = model_.network.parameters();
    adam_.step(params, grad);
    model_.network.set_parameters(params);
    ++steps_;
    return loss;
  }

  /// Loss on the fixed monitoring batch.
  double monitor_loss() const { return loss_and_gradient(monitor_, monitor_noise_, nullptr); }

  /// Std of the generated monitoring paths, in units of the data std.
  double monitor_generated_std() const {
    const Matrix y = rollout_scaled(model_, monitor_.windows, monitor_noise_, cfg_.horizon);
    return batch_std(y);
  }

  std::size_t steps_taken() const noexcept { return steps_; }

 private:
  Matrix draw_noise(Engine& rng) const {
    Matrix z(cfg_.batch, cfg_.horizon * model_.noise_dim);
    fill_normal(rng, z.data());
    return z;
  }

  Matrix train_;
  TrainConfig cfg_;
  ArFnnModel model_;
  AdamState adam_;
  Engine batch_rng_, noise_rng_;
  TrainingBatch monitor_;
  Matrix monitor_noise_;
  std::size_t steps_ = 0;
};

/// Trains with Adam; checks every `check_interval` steps (and once before the first update),
/// keeping the checkpoint with the lowest mean validation EMD.
inline GmmnModel train_gmmn(const Matrix& train, const Matrix& validation, const TrainConfig& cfg) {
  GmmnTrainer trainer(train, cfg);
  GmmnModel out{trainer.model(), trainer.config(), {}};
  EarlyStopping stopper(cfg.patience);
  double last_loss = trainer.monitor_loss();
  if (!std::isfinite(last_loss)) throw TrainingAborted("gmmn: initial loss is not finite");
  out.history.initial_loss = last_loss;
  std::size_t step = 0;
  while (true) {
    CheckRecord rec;
    rec.step = step;
    rec.train_loss = trainer.monitor_loss();
    if (!std::isfinite(rec.train_loss))
      throw TrainingAborted("gmmn: non-finite monitoring loss at step " + std::to_string(step) +
                            " (last finite " + std::to_string(last_loss) + ")");
    last_loss = rec.train_loss;
    rec.validation = validation_score(trainer.model(), validation, cfg);
    rec.generated_std = trainer.monitor_generated_std();
    out.history.checks.push_back(rec);
    if (stopper.observe(rec.validation)) {
      out.generator = trainer.model();
      out.history.best_check = out.history.checks.size() - 1;
      out.history.best_loss = rec.train_loss;
    }
    if (stopper.should_stop()) {
      out.history.early_stopped = true;
      break;
    }
    if (step >= cfg.steps) break;
    const std::size_t until = std::min(cfg.steps, step + cfg.check_interval);
    for (; step < until; ++step) {
      try {
        trainer.step();
      } catch (const NonFiniteError& e) {
        throw TrainingAborted("gmmn: diverged at step " + std::to_string(step) + " (last monitoring loss " +
                              std::to_string(last_loss) + "): " + e.what());
      }
    }
  }
  out.history.steps_run = trainer.steps_taken();
  return out;
}

}  // namespace ftsbench::dgm
