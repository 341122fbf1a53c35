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
#include "ftsbench/dgm/training.hpp"

namespace ftsbench::dgm {

struct RcganModel {
  ArFnnModel generator;
  FeedForwardNet discriminator;  // (condition, |condition|, target, |target|) -> logit
  TrainConfig config;
  TrainingHistory history;
};

/// Consecutive checks with collapsed generator output before training is aborted.
inline constexpr std::size_t kCollapseChecks = 5;
inline constexpr double kCollapseRatio = 0.01;

/// Counts consecutive checks whose generated std falls below kCollapseRatio of the data std.
class CollapseMonitor {
 public:
  /// Returns true once the collapse has persisted for kCollapseChecks checks.
  bool observe(double generated_std, double real_std) {
    run_ = generated_std < kCollapseRatio * real_std ? run_ + 1 : 0;
    return run_ >= kCollapseChecks;
  }
  std::size_t run() const noexcept { return run_; }

 private:
  std::size_t run_ = 0;
};

/// Conditional GAN over one-step targets. The discriminator minimizes binary cross-entropy;
/// the generator minimizes the non-saturating loss -log D(G(z)).
class RcganTrainer {
 public:
  RcganTrainer(const Matrix& train, const TrainConfig& cfg) : train_(train), cfg_(cfg) {
    cfg_.validate();
    Engine init = make_engine(cfg_.seed, "rcgan-init");
    const std::size_t n = train.cols();
    generator_ = make_arfnn({n, cfg_.condition, cfg_.noise_dim, cfg_.hidden, cfg_.residual_blocks, return_scale(train)},
                            init);
    discriminator_ = make_net({2 * cfg_.condition * n + 2 * n, cfg_.hidden, cfg_.residual_blocks, 1}, init);
    gen_adam_ = AdamState(generator_.network.parameter_count(), {cfg_.learning_rate, 0.5, 0.999});
    disc_adam_ = AdamState(discriminator_.parameter_count(), {cfg_.discriminator_learning_rate, 0.5, 0.999});
    batch_rng_ = make_engine(cfg_.seed, "rcgan-batch");
    noise_rng_ = make_engine(cfg_.seed, "rcgan-noise");
    Engine monitor_rng = make_engine(cfg_.seed, "rcgan-monitor");
    monitor_ = draw_batch(train_, cfg_.condition, 1, cfg_.batch, generator_.scale, monitor_rng);
    monitor_noise_ = noise(monitor_rng, cfg_.batch);
  }

  const ArFnnModel& generator() const noexcept { return generator_; }
  const FeedForwardNet& discriminator() const noexcept { return discriminator_; }
  const TrainConfig& config() const noexcept { return cfg_; }

  /// Discriminator logits for (window, target) rows, all in scaled units.
  Matrix logits(const Matrix& windows, const Matrix& targets) const {
    return forward_batch(discriminator_, discriminator_input(windows, targets));
  }

  /// One-step generated targets (scaled) for the given windows and noise.
  Matrix generate(const Matrix& windows, const Matrix& z) const { return rollout_scaled(generator_, windows, z, 1); }

  double discriminator_step() {
    const TrainingBatch b = draw_batch(train_, cfg_.condition, 1, cfg_.batch, generator_.scale, batch_rng_);
    const Matrix fake = generate(b.windows, noise(noise_rng_, cfg_.batch));
    Tape tape;
    const NetBinding d = bind(tape, discriminator_, true);
    const NodeId real_logit = record_forward(tape, discriminator_, d, tape.leaf(discriminator_input(b.windows, b.targets)));
    const NodeId fake_logit = record_forward(tape, discriminator_, d, tape.leaf(discriminator_input(b.windows, fake)));
    const NodeId loss = tape.add(tape.mean(tape.softplus(tape.scale(real_logit, -1.0))),
                                 tape.mean(tape.softplus(fake_logit)));
    const double value = tape.value(loss)(0, 0);
    if (!std::isfinite(value)) throw TrainingAborted("rcgan: non-finite discriminator loss at step " + std::to_string(steps_));
    tape.backward(loss);
    auto params = discriminator_.parameters();
    disc_adam_.step(params, gather_gradients(tape, discriminator_, d));
    discriminator_.set_parameters(params);
    return value;
  }

  /// Non-saturating generator loss and, when requested, its gradient.
  double generator_loss(const TrainingBatch& b, const Matrix& z, std::vector<double>* grad) const {
    Tape tape;
    const NetBinding g = bind(tape, generator_.network, grad != nullptr);
    const NetBinding d = bind(tape, discriminator_, false);
    const NodeId windows = tape.leaf(b.windows);
    const NodeId fake = record_rollout(tape, generator_, g, windows, {tape.leaf(z)});
    const NodeId parts[] = {windows, tape.abs(windows), fake, tape.abs(fake)};
    const NodeId logit = record_forward(tape, discriminator_, d, tape.concat_cols(parts));
    const NodeId loss = tape.mean(tape.softplus(tape.scale(logit, -1.0)));
    const double value = tape.value(loss)(0, 0);
    if (grad && std::isfinite(value)) {
      tape.backward(loss);
      *grad = gather_gradients(tape, generator_.network, g);
    }
    return value;
  }

  double generator_step() {
    const TrainingBatch b = draw_batch(train_, cfg_.condition, 1, cfg_.batch, generator_.scale, batch_rng_);
    std::vector<double> grad;
    const double value = generator_loss(b, noise(noise_rng_, cfg_.batch), &grad);
    if (!std::isfinite(value)) throw TrainingAborted("rcgan: non-finite generator loss at step " + std::to_string(steps_));
    auto params = generator_.network.parameters();
    gen_adam_.step(params, grad);
    generator_.network.set_parameters(params);
    ++steps_;
    return value;
  }

  /// Discriminator steps followed by one generator step.
  double step() {
    for (std::size_t k = 0; k < cfg_.discriminator_steps; ++k) discriminator_step();
    return generator_step();
  }

  /// Share of correctly classified pairs over `count` real and `count` generated pairs drawn
  /// from `panel` with its own stream.
  double discriminator_accuracy(const Matrix& panel, std::size_t count, std::uint64_t seed) const {
    Engine rng = make_engine(seed, "rcgan-accuracy");
    const TrainingBatch b = draw_batch(panel, cfg_.condition, 1, count, generator_.scale, rng);
    const Matrix fake = generate(b.windows, noise(rng, count));
    const Matrix lr = logits(b.windows, b.targets), lf = logits(b.windows, fake);
    std::size_t correct = 0;
    for (std::size_t k = 0; k < count; ++k) correct += (lr(k, 0) > 0.0) + (lf(k, 0) < 0.0);
    return static_cast<double>(correct) / static_cast<double>(2 * count);
  }

  double monitor_loss() const { return generator_loss(monitor_, monitor_noise_, nullptr); }
  double monitor_generated_std() const { return batch_std(generate(monitor_.windows, monitor_noise_)); }
  double monitor_real_std() const { return batch_std(monitor_.targets); }
  std::size_t steps_taken() const noexcept { return steps_; }

 private:
  Matrix noise(Engine& rng, std::size_t rows) const {
    Matrix z(rows, generator_.noise_dim);
    fill_normal(rng, z.data());
    return z;
  }

  Matrix discriminator_input(const Matrix& windows, const Matrix& targets) const {
    const std::size_t cn = windows.cols(), n = targets.cols();
    Matrix x(windows.rows(), 2 * cn + 2 * n);
    for (std::size_t r = 0; r < windows.rows(); ++r) {
      for (std::size_t k = 0; k < cn; ++k) {
        x(r, k) = windows(r, k);
        x(r, cn + k) = std::abs(windows(r, k));
      }
      for (std::size_t i = 0; i < n; ++i) {
        x(r, 2 * cn + i) = targets(r, i);
        x(r, 2 * cn + n + i) = std::abs(targets(r, i));
      }
    }
    return x;
  }

  Matrix train_;
  TrainConfig cfg_;
  ArFnnModel generator_;
  FeedForwardNet discriminator_;
  AdamState gen_adam_, disc_adam_;
  Engine batch_rng_, noise_rng_;
  TrainingBatch monitor_;
  Matrix monitor_noise_;
  std::size_t steps_ = 0;
};

/// Alternating training with the same checkpointing and early stopping as train_gmmn. Aborts
/// when the generated one-step std stays below 1% of the data std for 5 consecutive checks.
inline RcganModel train_rcgan(const Matrix& train, const Matrix& validation, const TrainConfig& cfg) {
  RcganTrainer trainer(train, cfg);
  RcganModel out{trainer.generator(), trainer.discriminator(), trainer.config(), {}};
  EarlyStopping stopper(cfg.patience);
  out.history.initial_loss = trainer.monitor_loss();
  CollapseMonitor collapse;
  std::size_t step = 0;
  while (true) {
    CheckRecord rec;
    rec.step = step;
    rec.train_loss = trainer.monitor_loss();
    rec.generated_std = trainer.monitor_generated_std();
    const double real_std = trainer.monitor_real_std();
    if (collapse.observe(rec.generated_std, real_std))
      throw TrainingAborted("rcgan: mode collapse at step " + std::to_string(step) + " (generated std " +
                            std::to_string(rec.generated_std) + " vs data std " + std::to_string(real_std) +
                            " for " + std::to_string(collapse.run()) + " checks)");
    rec.validation = validation_score(trainer.generator(), validation, cfg);
    out.history.checks.push_back(rec);
    if (stopper.observe(rec.validation)) {
      out.generator = trainer.generator();
      out.discriminator = trainer.discriminator();
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
        throw TrainingAborted("rcgan: diverged at step " + std::to_string(step) + ": " + e.what());
      }
    }
  }
  out.history.steps_run = trainer.steps_taken();
  return out;
}

}  // namespace ftsbench::dgm
