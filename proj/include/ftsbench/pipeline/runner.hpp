#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ftsbench/core/hash.hpp"
#include "ftsbench/core/parallel.hpp"
#include "ftsbench/core/random.hpp"
#include "ftsbench/dgm/gmmn.hpp"
#include "ftsbench/dgm/model_io.hpp"
#include "ftsbench/dgm/rcgan.hpp"
#include "ftsbench/evaluation/network.hpp"
#include "ftsbench/evaluation/score.hpp"
#include "ftsbench/generators/panel_io.hpp"
#include "ftsbench/generators/spec_io.hpp"
#include "ftsbench/har/backtest.hpp"
#include "ftsbench/parametric/fit_io.hpp"
#include "ftsbench/pipeline/config.hpp"
#include "ftsbench/pipeline/manifest.hpp"
#include "ftsbench/pipeline/report.hpp"
#include "ftsbench/pipeline/samplers.hpp"
#include "ftsbench/version.hpp"

namespace ftsbench::pipeline {

namespace fs = std::filesystem;

enum class Stage { Generate, Fit, Train, Evaluate, Backtest, Report };

inline constexpr std::array<const char*, 6> kStageNames = {"generate", "fit", "train", "evaluate", "backtest", "report"};

inline const char* to_string(Stage s) { return kStageNames[static_cast<std::size_t>(s)]; }

inline Stage parse_stage(const std::string& s) {
  for (std::size_t k = 0; k < kStageNames.size(); ++k)
    if (s == kStageNames[k]) return static_cast<Stage>(k);
  throw ConfigError("unknown stage '" + s + "'");
}

/// A stage together with the stages it consumes, in execution order.
inline std::vector<Stage> stages_through(Stage s) {
  using enum Stage;
  switch (s) {
    case Generate: return {Generate};
    case Fit: return {Generate, Fit};
    case Train: return {Generate, Train};
    case Evaluate: return {Generate, Fit, Train, Evaluate};
    case Backtest: return {Generate, Backtest};
    case Report: return {Generate, Fit, Train, Evaluate, Backtest, Report};
  }
  return {};
}

/// Per-purpose seeds of one replicate. Every stream is keyed by name, so adding a dataset or a
/// model leaves the others unchanged.
struct ReplicateSeeds {
  std::uint64_t replicate = 0;

  std::uint64_t dataset(const std::string& ds) const { return derive_seed(replicate, "dataset/" + ds); }
  std::uint64_t model(const std::string& key, const std::string& ds) const {
    return derive_seed(replicate, "model/" + key + "/" + ds);
  }
  std::uint64_t evaluation(const std::string& ds) const { return derive_seed(replicate, "eval/" + ds); }
  std::uint64_t jaccard(const std::string& ds) const { return derive_seed(replicate, "jaccard/" + ds); }
  std::uint64_t backtest_data() const { return derive_seed(replicate, "backtest/dataset"); }
  std::uint64_t market() const { return derive_seed(replicate, "backtest/market"); }
  std::uint64_t backtest() const { return derive_seed(replicate, "backtest/run"); }
  std::uint64_t generator() const { return derive_seed(replicate, "backtest/generator"); }
};

struct TaskContext {
  fs::path out;
  std::size_t jobs = 1;
  const std::map<std::string, TaskRecord>* records = nullptr;
};

struct Task {
  std::string id;
  Stage stage = Stage::Generate;
  std::vector<std::string> deps;
  bool soft_deps = false;  // run even when dependencies failed (the report)
  nlohmann::json params;
  std::function<std::vector<std::string>(const TaskContext&)> run;  // returns artifact paths relative to out
};

struct RunResult {
  RunManifest manifest;
  std::size_t executed = 0, skipped = 0, failed = 0, blocked = 0;

  int exit_code() const { return failed + blocked > 0 ? 2 : 0; }
};

namespace detail {

inline std::string rep_dir(std::size_t r) { return "r" + std::to_string(r); }

inline generators::DatasetSplits load_splits(const fs::path& out, const std::string& base, const std::array<double, 3>& f) {
  return generators::split_dataset(generators::read_panel((out / base).string()), f);
}

inline std::vector<std::string> panel_artifacts(const std::string& base) {
  const generators::PanelFiles f(base);
  return {f.returns, f.manifest, f.variance, f.jumps, f.regime};
}

inline void ensure_parent(const fs::path& p) { fs::create_directories(p.parent_path()); }

/// Window starts a sampler will be asked for during evaluation (scores and Jaccard curves).
inline std::vector<std::size_t> evaluation_starts(std::size_t steps, const ExperimentConfig& c) {
  std::set<std::size_t> starts;
  const auto& s = c.score;
  const std::size_t total = generators::window_count(steps, s.condition, s.horizon);
  std::size_t count = (total + s.stride - 1) / s.stride;
  if (s.max_windows > 0) count = std::min(count, s.max_windows);
  for (std::size_t k = 0; k < count; ++k) starts.insert(k * s.stride);
  if (c.jaccard) {
    std::size_t days = (total + c.jaccard->stride - 1) / c.jaccard->stride;
    if (c.jaccard->max_days > 0) days = std::min(days, c.jaccard->max_days);
    for (std::size_t d = 0; d < days; ++d) starts.insert(d * c.jaccard->stride);
  }
  return {starts.begin(), starts.end()};
}

/// Trains (or initializes) a DGM and saves it under `base`; returns the artifact paths.
inline std::vector<std::string> train_and_save(const ModelEntry& m, const Matrix& train, const Matrix& validation,
                                               std::uint64_t seed, std::size_t jobs, const fs::path& out,
                                               const std::string& base) {
  dgm::TrainConfig t = m.train;
  t.seed = seed;
  t.jobs = jobs;
  const std::string path = (out / base).string();
  ensure_parent(out / base);
  if (m.kind == ModelKind::Gmmn) {
    dgm::GmmnModel g;
    if (m.untrained) {
      const dgm::GmmnTrainer trainer(train, t);
      g = {trainer.model(), trainer.config(), {}};
    } else {
      g = dgm::train_gmmn(train, validation, t);
    }
    dgm::save_gmmn(path, g);
    return {base + ".json", base + ".generator.bin"};
  }
  dgm::RcganModel g;
  if (m.untrained) {
    const dgm::RcganTrainer trainer(train, t);
    g = {trainer.generator(), trainer.discriminator(), trainer.config(), {}};
  } else {
    g = dgm::train_rcgan(train, validation, t);
  }
  dgm::save_rcgan(path, g);
  return {base + ".json", base + ".generator.bin", base + ".discriminator.bin"};
}

inline evaluation::Sampler load_dgm_sampler(const ModelEntry& m, const fs::path& out, const std::string& base,
                                            std::size_t horizon) {
  const std::string path = (out / base).string();
  if (m.kind == ModelKind::Gmmn) return dgm::model_sampler(dgm::load_gmmn(path).generator, horizon);
  return dgm::model_sampler(dgm::load_rcgan(path).generator, horizon);
}

}  // namespace detail

/// Builds the task graph of a config and runs selected stages with content-hash caching.
class Runner {
 public:
  explicit Runner(ExperimentConfig cfg, std::ostream* log = nullptr) : cfg_(std::move(cfg)), log_(log) {
    build();
  }

  const std::vector<Task>& tasks() const noexcept { return tasks_; }
  const ExperimentConfig& config() const noexcept { return cfg_; }

  RunResult run(const std::vector<Stage>& stages) {
    const fs::path out = cfg_.out_dir;
    fs::create_directories(out);
    write_file((out / "config.json").string(), cfg_.resolved.dump(2) + "\n");
    std::optional<RunManifest> previous;
    try {
      previous = read_manifest(out);
    } catch (const IoError& e) {
      say("ignoring unreadable manifest: " + std::string(e.what()));
    }
    std::map<std::string, TaskRecord> records;
    if (previous)
      for (const auto& t : previous->tasks) records[t.id] = t;
    std::map<std::string, TaskRecord> current;
    RunResult result;

    for (Stage stage : stages) {
      std::vector<const Task*> pending;
      for (const auto& task : tasks_) {
        if (task.stage != stage) continue;
        TaskRecord rec;
        rec.id = task.id;
        rec.stage = to_string(stage);
        std::string blocker;
        for (const auto& d : task.deps) {
          const auto it = current.find(d);
          if (it == current.end() || it->second.status != TaskStatus::Ok) {
            blocker = d;
            break;
          }
        }
        if (!blocker.empty() && !task.soft_deps) {
          rec.status = TaskStatus::Blocked;
          rec.error = "depends on " + blocker;
          current[task.id] = rec;
          ++result.blocked;
          say("[" + rec.stage + "] " + task.id + ": blocked by " + blocker);
          continue;
        }
        rec.inputs_hash = inputs_hash(task, current);
        const auto old = records.find(task.id);
        if (old != records.end() && old->second.status == TaskStatus::Ok &&
            old->second.inputs_hash == rec.inputs_hash && artifacts_intact(out, old->second)) {
          current[task.id] = old->second;
          ++result.skipped;
          say("[" + rec.stage + "] " + task.id + ": cached");
          continue;
        }
        current[task.id] = rec;
        pending.push_back(&task);
      }

      const std::size_t inner = std::max<std::size_t>(1, cfg_.jobs / std::max<std::size_t>(1, pending.size()));
      std::vector<TaskRecord> done(pending.size());
      parallel_for(pending.size(), cfg_.jobs, [&](std::size_t k) {
        const Task& task = *pending[k];
        TaskRecord rec = current.at(task.id);
        const auto t0 = std::chrono::steady_clock::now();
        try {
          const TaskContext ctx{out, inner, &current};
          for (const auto& p : task.run(ctx)) rec.artifacts.push_back({p, sha256_file((out / p).string())});
          rec.status = TaskStatus::Ok;
        } catch (const std::exception& e) {
          rec.status = TaskStatus::Failed;
          rec.error = e.what();
          rec.artifacts.clear();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rec.seconds = std::round(secs * 1000.0) / 1000.0;
        say("[" + rec.stage + "] " + task.id + ": " +
            (rec.status == TaskStatus::Ok ? "done in " + detail::fixed(rec.seconds, 3) + " s" : "FAILED: " + rec.error));
        done[k] = std::move(rec);
      });
      for (auto& rec : done) {
        if (rec.status == TaskStatus::Ok) ++result.executed;
        else ++result.failed;
        current[rec.id] = std::move(rec);
      }
      result.manifest = merged(records, current);
      write_manifest(out, result.manifest);
    }
    result.manifest = merged(records, current);
    write_manifest(out, result.manifest);
    return result;
  }

 private:
  void say(const std::string& line) {
    if (!log_) return;
    std::lock_guard<std::mutex> lock(log_mutex_);
    *log_ << line << '\n';
  }

  std::string inputs_hash(const Task& task, const std::map<std::string, TaskRecord>& current) const {
    nlohmann::json deps = nlohmann::json::array();
    for (const auto& d : task.deps) {
      const auto it = current.find(d);
      nlohmann::json entry = {{"id", d}};
      if (it != current.end()) {
        entry["status"] = to_string(it->second.status);
        nlohmann::json arts = nlohmann::json::array();
        for (const auto& a : it->second.artifacts) arts.push_back({a.path, a.sha256});
        entry["artifacts"] = arts;
      }
      deps.push_back(entry);
    }
    const nlohmann::json j = {{"tool_version", kToolVersion}, {"id", task.id}, {"params", task.params}, {"deps", deps}};
    return sha256_hex(j.dump());
  }

  /// Records in graph order: this run's where present, otherwise the previous run's.
  RunManifest merged(const std::map<std::string, TaskRecord>& previous,
                     const std::map<std::string, TaskRecord>& current) const {
    RunManifest m;
    m.config_hash = cfg_.hash();
    for (const auto& t : tasks_) {
      if (auto it = current.find(t.id); it != current.end()) m.tasks.push_back(it->second);
      else if (auto jt = previous.find(t.id); jt != previous.end()) m.tasks.push_back(jt->second);
    }
    return m;
  }

  void build() {
    const auto& c = cfg_;
    const std::size_t reps = c.replicate_seeds.size();
    const nlohmann::json splits = c.splits;
    const nlohmann::json eval_json = c.resolved.value("evaluation", nlohmann::json::object());

    auto data_base = [](const std::string& ds, std::size_t r) { return "data/" + ds + "/" + detail::rep_dir(r); };
    auto model_base = [](const std::string& ds, const std::string& m, std::size_t r) {
      return "models/" + ds + "/" + m + "/" + detail::rep_dir(r);
    };

    for (std::size_t r = 0; r < reps; ++r) {
      const ReplicateSeeds seeds{c.replicate_seeds[r]};
      for (const auto& ds : c.datasets) {
        const std::string base = data_base(ds.name, r);
        const std::uint64_t seed = seeds.dataset(ds.name);
        tasks_.push_back({"generate/" + ds.name + "/" + detail::rep_dir(r), Stage::Generate, {}, false,
                          {{"dataset", ds.definition}, {"seed", seed}},
                          [ds, seed, base](const TaskContext& ctx) {
                            const auto spec = dataset_spec(ds, seed);
                            const auto panel = generators::build_dataset(spec);
                            detail::ensure_parent(ctx.out / base);
                            generators::write_panel((ctx.out / base).string(), panel, nlohmann::json(spec));
                            return detail::panel_artifacts(base);
                          }});
      }
      if (c.backtest) {
        const std::string base = "backtest/" + detail::rep_dir(r) + "/data";
        const std::uint64_t seed = seeds.backtest_data();
        const DatasetEntry ds = c.backtest->dataset;
        tasks_.push_back({"generate/backtest/" + detail::rep_dir(r), Stage::Generate, {}, false,
                          {{"dataset", ds.definition}, {"seed", seed}},
                          [ds, seed, base](const TaskContext& ctx) {
                            const auto panel = generators::build_dataset(dataset_spec(ds, seed));
                            detail::ensure_parent(ctx.out / base);
                            generators::write_panel((ctx.out / base).string(), panel,
                                                    nlohmann::json(dataset_spec(ds, seed)));
                            return detail::panel_artifacts(base);
                          }});
      }
    }

    // Model fitting and training.
    for (std::size_t r = 0; r < reps; ++r) {
      const ReplicateSeeds seeds{c.replicate_seeds[r]};
      for (const auto& ds : c.datasets) {
        const std::string data = data_base(ds.name, r);
        const std::string gen_id = "generate/" + ds.name + "/" + detail::rep_dir(r);
        for (const auto& m : c.models) {
          const std::string base = model_base(ds.name, m.name, r);
          const std::string suffix = "/" + ds.name + "/" + m.name + "/" + detail::rep_dir(r);
          if (m.kind == ModelKind::Dcc) {
            nlohmann::json params = {{"model", m.definition}, {"splits", splits}};
            if (m.rolling) params["evaluation"] = eval_json;
            const ExperimentConfig* cp = &cfg_;
            tasks_.push_back({"fit" + suffix, Stage::Fit, {gen_id}, false, params,
                              [m, data, base, cp](const TaskContext& ctx) {
                                const auto split = detail::load_splits(ctx.out, data, cp->splits);
                                detail::ensure_parent(ctx.out / base);
                                if (!m.rolling) {
                                  const auto fit = parametric::fit_dcc(split.train.returns, m.law);
                                  write_file((ctx.out / (base + ".json")).string(), nlohmann::json(fit).dump(2) + "\n");
                                  return std::vector<std::string>{base + ".json"};
                                }
                                const Matrix& test = split.test.returns;
                                const auto fits = fit_condition_windows(
                                    test, detail::evaluation_starts(test.rows(), *cp), cp->score.condition, m.law, ctx.jobs);
                                write_file((ctx.out / (base + ".windows.json")).string(),
                                           window_fits_json(fits).dump() + "\n");
                                return std::vector<std::string>{base + ".windows.json"};
                              }});
          } else if (is_trained(m.kind)) {
            const std::uint64_t seed = seeds.model(m.seed_key, ds.name);
            tasks_.push_back({"train" + suffix, Stage::Train, {gen_id}, false,
                              {{"model", m.definition}, {"train", dgm::to_json_config(m.train)}, {"seed", seed},
                               {"splits", splits}},
                              [m, data, base, seed, cp = &cfg_](const TaskContext& ctx) {
                                const auto split = detail::load_splits(ctx.out, data, cp->splits);
                                return detail::train_and_save(m, split.train.returns, split.validation.returns, seed,
                                                              ctx.jobs, ctx.out, base);
                              }});
          }
        }
      }
    }

    // Evaluation.
    std::vector<std::string> eval_ids;
    for (std::size_t r = 0; r < reps; ++r) {
      const ReplicateSeeds seeds{c.replicate_seeds[r]};
      for (const auto& ds : c.datasets) {
        const std::string data = data_base(ds.name, r);
        for (const auto& m : c.models) {
          const std::string suffix = "/" + ds.name + "/" + m.name + "/" + detail::rep_dir(r);
          std::vector<std::string> deps{"generate/" + ds.name + "/" + detail::rep_dir(r)};
          if (m.kind == ModelKind::Dcc) deps.push_back("fit" + suffix);
          if (is_trained(m.kind)) deps.push_back("train" + suffix);
          const std::string model = model_base(ds.name, m.name, r);
          const std::string target = "eval" + suffix + ".json";
          const std::uint64_t eval_seed = seeds.evaluation(ds.name), jac_seed = seeds.jaccard(ds.name);
          eval_ids.push_back("evaluate" + suffix);
          tasks_.push_back(
              {"evaluate" + suffix, Stage::Evaluate, deps, false,
               {{"model", m.definition}, {"evaluation", eval_json}, {"seed", eval_seed}, {"splits", splits}},
               [m, data, model, target, eval_seed, jac_seed, cp = &cfg_](const TaskContext& ctx) {
                 const auto split = detail::load_splits(ctx.out, data, cp->splits);
                 const Matrix& test = split.test.returns;
                 const std::size_t cnd = cp->score.condition, h = cp->score.horizon;
                 evaluation::Sampler sampler;
                 switch (m.kind) {
                   case ModelKind::Replay: sampler = evaluation::replay_sampler(test, cnd, h); break;
                   case ModelKind::Zero: sampler = evaluation::zero_sampler(h); break;
                   case ModelKind::Dcc:
                     if (m.rolling) {
                       const auto fits = window_fits_from_json(
                           nlohmann::json::parse(read_file((ctx.out / (model + ".windows.json")).string())));
                       sampler = rolling_dcc_sampler(test, fits, cnd, h);
                     } else {
                       sampler = dcc_sampler(
                           nlohmann::json::parse(read_file((ctx.out / (model + ".json")).string())).get<parametric::DccFit>(),
                           h);
                     }
                     break;
                   case ModelKind::Gmmn:
                   case ModelKind::Rcgan: sampler = detail::load_dgm_sampler(m, ctx.out, model, h); break;
                 }
                 evaluation::ScoreConfig sc = cp->score;
                 sc.seed = eval_seed;
                 sc.jobs = ctx.jobs;
                 nlohmann::json j = {{"score", score_json(evaluation::score_model(test, sampler, sc))}};
                 if (cp->jaccard) {
                   evaluation::JaccardConfig jc = *cp->jaccard;
                   jc.seed = jac_seed;
                   jc.jobs = ctx.jobs;
                   try {
                     j["jaccard"] = jaccard_json(evaluation::jaccard_curve(test, sampler, jc));
                   } catch (const Error& e) {
                     j["jaccard_error"] = e.what();
                   }
                 }
                 detail::ensure_parent(ctx.out / target);
                 write_file((ctx.out / target).string(), j.dump(2) + "\n");
                 return std::vector<std::string>{target};
               }});
        }
      }
    }

    // Backtest.
    std::vector<std::string> backtest_ids;
    if (c.backtest) {
      for (std::size_t r = 0; r < reps; ++r) {
        const ReplicateSeeds seeds{c.replicate_seeds[r]};
        const std::string dir = "backtest/" + detail::rep_dir(r);
        backtest_ids.push_back(dir);
        nlohmann::json params = c.resolved.at("backtest");
        params["seeds"] = {seeds.market(), seeds.backtest(), seeds.generator()};
        tasks_.push_back({dir, Stage::Backtest, {"generate/backtest/" + detail::rep_dir(r)}, false, params,
                          [dir, seeds, cp = &cfg_](const TaskContext& ctx) { return run_backtest_task(*cp, ctx, dir, seeds); }});
      }
    }

    // Report.
    std::vector<std::string> report_deps = eval_ids;
    report_deps.insert(report_deps.end(), backtest_ids.begin(), backtest_ids.end());
    tasks_.push_back({"report", Stage::Report, report_deps, true, {{"name", c.name}, {"seeds", c.replicate_seeds}},
                      [cp = &cfg_](const TaskContext& ctx) { return run_report_task(*cp, ctx); }});
  }

  static std::vector<std::string> run_backtest_task(const ExperimentConfig& c, const TaskContext& ctx,
                                                    const std::string& dir, const ReplicateSeeds& seeds) {
    const BacktestSettings& b = *c.backtest;
    const auto panel = generators::read_panel((ctx.out / (dir + "/data")).string());
    har::MarketConfig mc = b.market;
    mc.seed = seeds.market();
    const har::SyntheticMarket market(panel.variance, mc);
    har::BacktestConfig bc = b.config;
    bc.seed = seeds.backtest();
    bc.jobs = ctx.jobs;
    const std::size_t start = bc.start ? bc.start : panel.steps() / 2;
    std::vector<std::string> artifacts;

    evaluation::Sampler gen;
    if (b.generator) {
      const ModelEntry& g = *b.generator;
      const Matrix history = panel.returns.row_range(0, start);
      const std::string base = dir + "/generator";
      switch (g.kind) {
        case ModelKind::Replay: gen = evaluation::replay_sampler(panel.returns, bc.condition, har::kMonthly); break;
        case ModelKind::Zero: gen = evaluation::zero_sampler(har::kMonthly); break;
        case ModelKind::Dcc: {
          const auto fit = parametric::fit_dcc(history, g.law);
          write_file((ctx.out / (base + ".json")).string(), nlohmann::json(fit).dump(2) + "\n");
          artifacts.push_back(base + ".json");
          gen = dcc_sampler(fit, har::kMonthly);
          break;
        }
        case ModelKind::Gmmn:
        case ModelKind::Rcgan: {
          const std::size_t cut = history.rows() * 4 / 5;
          const auto saved = detail::train_and_save(g, history.row_range(0, cut), history.row_range(cut, history.rows()),
                                                    seeds.generator(), ctx.jobs, ctx.out, base);
          artifacts.insert(artifacts.end(), saved.begin(), saved.end());
          gen = detail::load_dgm_sampler(g, ctx.out, base, har::kMonthly);
          break;
        }
      }
    }
    std::vector<har::Forecaster> forecasters;
    for (const auto& f : b.forecasters) {
      har::Forecaster fc{f, har::parse_forecaster(f), {}};
      if (fc.kind == har::ForecasterKind::HarGen) fc.sampler = gen;
      forecasters.push_back(std::move(fc));
    }
    const auto res = har::run_backtest(panel, market, forecasters, bc);
    const std::string result = dir + "/result.json", grid = dir + "/grid.csv";
    write_file((ctx.out / result).string(), backtest_json(backtest_grid(res), res.lambdas).dump(2) + "\n");
    write_file((ctx.out / grid).string(), har::grid_csv(res));
    artifacts.push_back(result);
    artifacts.push_back(grid);
    if (bc.keep_ledger) {
      write_file((ctx.out / (dir + "/ledger.csv")).string(), har::ledger_csv(res, panel.ids));
      artifacts.push_back(dir + "/ledger.csv");
    }
    return artifacts;
  }

  static std::vector<std::string> run_report_task(const ExperimentConfig& c, const TaskContext& ctx) {
    ReportInputs in;
    in.name = c.name;
    for (const auto& d : c.datasets) in.datasets.push_back(d.name);
    for (const auto& m : c.models) in.models.push_back(m.name);
    in.seeds = c.replicate_seeds;
    const std::size_t reps = in.seeds.size();
    in.scores.assign(in.datasets.size(), std::vector<std::vector<std::optional<evaluation::ScoreResult>>>(
                                              in.models.size(), std::vector<std::optional<evaluation::ScoreResult>>(reps)));
    in.jaccard.assign(in.datasets.size(), std::vector<std::vector<std::optional<evaluation::JaccardCurve>>>(
                                               in.models.size(), std::vector<std::optional<evaluation::JaccardCurve>>(reps)));
    auto record = [&](const std::string& id) -> const TaskRecord* {
      const auto it = ctx.records->find(id);
      if (it == ctx.records->end()) return nullptr;
      if (it->second.status != TaskStatus::Ok) {
        in.failures.push_back(id + ": " + to_string(it->second.status) + " (" + it->second.error + ")");
        return nullptr;
      }
      return &it->second;
    };
    for (std::size_t r = 0; r < reps; ++r)
      for (std::size_t d = 0; d < in.datasets.size(); ++d)
        for (std::size_t m = 0; m < in.models.size(); ++m) {
          const std::string suffix = in.datasets[d] + "/" + in.models[m] + "/" + detail::rep_dir(r);
          if (!record("evaluate/" + suffix)) continue;
          const auto path = ctx.out / ("eval/" + suffix + ".json");
          if (!fs::exists(path)) throw IoError("report: missing artifact " + path.string());
          const auto j = nlohmann::json::parse(read_file(path.string()));
          in.scores[d][m][r] = score_from_json(j.at("score"));
          if (in.scores[d][m][r]->flagged)
            in.failures.push_back("evaluate/" + suffix + ": flagged, " + std::to_string(in.scores[d][m][r]->failures) +
                                  " failed windows (" + in.scores[d][m][r]->first_failure + ")");
          if (j.contains("jaccard")) in.jaccard[d][m][r] = jaccard_from_json(j.at("jaccard"));
          if (j.contains("jaccard_error"))
            in.failures.push_back("evaluate/" + suffix + ": no jaccard curve (" + j.at("jaccard_error").get<std::string>() + ")");
        }
    if (c.backtest) {
      in.backtest.resize(reps);
      for (std::size_t r = 0; r < reps; ++r) {
        const std::string dir = "backtest/" + detail::rep_dir(r);
        if (!record(dir)) continue;
        const auto path = ctx.out / (dir + "/result.json");
        if (!fs::exists(path)) throw IoError("report: missing artifact " + path.string());
        in.backtest[r] = backtest_from_json(nlohmann::json::parse(read_file(path.string())));
      }
    }
    std::vector<std::string> out;
    for (const auto& f : emit_report(ctx.out / "report", in)) out.push_back("report/" + f);
    return out;
  }

  ExperimentConfig cfg_;
  std::ostream* log_ = nullptr;
  std::mutex log_mutex_;
  std::vector<Task> tasks_;
};

}  // namespace ftsbench::pipeline
