#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/hash.hpp"
#include "ftsbench/core/random.hpp"
#include "ftsbench/dgm/model_io.hpp"
#include "ftsbench/evaluation/network.hpp"
#include "ftsbench/evaluation/score.hpp"
#include "ftsbench/generators/spec_io.hpp"
#include "ftsbench/har/backtest.hpp"
#include "ftsbench/parametric/fit_io.hpp"

namespace ftsbench::pipeline {

using nlohmann::json;

inline constexpr std::size_t kDefaultReplicates = 5;

enum class ModelKind { Replay, Zero, Dcc, Gmmn, Rcgan };

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "replay") return ModelKind::Replay;
  if (s == "zero") return ModelKind::Zero;
  if (s == "dcc") return ModelKind::Dcc;
  if (s == "gmmn") return ModelKind::Gmmn;
  if (s == "rcgan") return ModelKind::Rcgan;
  throw ConfigError("unknown model kind '" + s + "'");
}

inline bool is_trained(ModelKind k) { return k == ModelKind::Gmmn || k == ModelKind::Rcgan; }

struct DatasetEntry {
  std::string name;
  json definition;  // resolved: either {preset, instruments, length, segments, burn_in} or {spec}
};

struct ModelEntry {
  std::string name;
  ModelKind kind = ModelKind::Replay;
  parametric::InnovationLaw law = parametric::InnovationLaw::Normal;  // dcc
  bool rolling = false;                                               // dcc
  std::size_t window = 40;                                            // dcc rolling window
  dgm::TrainConfig train;                                             // gmmn, rcgan
  bool untrained = false;            // keep the initialization, skip training
  std::string seed_key;              // model name whose seed stream is used (baseline_of)
  json definition;
};

struct BacktestSettings {
  DatasetEntry dataset;
  std::vector<std::string> forecasters;  // forecaster kinds; also their names
  std::optional<ModelEntry> generator;   // sampler behind har_gen
  har::MarketConfig market;
  har::BacktestConfig config;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> replicate_seeds;
  bool explicit_seeds = false;
  std::array<double, 3> splits{0.6, 0.2, 0.2};
  std::vector<DatasetEntry> datasets;
  std::vector<ModelEntry> models;
  evaluation::ScoreConfig score;
  std::optional<evaluation::JaccardConfig> jaccard;
  std::optional<BacktestSettings> backtest;
  std::string out_dir = "runs/experiment";
  std::size_t jobs = 1;
  json resolved;  // includes expanded; seeds and runtime settings as applied

  const ModelEntry& model(const std::string& name) const {
    for (const auto& m : models)
      if (m.name == name) return m;
    throw ConfigError("unknown model '" + name + "'");
  }

  /// Hash of everything that determines results; out_dir and jobs are excluded.
  std::string hash() const {
    json j = resolved;
    j.erase("out_dir");
    j.erase("jobs");
    return sha256_hex(j.dump());
  }
};

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

inline void check_name(const std::string& name, const std::string& where) {
  if (name.empty()) throw ConfigError(where + ": empty name");
  for (char c : name)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
      throw ConfigError(where + ": name '" + name + "' may only use letters, digits, '_', '-' and '.'");
}

/// Replaces every object carrying an "include" key by the parsed file (path relative to the
/// including file), with the object's other keys patched on top.
inline json resolve_includes(json j, const std::filesystem::path& dir, std::vector<std::filesystem::path>& stack) {
  if (j.is_array()) {
    for (auto& v : j) v = resolve_includes(std::move(v), dir, stack);
    return j;
  }
  if (!j.is_object()) return j;
  if (j.contains("include")) {
    if (!j.at("include").is_string()) throw ConfigError("include must be a path string");
    const auto path = std::filesystem::weakly_canonical(dir / j.at("include").get<std::string>());
    if (std::find(stack.begin(), stack.end(), path) != stack.end())
      throw ConfigError("include cycle through " + path.string());
    json base;
    try {
      base = json::parse(read_file(path.string()));
    } catch (const IoError&) {
      throw ConfigError("cannot resolve include " + path.string());
    } catch (const json::parse_error& e) {
      throw ConfigError("include " + path.string() + ": " + e.what());
    }
    stack.push_back(path);
    base = resolve_includes(std::move(base), path.parent_path(), stack);
    stack.pop_back();
    j.erase("include");
    if (!base.is_object()) throw ConfigError("include " + path.string() + " is not an object");
    base.merge_patch(resolve_includes(std::move(j), dir, stack));
    return base;
  }
  for (auto& [key, value] : j.items()) value = resolve_includes(std::move(value), dir, stack);
  return j;
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": bad value for '" + key + "'");
  }
}

inline DatasetEntry parse_dataset(const json& j, const std::string& where) {
  check_keys(j, {"name", "preset", "instruments", "length", "segments", "burn_in", "spec"}, where);
  DatasetEntry d;
  d.name = get_or<std::string>(j, "name", "", where);
  check_name(d.name, where);
  if (j.contains("preset") == j.contains("spec")) throw ConfigError(where + ": give exactly one of preset or spec");
  d.definition = j;
  d.definition.erase("name");
  return d;
}

inline ModelEntry parse_model(const json& j, const std::string& where, std::size_t condition) {
  check_keys(j, {"name", "kind", "law", "schedule", "window", "train", "untrained", "baseline_of"}, where);
  ModelEntry m;
  m.name = get_or<std::string>(j, "name", "", where);
  check_name(m.name, where);
  m.kind = parse_model_kind(get_or<std::string>(j, "kind", "", where + " " + m.name));
  m.definition = j;
  const std::string at = where + " " + m.name;
  if (m.kind == ModelKind::Dcc) {
    m.law = parametric::parse_law(get_or<std::string>(j, "law", "normal", at));
    const auto schedule = get_or<std::string>(j, "schedule", "full", at);
    if (schedule != "full" && schedule != "rolling") throw ConfigError(at + ": schedule must be full or rolling");
    m.rolling = schedule == "rolling";
    m.window = get_or<std::size_t>(j, "window", condition, at);
    if (m.rolling && m.window != condition)
      throw ConfigError(at + ": rolling window must equal the evaluation condition length");
  } else if (j.contains("law") || j.contains("schedule") || j.contains("window")) {
    throw ConfigError(at + ": law, schedule and window apply to dcc models only");
  }
  if (is_trained(m.kind)) {
    json train = j.value("train", json::object());
    if (train.contains("seed") || train.contains("condition"))
      throw ConfigError(at + ": train.seed and train.condition are set by the runner");
    const json known = dgm::to_json_config(dgm::TrainConfig{});
    for (const auto& [key, value] : train.items())
      if (!known.contains(key)) throw ConfigError(at + ": unknown train key '" + key + "'");
    train["condition"] = condition;
    try {
      m.train = dgm::train_config_from_json(train);
    } catch (const json::exception& e) {
      throw ConfigError(at + ": " + e.what());
    } catch (const InvalidParameters& e) {
      throw ConfigError(at + ": " + e.what());
    }
    m.untrained = get_or<bool>(j, "untrained", false, at);
  } else if (j.contains("train") || j.contains("untrained")) {
    throw ConfigError(at + ": train settings apply to gmmn and rcgan models only");
  }
  m.seed_key = get_or<std::string>(j, "baseline_of", m.name, at);
  return m;
}

inline void parse_evaluation(const json& j, ExperimentConfig& c) {
  const std::string where = "evaluation";
  check_keys(j, {"condition", "horizon", "batch", "stride", "max_windows", "rolling_window", "return_scale",
                 "failure_tolerance", "jaccard"},
             where);
  auto& s = c.score;
  s.condition = get_or(j, "condition", s.condition, where);
  s.horizon = get_or(j, "horizon", s.horizon, where);
  s.batch = get_or(j, "batch", s.batch, where);
  s.stride = get_or(j, "stride", s.stride, where);
  s.max_windows = get_or(j, "max_windows", s.max_windows, where);
  s.rolling_window = get_or(j, "rolling_window", s.rolling_window, where);
  s.return_scale = get_or(j, "return_scale", s.return_scale, where);
  s.failure_tolerance = get_or(j, "failure_tolerance", s.failure_tolerance, where);
  try {
    s.validate();
  } catch (const InvalidParameters& e) {
    throw ConfigError(std::string("evaluation: ") + e.what());
  }
  if (j.contains("jaccard") && !j.at("jaccard").is_null()) {
    const json& jj = j.at("jaccard");
    const std::string at = "evaluation.jaccard";
    check_keys(jj, {"percentiles", "bootstrap", "batch", "stride", "max_days"}, at);
    evaluation::JaccardConfig jc;
    jc.percentiles = get_or(jj, "percentiles", jc.percentiles, at);
    jc.bootstrap = get_or(jj, "bootstrap", jc.bootstrap, at);
    jc.batch = get_or(jj, "batch", jc.batch, at);
    jc.stride = get_or(jj, "stride", jc.stride, at);
    jc.max_days = get_or(jj, "max_days", jc.max_days, at);
    jc.condition = s.condition;
    jc.horizon = s.horizon;
    if (jc.percentiles.empty() || jc.bootstrap == 0 || jc.batch == 0 || jc.stride == 0)
      throw ConfigError(at + ": percentiles, bootstrap, batch and stride must be non-empty and positive");
    if (s.condition != s.horizon) throw ConfigError(at + ": needs condition == horizon");
    c.jaccard = jc;
  }
}

inline BacktestSettings parse_backtest(const json& j, const ExperimentConfig& c) {
  const std::string where = "backtest";
  check_keys(j, {"dataset", "forecasters", "generator", "market", "basket_sizes", "proxy", "half_life", "lambda",
                 "lambda_grid", "validation_fraction", "network_threshold", "network_normalized", "condition",
                 "gen_batch", "strike_filter_bps", "start", "history", "keep_ledger"},
             where);
  BacktestSettings b;
  if (!j.contains("dataset")) throw ConfigError("backtest: dataset required");
  json ds = j.at("dataset");
  if (ds.is_object() && !ds.contains("name")) ds["name"] = "backtest";
  b.dataset = parse_dataset(ds, "backtest.dataset");
  b.forecasters = get_or<std::vector<std::string>>(j, "forecasters", {"oracle", "implied", "har", "har_net"}, where);
  if (b.forecasters.empty()) throw ConfigError("backtest: no forecasters");
  std::set<std::string> seen;
  for (const auto& f : b.forecasters) {
    har::parse_forecaster(f);
    if (!seen.insert(f).second) throw ConfigError("backtest: duplicate forecaster '" + f + "'");
  }
  auto& bc = b.config;
  bc.condition = get_or(j, "condition", c.score.condition, where);
  if (j.contains("generator") && !j.at("generator").is_null()) {
    json g = j.at("generator");
    if (g.is_object() && !g.contains("name")) g["name"] = "generator";
    b.generator = parse_model(g, "backtest.generator", bc.condition);
  }
  if (seen.count("har_gen") && !b.generator) throw ConfigError("backtest: har_gen needs a generator model");
  if (b.generator && b.generator->kind == ModelKind::Dcc && b.generator->rolling)
    throw ConfigError("backtest: the generator must use the full schedule");
  if (j.contains("market")) {
    const json& m = j.at("market");
    const std::string at = "backtest.market";
    check_keys(m, {"premium", "noise", "strike_sd_bps", "days_to_expiry", "spot"}, at);
    b.market.premium = get_or(m, "premium", b.market.premium, at);
    b.market.noise = get_or(m, "noise", b.market.noise, at);
    b.market.strike_sd_bps = get_or(m, "strike_sd_bps", b.market.strike_sd_bps, at);
    b.market.days_to_expiry = get_or(m, "days_to_expiry", b.market.days_to_expiry, at);
    b.market.spot = get_or(m, "spot", b.market.spot, at);
  }
  b.market.validate();
  bc.basket_sizes = get_or(j, "basket_sizes", bc.basket_sizes, where);
  bc.proxy = har::parse_proxy(get_or<std::string>(j, "proxy", har::to_string(bc.proxy), where));
  bc.half_life = get_or(j, "half_life", bc.half_life, where);
  bc.lambda = get_or(j, "lambda", bc.lambda, where);
  bc.lambda_grid = get_or(j, "lambda_grid", bc.lambda_grid, where);
  bc.validation_fraction = get_or(j, "validation_fraction", bc.validation_fraction, where);
  bc.network_threshold = get_or(j, "network_threshold", bc.network_threshold, where);
  bc.network_normalized = get_or(j, "network_normalized", bc.network_normalized, where);
  bc.gen_batch = get_or(j, "gen_batch", bc.gen_batch, where);
  bc.strike_filter_bps = get_or(j, "strike_filter_bps", bc.strike_filter_bps, where);
  bc.start = get_or(j, "start", bc.start, where);
  bc.history = get_or(j, "history", bc.history, where);
  bc.keep_ledger = get_or(j, "keep_ledger", false, where);
  bc.validate();
  return b;
}

}  // namespace detail

/// Generator spec of a dataset entry for one replicate seed.
inline generators::GeneratorSpec dataset_spec(const DatasetEntry& d, std::uint64_t seed) {
  const json& j = d.definition;
  const std::string where = "dataset " + d.name;
  try {
    generators::GeneratorSpec s;
    if (j.contains("preset")) {
      s = generators::make_preset(j.at("preset").get<std::string>(), detail::get_or<std::size_t>(j, "instruments", 5, where),
                                  detail::get_or<std::size_t>(j, "length", 5000, where),
                                  detail::get_or<std::size_t>(j, "segments", 10, where), seed,
                                  detail::get_or<std::size_t>(j, "burn_in", 500, where));
    } else {
      if (j.contains("instruments") || j.contains("length") || j.contains("segments") || j.contains("burn_in"))
        throw ConfigError(where + ": preset sizing keys cannot be combined with an explicit spec");
      s = j.at("spec").get<generators::GeneratorSpec>();
      s.seed = seed;
    }
    s.validate();
    return s;
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

/// Replicate seeds for a master seed: derived from the master unless listed explicitly.
inline std::vector<std::uint64_t> derive_replicates(std::uint64_t master, std::size_t count) {
  std::vector<std::uint64_t> out(count);
  for (std::size_t r = 0; r < count; ++r) out[r] = derive_seed(master, "replicate", r);
  return out;
}

/// Builds and validates a config from resolved JSON (includes already expanded).
inline ExperimentConfig parse_config(const json& j) {
  detail::check_keys(j, {"name", "seed", "seeds", "splits", "datasets", "models", "evaluation", "backtest", "out_dir",
                         "jobs"},
                     "config");
  ExperimentConfig c;
  c.resolved = j;
  c.name = detail::get_or<std::string>(j, "name", c.name, "config");
  detail::check_name(c.name, "config");
  c.seed = detail::get_or<std::uint64_t>(j, "seed", c.seed, "config");
  if (j.contains("seeds") && j.at("seeds").is_array()) {
    c.replicate_seeds = detail::get_or<std::vector<std::uint64_t>>(j, "seeds", {}, "config");
    c.explicit_seeds = true;
    std::set<std::uint64_t> unique(c.replicate_seeds.begin(), c.replicate_seeds.end());
    if (unique.size() != c.replicate_seeds.size()) throw ConfigError("config: duplicate replicate seeds");
  } else {
    c.replicate_seeds = derive_replicates(c.seed, detail::get_or<std::size_t>(j, "seeds", kDefaultReplicates, "config"));
  }
  if (c.replicate_seeds.empty()) throw ConfigError("config: at least one seed is required");
  const auto splits = detail::get_or<std::vector<double>>(j, "splits", {0.6, 0.2, 0.2}, "config");
  if (splits.size() != 3) throw ConfigError("config: splits needs three fractions");
  double sum = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    if (!(splits[k] > 0.0)) throw ConfigError("config: split fractions must be positive");
    c.splits[k] = splits[k];
    sum += splits[k];
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("config: split fractions must sum to 1");
  c.out_dir = detail::get_or<std::string>(j, "out_dir", "runs/" + c.name, "config");
  c.jobs = detail::get_or<std::size_t>(j, "jobs", 1, "config");
  if (c.jobs == 0) throw ConfigError("config: jobs must be positive");

  detail::parse_evaluation(j.value("evaluation", json::object()), c);

  std::set<std::string> names;
  if (!j.contains("datasets") || !j.at("datasets").is_array() || j.at("datasets").empty())
    throw ConfigError("config: at least one dataset is required");
  for (const auto& d : j.at("datasets")) {
    c.datasets.push_back(detail::parse_dataset(d, "dataset"));
    if (!names.insert(c.datasets.back().name).second)
      throw ConfigError("config: duplicate dataset '" + c.datasets.back().name + "'");
  }
  names.clear();
  if (!j.contains("models") || !j.at("models").is_array() || j.at("models").empty())
    throw ConfigError("config: the model roster is empty");
  for (const auto& m : j.at("models")) {
    c.models.push_back(detail::parse_model(m, "model", c.score.condition));
    if (!names.insert(c.models.back().name).second)
      throw ConfigError("config: duplicate model '" + c.models.back().name + "'");
  }
  for (const auto& m : c.models) {
    if (m.seed_key == m.name) continue;
    const ModelEntry& target = c.model(m.seed_key);
    if (target.kind != m.kind) throw ConfigError("model " + m.name + ": baseline_of must name a model of the same kind");
  }
  if (j.contains("backtest") && !j.at("backtest").is_null()) c.backtest = detail::parse_backtest(j.at("backtest"), c);

  // Resolve every dataset spec once so bad definitions fail at load time.
  for (const auto& d : c.datasets) dataset_spec(d, 1);
  if (c.backtest) dataset_spec(c.backtest->dataset, 1);
  return c;
}

/// Reads a config file, expanding includes relative to its directory.
inline ExperimentConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  const auto file = std::filesystem::weakly_canonical(std::filesystem::path(path));
  std::vector<std::filesystem::path> stack{file};
  return parse_config(detail::resolve_includes(std::move(j), file.parent_path(), stack));
}

/// Replaces the master seed; derived replicate seeds follow it, an explicit list is re-derived
/// with the same count.
inline void override_seed(ExperimentConfig& c, std::uint64_t seed) {
  c.seed = seed;
  c.replicate_seeds = derive_replicates(seed, c.replicate_seeds.size());
  c.explicit_seeds = false;
  c.resolved["seed"] = seed;
  c.resolved["seeds"] = c.replicate_seeds.size();
}

inline void override_out_dir(ExperimentConfig& c, const std::string& dir) {
  c.out_dir = dir;
  c.resolved["out_dir"] = dir;
}

inline void override_jobs(ExperimentConfig& c, std::size_t jobs) {
  if (jobs == 0) throw ConfigError("jobs must be positive");
  c.jobs = jobs;
  c.resolved["jobs"] = jobs;
}

}  // namespace ftsbench::pipeline
