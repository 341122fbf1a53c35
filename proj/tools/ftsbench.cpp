#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "ftsbench/pipeline/config.hpp"
#include "ftsbench/pipeline/runner.hpp"

namespace {

constexpr int kExitConfig = 1;

std::uint64_t parse_seed(const std::string& text, const char* source) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end)
    throw ftsbench::ConfigError(std::string(source) + ": '" + text + "' is not an unsigned 64-bit seed");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  namespace pl = ftsbench::pipeline;

  CLI::App app{"Synthetic financial time series benchmark"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir, stage_name, seed_text;
  std::size_t jobs = 0;
  app.add_option("--config", config_path, "Experiment config (JSON)")->required();
  app.add_option("--seed", seed_text, "Master seed; overrides FTSBENCH_SEED and the config");
  app.add_option("--out-dir", out_dir, "Run directory; overrides the config");
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--stage", stage_name, "Stage to run up to (with run)");

  const char* descriptions[][2] = {{"generate", "Simulate datasets"},
                                   {"fit", "Fit parametric models"},
                                   {"train", "Train generative networks"},
                                   {"evaluate", "Score every model on every dataset"},
                                   {"backtest", "Run the straddle backtest"},
                                   {"report", "Write tables and the summary"},
                                   {"run", "Run every stage (or up to --stage)"}};
  for (const auto& d : descriptions) app.add_subcommand(d[0], d[1]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    pl::Stage stage = pl::Stage::Report;
    if (command == "run") {
      if (!stage_name.empty()) stage = pl::parse_stage(stage_name);
    } else {
      stage = pl::parse_stage(command);
      if (!stage_name.empty() && stage_name != command)
        throw ftsbench::ConfigError("--stage " + stage_name + " conflicts with subcommand " + command);
    }

    pl::ExperimentConfig cfg = pl::load_config(config_path);
    if (!seed_text.empty()) pl::override_seed(cfg, parse_seed(seed_text, "--seed"));
    else if (const char* env = std::getenv("FTSBENCH_SEED"); env && *env)
      pl::override_seed(cfg, parse_seed(env, "FTSBENCH_SEED"));
    if (!out_dir.empty()) pl::override_out_dir(cfg, out_dir);
    if (jobs) pl::override_jobs(cfg, jobs);

    pl::Runner runner(std::move(cfg), &std::cerr);
    const auto result = runner.run(pl::stages_through(stage));
    std::cerr << "ran " << result.executed << ", cached " << result.skipped << ", failed " << result.failed
              << ", blocked " << result.blocked << '\n';
    return result.exit_code();
  } catch (const ftsbench::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
