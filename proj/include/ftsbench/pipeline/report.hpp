#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/hash.hpp"
#include "ftsbench/core/stats.hpp"
#include "ftsbench/evaluation/metric_table.hpp"
#include "ftsbench/evaluation/network.hpp"
#include "ftsbench/evaluation/score.hpp"
#include "ftsbench/generators/panel_io.hpp"
#include "ftsbench/har/backtest.hpp"

namespace ftsbench::pipeline {

using generators::format_real;

namespace detail {

inline nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline double num_or_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace detail

inline nlohmann::json score_json(const evaluation::ScoreResult& r) {
  nlohmann::json emd = nlohmann::json::object();
  for (std::size_t i = 0; i < evaluation::kMeasures.size(); ++i) emd[std::string(evaluation::kMeasures[i])] = detail::num(r.emd[i]);
  nlohmann::json j = {{"emd", emd},
                      {"windows", r.windows},
                      {"failures", r.failures},
                      {"flagged", r.flagged},
                      {"degenerate_real", r.degenerate_real},
                      {"degenerate_generated", r.degenerate_generated},
                      {"real_sq_autocorr", detail::num(r.real_sq_autocorr)},
                      {"generated_sq_autocorr", detail::num(r.generated_sq_autocorr)}};
  if (!r.first_failure.empty()) j["first_failure"] = r.first_failure;
  return j;
}

inline evaluation::ScoreResult score_from_json(const nlohmann::json& j) {
  evaluation::ScoreResult r;
  for (std::size_t i = 0; i < evaluation::kMeasures.size(); ++i)
    r.emd[i] = detail::num_or_nan(j.at("emd").at(std::string(evaluation::kMeasures[i])));
  r.windows = j.at("windows").get<std::size_t>();
  r.failures = j.at("failures").get<std::size_t>();
  r.flagged = j.at("flagged").get<bool>();
  r.degenerate_real = j.at("degenerate_real").get<std::size_t>();
  r.degenerate_generated = j.at("degenerate_generated").get<std::size_t>();
  r.real_sq_autocorr = detail::num_or_nan(j.at("real_sq_autocorr"));
  r.generated_sq_autocorr = detail::num_or_nan(j.at("generated_sq_autocorr"));
  r.first_failure = j.value("first_failure", "");
  return r;
}

inline nlohmann::json jaccard_json(const evaluation::JaccardCurve& c) {
  return {{"percentiles", c.percentiles}, {"past", c.past}, {"generated", c.generated}, {"days", c.days}};
}

inline evaluation::JaccardCurve jaccard_from_json(const nlohmann::json& j) {
  evaluation::JaccardCurve c;
  c.percentiles = j.at("percentiles").get<std::vector<double>>();
  c.past = j.at("past").get<std::vector<double>>();
  c.generated = j.at("generated").get<std::vector<double>>();
  c.days = j.at("days").get<std::size_t>();
  return c;
}

/// Mean PnL per day grids of one backtest replicate.
struct BacktestGrid {
  std::vector<std::string> forecasters;
  std::vector<std::size_t> basket_sizes;
  std::array<Matrix, 3> grids;  // long_short, long_only, short_only
  std::size_t days = 0;
};

inline constexpr std::array<har::PnlMode, 3> kPnlModes = {har::PnlMode::LongShort, har::PnlMode::LongOnly,
                                                          har::PnlMode::ShortOnly};

inline BacktestGrid backtest_grid(const har::BacktestResult& r) {
  BacktestGrid g{r.forecasters, r.basket_sizes, {}, r.days.size()};
  for (std::size_t m = 0; m < kPnlModes.size(); ++m) g.grids[m] = r.grid(kPnlModes[m]);
  return g;
}

inline nlohmann::json backtest_json(const BacktestGrid& g, const std::vector<double>& lambdas) {
  nlohmann::json grids = nlohmann::json::object();
  for (std::size_t m = 0; m < kPnlModes.size(); ++m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t f = 0; f < g.forecasters.size(); ++f) rows.push_back(g.grids[m].row(f));
    grids[har::to_string(kPnlModes[m])] = rows;
  }
  nlohmann::json lam = nlohmann::json::array();
  for (double v : lambdas) lam.push_back(detail::num(v));
  return {{"forecasters", g.forecasters}, {"basket_sizes", g.basket_sizes}, {"days", g.days},
          {"lambdas", lam},               {"grids", grids}};
}

inline BacktestGrid backtest_from_json(const nlohmann::json& j) {
  BacktestGrid g;
  g.forecasters = j.at("forecasters").get<std::vector<std::string>>();
  g.basket_sizes = j.at("basket_sizes").get<std::vector<std::size_t>>();
  g.days = j.at("days").get<std::size_t>();
  for (std::size_t m = 0; m < kPnlModes.size(); ++m) {
    const auto rows = j.at("grids").at(har::to_string(kPnlModes[m])).get<std::vector<std::vector<double>>>();
    g.grids[m] = Matrix(g.forecasters.size(), g.basket_sizes.size());
    if (rows.size() != g.forecasters.size()) throw IoError("backtest grid: row count mismatch");
    for (std::size_t f = 0; f < rows.size(); ++f) {
      if (rows[f].size() != g.basket_sizes.size()) throw IoError("backtest grid: column count mismatch");
      for (std::size_t s = 0; s < rows[f].size(); ++s) g.grids[m](f, s) = rows[f][s];
    }
  }
  return g;
}

/// Everything the report is built from. Scores are indexed [dataset][model][replicate]; a missing
/// entry is a failed or blocked evaluation.
struct ReportInputs {
  std::string name;
  std::vector<std::string> datasets;
  std::vector<std::string> models;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<std::vector<std::optional<evaluation::ScoreResult>>>> scores;
  std::vector<std::vector<std::vector<std::optional<evaluation::JaccardCurve>>>> jaccard;
  std::vector<std::optional<BacktestGrid>> backtest;  // per replicate
  std::vector<std::string> failures;

  void validate() const {
    if (models.empty()) throw InvalidParameters("report: empty model roster");
    if (datasets.empty()) throw InvalidParameters("report: no datasets");
    if (seeds.empty()) throw InvalidParameters("report: no replicates");
    if (scores.size() != datasets.size()) throw DimensionError("report: score grid does not match datasets");
    for (const auto& d : scores) {
      if (d.size() != models.size()) throw DimensionError("report: score grid does not match models");
      for (const auto& m : d)
        if (m.size() != seeds.size()) throw DimensionError("report: score grid does not match replicates");
    }
  }
};

/// EMD of each (measure, model) averaged over the replicates that produced a usable score.
inline evaluation::MetricTable mean_table(const ReportInputs& in, std::size_t d) {
  evaluation::MetricTable t(in.models);
  for (std::size_t j = 0; j < in.models.size(); ++j)
    for (std::size_t i = 0; i < evaluation::kMeasures.size(); ++i) {
      double s = 0.0;
      std::size_t n = 0;
      for (const auto& r : in.scores[d][j])
        if (r && !r->flagged && std::isfinite(r->emd[i])) {
          s += r->emd[i];
          ++n;
        }
      if (n) t.set(i, j, s / static_cast<double>(n));
    }
  return t;
}

/// One row per (measure, model): mean, sample std and count over replicates, then one column per seed.
inline std::string seeds_csv(const ReportInputs& in, std::size_t d) {
  std::ostringstream os;
  os << "measure,model,mean,std,n";
  for (auto s : in.seeds) os << ",seed_" << s;
  os << '\n';
  for (std::size_t i = 0; i < evaluation::kMeasures.size(); ++i)
    for (std::size_t j = 0; j < in.models.size(); ++j) {
      std::vector<double> v;
      std::vector<std::string> cells;
      for (const auto& r : in.scores[d][j]) {
        if (r && !r->flagged && std::isfinite(r->emd[i])) {
          v.push_back(r->emd[i]);
          cells.push_back(format_real(r->emd[i]));
        } else {
          cells.emplace_back();
        }
      }
      os << evaluation::kMeasures[i] << ',' << in.models[j] << ',';
      if (!v.empty()) os << format_real(mean(v));
      os << ',';
      if (v.size() >= 2) os << format_real(sample_std(v));
      os << ',' << v.size();
      for (const auto& c : cells) os << ',' << c;
      os << '\n';
    }
  return os.str();
}

/// Per-replicate diagnostics: window counts, failures and the squared-return autocorrelations.
inline std::string diagnostics_csv(const ReportInputs& in, std::size_t d) {
  std::ostringstream os;
  os << "model,seed,windows,failures,flagged,degenerate_real,degenerate_generated,real_sq_autocorr,"
        "generated_sq_autocorr\n";
  auto cell = [](double v) { return std::isfinite(v) ? format_real(v) : std::string(); };
  for (std::size_t j = 0; j < in.models.size(); ++j)
    for (std::size_t r = 0; r < in.seeds.size(); ++r) {
      const auto& s = in.scores[d][j][r];
      if (!s) continue;
      os << in.models[j] << ',' << in.seeds[r] << ',' << s->windows << ',' << s->failures << ','
         << (s->flagged ? 1 : 0) << ',' << s->degenerate_real << ',' << s->degenerate_generated << ','
         << cell(s->real_sq_autocorr) << ',' << cell(s->generated_sq_autocorr) << '\n';
    }
  return os.str();
}

struct MeasureWinner {
  std::string measure;
  std::vector<std::string> models;  // every model attaining the minimum
  double value = std::numeric_limits<double>::quiet_NaN();
};

/// Lowest EMD per measure; exact ties share the win. Missing cells never win.
inline std::vector<MeasureWinner> measure_winners(const evaluation::MetricTable& t) {
  std::vector<MeasureWinner> out;
  for (std::size_t i = 0; i < evaluation::kMeasures.size(); ++i) {
    MeasureWinner w;
    w.measure = std::string(evaluation::kMeasures[i]);
    for (std::size_t j = 0; j < t.model_count(); ++j) {
      const double v = t.at(i, j);
      if (std::isnan(v)) continue;
      if (std::isnan(w.value) || v < w.value) {
        w.value = v;
        w.models = {t.models()[j]};
      } else if (v == w.value) {
        w.models.push_back(t.models()[j]);
      }
    }
    out.push_back(std::move(w));
  }
  return out;
}

/// Jaccard curves averaged over replicates; models without a curve for every replicate are skipped.
inline std::optional<std::string> mean_jaccard_csv(const ReportInputs& in, std::size_t d) {
  if (in.jaccard.size() <= d) return std::nullopt;
  std::vector<std::string> names;
  std::vector<evaluation::JaccardCurve> curves;
  for (std::size_t j = 0; j < in.models.size(); ++j) {
    const auto& reps = in.jaccard[d][j];
    if (reps.empty() || std::any_of(reps.begin(), reps.end(), [](const auto& c) { return !c; })) continue;
    evaluation::JaccardCurve m = *reps[0];
    for (std::size_t r = 1; r < reps.size(); ++r)
      for (std::size_t q = 0; q < m.percentiles.size(); ++q) {
        m.past[q] += reps[r]->past.at(q);
        m.generated[q] += reps[r]->generated.at(q);
      }
    for (std::size_t q = 0; q < m.percentiles.size(); ++q) {
      m.past[q] /= static_cast<double>(reps.size());
      m.generated[q] /= static_cast<double>(reps.size());
    }
    names.push_back(in.models[j]);
    curves.push_back(std::move(m));
  }
  if (curves.empty()) return std::nullopt;
  return evaluation::jaccard_csv(names, curves);
}

/// Backtest grids averaged over the replicates that completed.
inline std::optional<BacktestGrid> mean_backtest(const ReportInputs& in) {
  std::optional<BacktestGrid> out;
  std::size_t n = 0;
  for (const auto& g : in.backtest) {
    if (!g) continue;
    if (!out) {
      out = *g;
    } else {
      if (g->forecasters != out->forecasters || g->basket_sizes != out->basket_sizes)
        throw InvalidParameters("report: backtest replicates disagree on layout");
      for (std::size_t m = 0; m < 3; ++m)
        for (std::size_t k = 0; k < g->grids[m].size(); ++k) out->grids[m].data()[k] += g->grids[m].data()[k];
    }
    ++n;
  }
  if (out)
    for (auto& g : out->grids)
      for (double& v : g.data()) v /= static_cast<double>(n);
  return out;
}

inline std::string backtest_grid_csv(const BacktestGrid& g) {
  std::ostringstream os;
  os << "mode,forecaster";
  for (auto n : g.basket_sizes) os << ",n" << n;
  os << '\n';
  for (std::size_t m = 0; m < 3; ++m)
    for (std::size_t f = 0; f < g.forecasters.size(); ++f) {
      os << har::to_string(kPnlModes[m]) << ',' << g.forecasters[f];
      for (std::size_t s = 0; s < g.basket_sizes.size(); ++s) os << ',' << format_real(g.grids[m](f, s));
      os << '\n';
    }
  return os.str();
}

inline std::string backtest_seeds_csv(const ReportInputs& in) {
  std::ostringstream os;
  bool header = false;
  for (std::size_t r = 0; r < in.backtest.size(); ++r) {
    const auto& g = in.backtest[r];
    if (!g) continue;
    if (!header) {
      os << "seed,mode,forecaster";
      for (auto n : g->basket_sizes) os << ",n" << n;
      os << '\n';
      header = true;
    }
    for (std::size_t m = 0; m < 3; ++m)
      for (std::size_t f = 0; f < g->forecasters.size(); ++f) {
        os << in.seeds.at(r) << ',' << har::to_string(kPnlModes[m]) << ',' << g->forecasters[f];
        for (std::size_t s = 0; s < g->basket_sizes.size(); ++s) os << ',' << format_real(g->grids[m](f, s));
        os << '\n';
      }
  }
  return os.str();
}

namespace detail {

inline std::string fixed(double v, int digits = 4) {
  if (!std::isfinite(v)) return "n/a";
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

inline std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? sep : "") + v[k];
  return out;
}

}  // namespace detail

/// Plain-text summary naming the per-measure winners of every dataset.
inline std::string summary_text(const ReportInputs& in, const std::vector<evaluation::MetricTable>& tables,
                                const std::optional<evaluation::RankSummary>& ranks,
                                const std::optional<BacktestGrid>& backtest) {
  std::ostringstream os;
  os << "experiment " << in.name << '\n';
  std::vector<std::string> seeds;
  for (auto s : in.seeds) seeds.push_back(std::to_string(s));
  os << "replicates " << in.seeds.size() << " (seeds " << detail::join(seeds, ", ") << ")\n";
  for (std::size_t d = 0; d < in.datasets.size(); ++d) {
    os << "\ndataset " << in.datasets[d] << ": lowest mean EMD per measure\n";
    for (const auto& w : measure_winners(tables[d])) {
      os << "  " << w.measure << ": ";
      if (w.models.empty()) os << "no complete scores\n";
      else os << detail::join(w.models, ", ") << " (" << detail::fixed(w.value) << ")\n";
    }
  }
  if (ranks) {
    os << "\ncombined rank (mean over measures and datasets, lower is better)\n";
    for (std::size_t k = 0; k < ranks->ranking.size(); ++k)
      os << "  " << k + 1 << ". " << ranks->ranking[k].model << ' ' << detail::fixed(ranks->ranking[k].combined, 2)
         << '\n';
    for (const auto& n : ranks->notices) os << "  note: " << n << '\n';
  }
  if (backtest) {
    os << "\nbacktest: mean long/short PnL per day (theta units)\n";
    for (std::size_t f = 0; f < backtest->forecasters.size(); ++f) {
      os << "  " << backtest->forecasters[f] << ':';
      for (std::size_t s = 0; s < backtest->basket_sizes.size(); ++s)
        os << " n" << backtest->basket_sizes[s] << '=' << detail::fixed(backtest->grids[0](f, s));
      os << '\n';
    }
  }
  if (!in.failures.empty()) {
    os << "\nfailures\n";
    for (const auto& f : in.failures) os << "  " << f << '\n';
  }
  return os.str();
}

/// Writes the report files into `dir` and returns their names.
inline std::vector<std::string> emit_report(const std::filesystem::path& dir, const ReportInputs& in) {
  in.validate();
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  auto put = [&](const std::string& name, const std::string& text) {
    write_file((dir / name).string(), text);
    files.push_back(name);
  };
  std::vector<evaluation::MetricTable> tables;
  for (std::size_t d = 0; d < in.datasets.size(); ++d) {
    tables.push_back(mean_table(in, d));
    put(in.datasets[d] + "_metrics.csv", evaluation::to_csv(tables.back()));
    put(in.datasets[d] + "_metrics_seeds.csv", seeds_csv(in, d));
    put(in.datasets[d] + "_diagnostics.csv", diagnostics_csv(in, d));
    if (auto j = mean_jaccard_csv(in, d)) put(in.datasets[d] + "_jaccard.csv", *j);
  }
  std::optional<evaluation::RankSummary> ranks;
  try {
    ranks = evaluation::combined_rank(tables, in.datasets);
    put("ranks.csv", evaluation::to_csv(*ranks));
  } catch (const InvalidParameters&) {
    // no model has a complete row in every dataset; the summary says so
  }
  const auto bt = mean_backtest(in);
  if (bt) {
    put("backtest_grid.csv", backtest_grid_csv(*bt));
    put("backtest_seeds.csv", backtest_seeds_csv(in));
  }
  put("summary.txt", summary_text(in, tables, ranks, bt));
  return files;
}

}  // namespace ftsbench::pipeline
