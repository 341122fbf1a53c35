#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ftsbench/core/error.hpp"
#include "ftsbench/generators/panel_io.hpp"

namespace ftsbench::evaluation {

inline constexpr std::array<std::string_view, 10> kMeasures = {
    "Corr", "Kurt", "Mean", "Skew", "Std", "Corr_R", "Kurt_R", "Mean_R", "Skew_R", "Std_R"};

enum Measure : std::size_t { Corr, Kurt, Mean, Skew, Std, CorrR, KurtR, MeanR, SkewR, StdR };

inline std::size_t measure_index(std::string_view name) {
  for (std::size_t i = 0; i < kMeasures.size(); ++i)
    if (kMeasures[i] == name) return i;
  throw InvalidParameters("unknown measure '" + std::string(name) + "'");
}

/// EMD per (measure, model). NaN marks a missing cell.
class MetricTable {
 public:
  MetricTable() = default;
  explicit MetricTable(std::vector<std::string> models) : models_(std::move(models)) {
    values_.assign(kMeasures.size() * models_.size(), std::numeric_limits<double>::quiet_NaN());
  }

  const std::vector<std::string>& models() const noexcept { return models_; }
  std::size_t model_count() const noexcept { return models_.size(); }

  std::size_t model_index(std::string_view name) const {
    for (std::size_t j = 0; j < models_.size(); ++j)
      if (models_[j] == name) return j;
    throw InvalidParameters("unknown model '" + std::string(name) + "'");
  }

  std::size_t add_model(std::string name) {
    for (const auto& m : models_)
      if (m == name) throw InvalidParameters("duplicate model '" + name + "'");
    std::vector<double> next(kMeasures.size() * (models_.size() + 1), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < kMeasures.size(); ++i)
      for (std::size_t j = 0; j < models_.size(); ++j) next[i * (models_.size() + 1) + j] = at(i, j);
    models_.push_back(std::move(name));
    values_ = std::move(next);
    return models_.size() - 1;
  }

  double at(std::size_t measure, std::size_t model) const { return values_.at(measure * models_.size() + model); }

  void set(std::size_t measure, std::size_t model, double v) {
    if (!std::isnan(v) && !(v >= 0.0)) throw InvalidParameters("metric table: EMD values must be >= 0");
    values_.at(measure * models_.size() + model) = v;
  }

  double get(std::string_view measure, std::string_view model) const {
    return at(measure_index(measure), model_index(model));
  }

  bool complete(std::size_t model) const {
    for (std::size_t i = 0; i < kMeasures.size(); ++i)
      if (std::isnan(at(i, model))) return false;
    return true;
  }

  bool operator==(const MetricTable&) const = default;

 private:
  std::vector<std::string> models_;
  std::vector<double> values_;  // measure-major
};

/// Rows are measures, columns are models; empty cells are missing values.
inline std::string to_csv(const MetricTable& t) {
  std::string out = "measure";
  for (const auto& m : t.models()) out += "," + m;
  out += "\n";
  for (std::size_t i = 0; i < kMeasures.size(); ++i) {
    out += kMeasures[i];
    for (std::size_t j = 0; j < t.model_count(); ++j) {
      out += ",";
      if (!std::isnan(t.at(i, j))) out += generators::format_real(t.at(i, j));
    }
    out += "\n";
  }
  return out;
}

inline MetricTable metric_table_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(in, line)) throw IoError("metric table: empty input");
  auto header = split(line);
  if (header.empty() || header[0] != "measure") throw IoError("metric table: bad header");
  MetricTable t(std::vector<std::string>(header.begin() + 1, header.end()));
  std::vector<bool> seen(kMeasures.size(), false);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != header.size()) throw IoError("metric table: ragged row '" + line + "'");
    const std::size_t i = measure_index(cells[0]);
    seen[i] = true;
    for (std::size_t j = 1; j < cells.size(); ++j) {
      if (cells[j].empty()) continue;
      try {
        t.set(i, j - 1, std::stod(cells[j]));
      } catch (const std::logic_error&) {
        throw IoError("metric table: bad value '" + cells[j] + "'");
      }
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i]) throw IoError("metric table: missing row " + std::string(kMeasures[i]));
  return t;
}

/// 1-based ascending ranks; tied values share the mean of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t s = 0; s < order.size();) {
    std::size_t e = s + 1;
    while (e < order.size() && values[order[e]] == values[order[s]]) ++e;
    const double r = 0.5 * static_cast<double>(s + 1 + e);
    for (std::size_t k = s; k < e; ++k) ranks[order[k]] = r;
    s = e;
  }
  return ranks;
}

struct RankedModel {
  std::string model;
  std::vector<double> per_dataset;
  double combined = 0.0;
};

struct RankSummary {
  std::vector<std::string> datasets;
  std::vector<RankedModel> ranking;  // ascending combined rank
  std::vector<std::string> notices;
};

/// Per measure, rank models by EMD; average over measures per dataset and then over datasets.
/// Models with a missing cell in any table are excluded before ranking.
inline RankSummary combined_rank(const std::vector<MetricTable>& tables, std::vector<std::string> datasets = {}) {
  if (tables.empty()) throw InvalidParameters("combined rank: no tables");
  if (datasets.empty())
    for (std::size_t d = 0; d < tables.size(); ++d) datasets.push_back("dataset" + std::to_string(d));
  if (datasets.size() != tables.size()) throw InvalidParameters("combined rank: dataset names do not match tables");
  RankSummary out;
  out.datasets = datasets;
  std::vector<std::string> models;
  for (const auto& m : tables[0].models()) {
    bool keep = true;
    for (std::size_t d = 0; d < tables.size(); ++d) {
      const auto& ms = tables[d].models();
      if (std::find(ms.begin(), ms.end(), m) == ms.end())
        throw InvalidParameters("combined rank: model '" + m + "' missing from table " + datasets[d]);
      if (!tables[d].complete(tables[d].model_index(m))) {
        out.notices.push_back("excluded " + m + ": missing values in " + datasets[d]);
        keep = false;
        break;
      }
    }
    if (keep) models.push_back(m);
  }
  for (const auto& t : tables)
    if (t.model_count() != tables[0].model_count())
      throw InvalidParameters("combined rank: tables have different model sets");
  if (models.empty()) throw InvalidParameters("combined rank: no complete models");

  std::vector<RankedModel> ranked(models.size());
  for (std::size_t k = 0; k < models.size(); ++k) ranked[k].model = models[k];
  for (std::size_t d = 0; d < tables.size(); ++d) {
    std::vector<double> mean_rank(models.size(), 0.0);
    for (std::size_t i = 0; i < kMeasures.size(); ++i) {
      std::vector<double> row;
      for (const auto& m : models) row.push_back(tables[d].at(i, tables[d].model_index(m)));
      const auto r = average_ranks(row);
      for (std::size_t k = 0; k < models.size(); ++k) mean_rank[k] += r[k] / static_cast<double>(kMeasures.size());
    }
    for (std::size_t k = 0; k < models.size(); ++k) ranked[k].per_dataset.push_back(mean_rank[k]);
  }
  for (auto& r : ranked) {
    for (double v : r.per_dataset) r.combined += v;
    r.combined /= static_cast<double>(tables.size());
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedModel& a, const RankedModel& b) { return a.combined < b.combined; });
  out.ranking = std::move(ranked);
  return out;
}

inline std::string to_csv(const RankSummary& s) {
  std::string out = "model";
  for (const auto& d : s.datasets) out += "," + d;
  out += ",combined\n";
  for (const auto& r : s.ranking) {
    out += r.model;
    for (double v : r.per_dataset) out += "," + generators::format_real(v);
    out += "," + generators::format_real(r.combined) + "\n";
  }
  return out;
}

}  // namespace ftsbench::evaluation
