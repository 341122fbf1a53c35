#pragma once

#include <cstring>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "ftsbench/core/parallel.hpp"
#include "ftsbench/evaluation/sampler.hpp"
#include "ftsbench/generators/dataset.hpp"
#include "ftsbench/parametric/dcc.hpp"
#include "ftsbench/parametric/fit_io.hpp"

namespace ftsbench::pipeline {

/// Byte key of a condition window, for content lookups.
inline std::string window_key(const Matrix& m) {
  std::string k(m.size() * sizeof(double), '\0');
  std::memcpy(k.data(), m.data().data(), k.size());
  return k;
}

/// Continuations simulated from one DCC fit, filtered through each condition window.
inline evaluation::Sampler dcc_sampler(parametric::DccFit fit, std::size_t horizon) {
  auto f = std::make_shared<const parametric::DccFit>(std::move(fit));
  return [f, horizon](const Matrix& cond, std::size_t batch, std::uint64_t seed) {
    return parametric::simulate_from_fit(*f, cond, horizon, batch, seed);
  };
}

/// A DCC fit estimated on one condition window only.
struct WindowFit {
  std::size_t start = 0;
  std::optional<parametric::DccFit> fit;
  bool carried_forward = false;
  std::string failure;
};

/// Fits the condition window at each start (rows start .. start + condition - 1). A failed
/// window reuses the most recent earlier fit and is flagged.
inline std::vector<WindowFit> fit_condition_windows(const Matrix& returns, const std::vector<std::size_t>& starts,
                                                    std::size_t condition, parametric::InnovationLaw law,
                                                    std::size_t jobs = 1) {
  std::vector<WindowFit> out(starts.size());
  parallel_for(starts.size(), jobs, [&](std::size_t k) {
    out[k].start = starts[k];
    try {
      out[k].fit = parametric::fit_dcc(returns.row_range(starts[k], starts[k] + condition), law,
                                       {parametric::FitSchedule::Mode::FullTrain, condition});
    } catch (const Error& e) {
      out[k].failure = e.what();
    }
  });
  std::optional<parametric::DccFit> last;
  for (auto& w : out) {
    if (w.fit) {
      last = w.fit;
    } else {
      w.carried_forward = true;
      if (last) {
        w.fit = last;
        w.fit->carried_forward = true;
      }
    }
  }
  return out;
}

inline nlohmann::json window_fits_json(const std::vector<WindowFit>& fits) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& w : fits) {
    nlohmann::json j = {{"start", w.start}, {"carried_forward", w.carried_forward}};
    j["fit"] = w.fit ? nlohmann::json(*w.fit) : nlohmann::json(nullptr);
    if (!w.failure.empty()) j["failure"] = w.failure;
    arr.push_back(std::move(j));
  }
  return arr;
}

inline std::vector<WindowFit> window_fits_from_json(const nlohmann::json& arr) {
  std::vector<WindowFit> out;
  for (const auto& j : arr) {
    WindowFit w;
    w.start = j.at("start").get<std::size_t>();
    w.carried_forward = j.at("carried_forward").get<bool>();
    if (!j.at("fit").is_null()) w.fit = j.at("fit").get<parametric::DccFit>();
    w.failure = j.value("failure", "");
    out.push_back(std::move(w));
  }
  return out;
}

/// Sampler that looks up the per-window fit of each condition window of `returns` by content.
inline evaluation::Sampler rolling_dcc_sampler(const Matrix& returns, const std::vector<WindowFit>& fits,
                                               std::size_t condition, std::size_t horizon) {
  auto index = std::make_shared<std::unordered_map<std::string, std::shared_ptr<const WindowFit>>>();
  for (const auto& w : fits)
    index->emplace(window_key(generators::window_of(returns, w.start, condition)), std::make_shared<const WindowFit>(w));
  return [index, horizon](const Matrix& cond, std::size_t batch, std::uint64_t seed) {
    const auto it = index->find(window_key(cond));
    if (it == index->end()) throw InvalidParameters("rolling dcc: no fit for this condition window");
    const WindowFit& w = *it->second;
    if (!w.fit) throw DegenerateData("rolling dcc: window " + std::to_string(w.start) + " has no fit: " + w.failure);
    return parametric::simulate_from_fit(*w.fit, cond, horizon, batch, seed);
  };
}

}  // namespace ftsbench::pipeline
