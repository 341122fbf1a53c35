#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "json.hpp"

#include "ftsbench/core/error.hpp"
#include "ftsbench/parametric/dcc.hpp"

namespace ftsbench::parametric {

inline constexpr int kFitSchemaVersion = 1;

inline std::string law_name(InnovationLaw law) { return law == InnovationLaw::Normal ? "normal" : "student_t"; }

inline InnovationLaw parse_law(const std::string& s) {
  if (s == "normal") return InnovationLaw::Normal;
  if (s == "student_t" || s == "t") return InnovationLaw::StudentT;
  throw ConfigError("unknown innovation law '" + s + "'");
}

namespace detail {

// JSON has no infinity; an absent or null nu means the normal law.
inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline double value_or_inf(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<double>();
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const Garch11Fit& f) {
  j = {{"mu", f.mu},
       {"omega", f.omega},
       {"alpha", f.alpha},
       {"beta", f.beta},
       {"law", law_name(f.law)},
       {"nu", detail::finite_or_null(f.nu)},
       {"log_likelihood", detail::finite_or_null(f.log_likelihood)},
       {"last_variance", f.last_variance},
       {"last_residual", f.last_residual},
       {"converged", f.converged},
       {"observations", f.observations},
       {"dynamics_significant", f.dynamics_significant}};
}

inline void from_json(const nlohmann::json& j, Garch11Fit& f) {
  f = Garch11Fit{};
  f.mu = j.at("mu").get<double>();
  f.omega = j.at("omega").get<double>();
  f.alpha = j.at("alpha").get<double>();
  f.beta = j.at("beta").get<double>();
  f.law = parse_law(j.value("law", "normal"));
  f.nu = detail::value_or_inf(j, "nu", std::numeric_limits<double>::infinity());
  f.log_likelihood = detail::value_or_inf(j, "log_likelihood", -std::numeric_limits<double>::infinity());
  f.last_variance = j.value("last_variance", 0.0);
  f.last_residual = j.value("last_residual", 0.0);
  f.converged = j.value("converged", false);
  f.observations = j.value("observations", std::size_t{0});
  f.dynamics_significant = j.value("dynamics_significant", true);
}

inline nlohmann::json matrix_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.storage()}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

inline void to_json(nlohmann::json& j, const DccFit& f) {
  j = {{"schema_version", kFitSchemaVersion},
       {"model", "dcc_garch11"},
       {"assets", f.assets},
       {"a", f.a},
       {"b", f.b},
       {"qbar", matrix_json(f.qbar)},
       {"law", law_name(f.law)},
       {"nu", detail::finite_or_null(f.nu)},
       {"last_q", matrix_json(f.last_q)},
       {"log_likelihood", detail::finite_or_null(f.log_likelihood)},
       {"converged", f.converged},
       {"boundary", f.boundary},
       {"dynamics_significant", f.dynamics_significant},
       {"carried_forward", f.carried_forward}};
}

inline void from_json(const nlohmann::json& j, DccFit& f) {
  const int version = j.value("schema_version", 0);
  if (version != kFitSchemaVersion)
    throw IoError("dcc fit: unsupported schema_version " + std::to_string(version));
  f = DccFit{};
  f.assets = j.at("assets").get<std::vector<Garch11Fit>>();
  f.a = j.at("a").get<double>();
  f.b = j.at("b").get<double>();
  f.qbar = matrix_from_json(j.at("qbar"));
  f.law = parse_law(j.value("law", "normal"));
  f.nu = detail::value_or_inf(j, "nu", std::numeric_limits<double>::infinity());
  f.last_q = matrix_from_json(j.at("last_q"));
  f.log_likelihood = detail::value_or_inf(j, "log_likelihood", -std::numeric_limits<double>::infinity());
  f.converged = j.value("converged", false);
  f.boundary = j.value("boundary", false);
  f.dynamics_significant = j.value("dynamics_significant", true);
  f.carried_forward = j.value("carried_forward", false);
  f.validate();
}

}  // namespace ftsbench::parametric
