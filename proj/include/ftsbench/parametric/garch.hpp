#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/optimize.hpp"

namespace ftsbench::parametric {

enum class InnovationLaw { Normal, StudentT };

inline constexpr double kNuMin = 2.1;
inline constexpr double kNuMax = 100.0;
inline constexpr double kPersistenceCap = 0.9999;
inline constexpr std::size_t kMinObservations = 30;

/// GARCH(1,1) with constant mean: r_t = mu + eps_t, s2_t = omega + alpha eps_{t-1}^2 + beta s2_{t-1}.
struct Garch11Fit {
  double mu = 0.0;
  double omega = 1e-6;
  double alpha = 0.0;
  double beta = 0.0;
  InnovationLaw law = InnovationLaw::Normal;
  double nu = std::numeric_limits<double>::infinity();
  double log_likelihood = -std::numeric_limits<double>::infinity();
  double last_variance = 0.0;
  double last_residual = 0.0;
  bool converged = false;
  std::size_t observations = 0;
  bool dynamics_significant = true;  // false: the constant-variance model was kept
  double best_restart_log_likelihood = -std::numeric_limits<double>::infinity();
  std::vector<double> restart_log_likelihoods;

  double persistence() const noexcept { return alpha + beta; }
  double unconditional_variance() const { return omega / (1.0 - persistence()); }

  void validate() const {
    if (!(omega > 0.0) || alpha < 0.0 || beta < 0.0 || !(persistence() < 1.0))
      throw InvalidParameters("garch fit: needs omega > 0, alpha, beta >= 0, alpha + beta < 1");
    if (law == InnovationLaw::StudentT && !(nu > 2.0)) throw InvalidParameters("garch fit: nu must exceed 2");
  }
};

/// Log density of a unit-variance Student-t with nu degrees of freedom at z, minus log(sigma).
inline double student_t_log_density(double eps2_over_var, double nu) {
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(std::numbers::pi * (nu - 2.0)) -
         0.5 * (nu + 1.0) * std::log1p(eps2_over_var / (nu - 2.0));
}

inline double sample_mean(std::span<const double> r) {
  double s = 0.0;
  for (double v : r) s += v;
  return s / static_cast<double>(r.size());
}

inline double sample_variance(std::span<const double> r) {
  const double m = sample_mean(r);
  double s = 0.0;
  for (double v : r) s += (v - m) * (v - m);
  return s / static_cast<double>(r.size());
}

/// Conditional variances s2_1..s2_T; s2_1 is the sample-variance backcast.
inline std::vector<double> garch_variances(const Garch11Fit& f, std::span<const double> r, double backcast) {
  std::vector<double> s2(r.size());
  double prev = backcast;
  for (std::size_t t = 0; t < r.size(); ++t) {
    if (t > 0) {
      const double e = r[t - 1] - f.mu;
      prev = f.omega + f.alpha * e * e + f.beta * prev;
    }
    s2[t] = prev;
  }
  return s2;
}

inline double garch_log_likelihood(const Garch11Fit& f, std::span<const double> r, double backcast) {
  const auto s2 = garch_variances(f, r, backcast);
  double ll = 0.0;
  for (std::size_t t = 0; t < r.size(); ++t) {
    const double e = r[t] - f.mu;
    if (!(s2[t] > 0.0)) return -std::numeric_limits<double>::infinity();
    if (f.law == InnovationLaw::Normal) {
      ll += -0.5 * (std::log(2.0 * std::numbers::pi) + std::log(s2[t]) + e * e / s2[t]);
    } else {
      ll += student_t_log_density(e * e / s2[t], f.nu) - 0.5 * std::log(s2[t]);
    }
  }
  return ll;
}

namespace detail {

struct GarchScale {
  double mean;
  double sd;
  double var;
};

/// x = (m, w, u, v[, q]) -> mu = mean + m sd, omega = e^w var, alpha + beta = cap * logistic(u),
/// alpha = (alpha + beta) logistic(v), nu = 2.1 + 97.9 logistic(q). The constant-variance
/// model drops u and v.
inline Garch11Fit decode(std::span<const double> x, const GarchScale& sc, InnovationLaw law,
                         bool constant = false) {
  Garch11Fit f;
  f.law = law;
  f.mu = sc.mean + x[0] * sc.sd;
  f.omega = std::exp(x[1]) * sc.var;
  std::size_t k = 2;
  if (!constant) {
    const double s = kPersistenceCap * logistic(x[2]);
    f.alpha = s * logistic(x[3]);
    f.beta = s - f.alpha;
    k = 4;
  }
  if (law == InnovationLaw::StudentT) f.nu = kNuMin + (kNuMax - kNuMin) * logistic(x[k]);
  return f;
}

inline std::vector<double> encode(double alpha, double beta, double nu, InnovationLaw law) {
  const double s = alpha + beta;
  std::vector<double> x{0.0, std::log(1.0 - s), logit(s / kPersistenceCap), logit(alpha / s)};
  if (law == InnovationLaw::StudentT) x.push_back(logit((nu - kNuMin) / (kNuMax - kNuMin)));
  return x;
}

/// 95% quantile of chi-square with 2 degrees of freedom.
inline constexpr double kChi2Df2Q95 = 5.991464547107979;

}  // namespace detail

struct GarchOptions {
  BfgsOptions bfgs;
  /// Likelihood-ratio test of (alpha, beta) against the constant-variance model. When the
  /// statistic is below this critical value, beta is not identified and the constant model is
  /// reported. Set to 0 to always keep the unrestricted fit.
  double lr_critical = detail::kChi2Df2Q95;
};

/// Maximum-likelihood GARCH(1,1). Five (alpha, beta) starting points are optimized with BFGS in
/// an unconstrained reparameterization; the highest likelihood wins.
inline Garch11Fit fit_garch11(std::span<const double> r, InnovationLaw law = InnovationLaw::Normal,
                              const GarchOptions& options = {}) {
  if (r.size() < kMinObservations)
    throw DegenerateData("garch: need at least " + std::to_string(kMinObservations) + " observations, got " +
                         std::to_string(r.size()));
  for (double v : r)
    if (!std::isfinite(v)) throw NonFiniteError("garch: non-finite return");
  const double var = sample_variance(r);
  const double mean = sample_mean(r);
  double raw = 0.0;
  for (double v : r) raw += v * v;
  if (!(var > 1e-14 * raw / static_cast<double>(r.size())) || !(var > 0.0))
    throw DegenerateData("degenerate variance");
  const detail::GarchScale sc{mean, std::sqrt(var), var};
  const double n = static_cast<double>(r.size());
  const Objective objective = [&](std::span<const double> x) {
    const double ll = garch_log_likelihood(detail::decode(x, sc, law), r, var);
    return std::isfinite(ll) ? -ll / n : std::numeric_limits<double>::infinity();
  };
  static constexpr double starts[5][2] = {{0.05, 0.90}, {0.10, 0.85}, {0.02, 0.95}, {0.15, 0.70}, {0.05, 0.60}};
  Garch11Fit best;
  std::vector<double> restarts;
  bool any = false;
  for (const auto& s : starts) {
    const MinimizeResult res = minimize_bfgs(objective, detail::encode(s[0], s[1], 8.0, law), options.bfgs);
    restarts.push_back(-res.value * n);
    if (!std::isfinite(res.value)) continue;
    Garch11Fit f = detail::decode(res.x, sc, law);
    f.log_likelihood = -res.value * n;
    f.converged = res.converged;
    if (!any || f.log_likelihood > best.log_likelihood) {
      best = f;
      any = true;
    }
  }
  if (!any) throw DegenerateData("garch: likelihood not finite at any start");
  best.best_restart_log_likelihood = best.log_likelihood;
  best.restart_log_likelihoods = std::move(restarts);

  if (options.lr_critical > 0.0) {
    const Objective constant = [&](std::span<const double> x) {
      const double ll = garch_log_likelihood(detail::decode(x, sc, law, true), r, var);
      return std::isfinite(ll) ? -ll / n : std::numeric_limits<double>::infinity();
    };
    std::vector<double> x0{0.0, 0.0};
    if (law == InnovationLaw::StudentT) x0.push_back(logit((8.0 - kNuMin) / (kNuMax - kNuMin)));
    const MinimizeResult res = minimize_bfgs(constant, x0, options.bfgs);
    const double ll0 = -res.value * n;
    if (std::isfinite(ll0) && 2.0 * (best.log_likelihood - ll0) < options.lr_critical) {
      Garch11Fit c = detail::decode(res.x, sc, law, true);
      c.log_likelihood = ll0;
      c.converged = res.converged;
      c.dynamics_significant = false;
      c.best_restart_log_likelihood = best.best_restart_log_likelihood;
      c.restart_log_likelihoods = std::move(best.restart_log_likelihoods);
      best = std::move(c);
    }
  }
  // One-step-ahead variance after the last observation.
  const auto s2 = garch_variances(best, r, var);
  const double e = r.back() - best.mu;
  best.last_residual = e;
  best.last_variance = best.omega + best.alpha * e * e + best.beta * s2.back();
  best.observations = r.size();
  return best;
}

}  // namespace ftsbench::parametric
