#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/matrix.hpp"
#include "ftsbench/core/optimize.hpp"
#include "ftsbench/core/random.hpp"
#include "ftsbench/parametric/garch.hpp"

namespace ftsbench::parametric {

struct FitSchedule {
  enum class Mode { FullTrain, Rolling };
  Mode mode = Mode::FullTrain;
  std::size_t window = 40;
};

/// Two-stage DCC: per-asset GARCH(1,1), then
/// Q_t = (1 - a - b) Qbar + a e_{t-1} e_{t-1}' + b Q_{t-1}, R_t = diag(Q_t)^{-1/2} Q_t diag(Q_t)^{-1/2}.
struct DccFit {
  std::vector<Garch11Fit> assets;
  double a = 0.0;
  double b = 0.0;
  Matrix qbar;
  InnovationLaw law = InnovationLaw::Normal;
  double nu = std::numeric_limits<double>::infinity();
  Matrix last_q;
  double log_likelihood = -std::numeric_limits<double>::infinity();  // stage 2
  bool converged = false;
  bool boundary = false;               // a + b numerically at the stationarity bound
  bool dynamics_significant = true;    // false: constant correlation kept
  bool carried_forward = false;        // set by rolling_refit

  std::size_t instruments() const noexcept { return assets.size(); }

  void validate() const {
    if (assets.size() < 2) throw InvalidParameters("dcc fit: needs at least 2 assets");
    if (a < 0.0 || b < 0.0 || !(a + b < 1.0)) throw InvalidParameters("dcc fit: needs a, b >= 0 and a + b < 1");
    if (qbar.rows() != assets.size() || qbar.cols() != assets.size()) throw DimensionError("dcc fit: Qbar shape");
    if (!is_symmetric(qbar, 1e-10)) throw InvalidParameters("dcc fit: Qbar not symmetric");
    if (law == InnovationLaw::StudentT && !(nu > 2.0)) throw InvalidParameters("dcc fit: nu must exceed 2");
    for (const auto& g : assets) g.validate();
  }
};

inline Matrix correlation_from_q(const Matrix& q) {
  const std::size_t n = q.rows();
  Matrix r(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) r(i, j) = q(i, j) / std::sqrt(q(i, i) * q(j, j));
  for (std::size_t i = 0; i < n; ++i) r(i, i) = 1.0;
  return r;
}

inline void dcc_update(Matrix& q, const Matrix& qbar, double a, double b, std::span<const double> e) {
  const std::size_t n = q.rows();
  const double c = 1.0 - a - b;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) q(i, j) = c * qbar(i, j) + a * e[i] * e[j] + b * q(i, j);
}

/// Standardized residuals (T x N) from per-asset fits, variances backcast with sample variance.
inline Matrix standardized_residuals(const std::vector<Garch11Fit>& assets, const Matrix& returns) {
  Matrix e(returns.rows(), returns.cols());
  for (std::size_t i = 0; i < returns.cols(); ++i) {
    const auto col = returns.col(i);
    const auto s2 = garch_variances(assets[i], col, sample_variance(col));
    for (std::size_t t = 0; t < returns.rows(); ++t) e(t, i) = (col[t] - assets[i].mu) / std::sqrt(s2[t]);
  }
  return e;
}

inline double multivariate_t_constant(double nu, std::size_t n) {
  const double dn = static_cast<double>(n);
  return std::lgamma(0.5 * (nu + dn)) - std::lgamma(0.5 * nu) - 0.5 * dn * std::log(std::numbers::pi * (nu - 2.0));
}

/// Stage-2 log-likelihood. Normal: correlation term only. Student-t: full standardized
/// multivariate-t density of e_t.
inline double dcc_log_likelihood(const Matrix& e, const Matrix& qbar, double a, double b, InnovationLaw law,
                                 double nu) {
  const std::size_t n = e.cols();
  Matrix q = qbar;
  const double tconst = law == InnovationLaw::StudentT ? multivariate_t_constant(nu, n) : 0.0;
  double ll = 0.0;
  for (std::size_t t = 0; t < e.rows(); ++t) {
    const auto et = e.row(t);
    Matrix l;
    try {
      l = cholesky(correlation_from_q(q));
    } catch (const NotPositiveDefinite&) {
      return -std::numeric_limits<double>::infinity();
    }
    const auto x = cholesky_solve(l, et);
    double quad = 0.0, ee = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      quad += et[i] * x[i];
      ee += et[i] * et[i];
    }
    const double logdet = log_det_from_cholesky(l);
    if (law == InnovationLaw::Normal) {
      ll += -0.5 * (logdet + quad - ee);
    } else {
      ll += tconst - 0.5 * logdet - 0.5 * (nu + static_cast<double>(n)) * std::log1p(quad / (nu - 2.0));
    }
    dcc_update(q, qbar, a, b, et);
  }
  return ll;
}

struct DccOptions {
  GarchOptions garch;
  BfgsOptions bfgs;
  /// Likelihood-ratio critical value for (a, b) against constant correlation; 0 disables.
  double lr_critical = detail::kChi2Df2Q95;
  double boundary_tolerance = 1e-3;
};

/// Two-stage estimation on a T x N panel. For the rolling schedule only the trailing window is used.
inline DccFit fit_dcc(const Matrix& returns, InnovationLaw law = InnovationLaw::Normal,
                      const FitSchedule& schedule = {}, const DccOptions& options = {}) {
  if (returns.cols() < 2) throw InvalidParameters("multivariate model requires N ≥ 2");
  const Matrix data = schedule.mode == FitSchedule::Mode::Rolling && returns.rows() > schedule.window
                          ? returns.row_range(returns.rows() - schedule.window, returns.rows())
                          : returns;
  const std::size_t n = data.cols();
  DccFit fit;
  fit.law = law;
  for (std::size_t i = 0; i < n; ++i) {
    try {
      fit.assets.push_back(fit_garch11(data.col(i), law, options.garch));
    } catch (const Error& err) {
      throw DegenerateData("dcc stage 1 failed for asset " + std::to_string(i) + ": " + err.what());
    }
  }
  const Matrix e = standardized_residuals(fit.assets, data);
  const double tn = static_cast<double>(data.rows());
  fit.qbar = Matrix(n, n);
  for (std::size_t t = 0; t < data.rows(); ++t)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) fit.qbar(i, j) += e(t, i) * e(t, j) / tn;

  const bool student = law == InnovationLaw::StudentT;
  auto decode_nu = [](double q) { return kNuMin + (kNuMax - kNuMin) * logistic(q); };
  const Objective objective = [&](std::span<const double> x) {
    const double s = kPersistenceCap * logistic(x[0]);
    const double a = s * logistic(x[1]);
    const double ll = dcc_log_likelihood(e, fit.qbar, a, s - a, law, student ? decode_nu(x[2]) : 0.0);
    return std::isfinite(ll) ? -ll / tn : std::numeric_limits<double>::infinity();
  };
  static constexpr double starts[3][2] = {{0.05, 0.90}, {0.02, 0.97}, {0.10, 0.60}};
  const double nu0 = logit((8.0 - kNuMin) / (kNuMax - kNuMin));
  MinimizeResult best;
  for (const auto& st : starts) {
    std::vector<double> x0{logit((st[0] + st[1]) / kPersistenceCap), logit(st[0] / (st[0] + st[1]))};
    if (student) x0.push_back(nu0);
    MinimizeResult res = minimize_bfgs(objective, x0, options.bfgs);
    if (std::isfinite(res.value) && (best.x.empty() || res.value < best.value)) best = std::move(res);
  }
  if (best.x.empty()) throw DegenerateData("dcc stage 2: likelihood not finite at any start");
  const double s = kPersistenceCap * logistic(best.x[0]);
  fit.a = s * logistic(best.x[1]);
  fit.b = s - fit.a;
  if (student) fit.nu = decode_nu(best.x[2]);
  fit.log_likelihood = -best.value * tn;
  fit.converged = best.converged;

  if (options.lr_critical > 0.0) {
    double ll0 = -std::numeric_limits<double>::infinity(), nu_c = fit.nu;
    if (student) {
      const Objective constant = [&](std::span<const double> x) {
        const double ll = dcc_log_likelihood(e, fit.qbar, 0.0, 0.0, law, decode_nu(x[0]));
        return std::isfinite(ll) ? -ll / tn : std::numeric_limits<double>::infinity();
      };
      const MinimizeResult res = minimize_bfgs(constant, {nu0}, options.bfgs);
      ll0 = -res.value * tn;
      nu_c = decode_nu(res.x[0]);
    } else {
      ll0 = dcc_log_likelihood(e, fit.qbar, 0.0, 0.0, law, 0.0);
    }
    if (std::isfinite(ll0) && 2.0 * (fit.log_likelihood - ll0) < options.lr_critical) {
      fit.a = fit.b = 0.0;
      fit.nu = nu_c;
      fit.log_likelihood = ll0;
      fit.dynamics_significant = false;
    }
  }
  fit.boundary = fit.a + fit.b > 1.0 - options.boundary_tolerance;
  if (student && fit.nu >= kNuMax - 0.1) {
    fit.law = InnovationLaw::Normal;
    fit.nu = std::numeric_limits<double>::infinity();
  }
  fit.last_q = fit.qbar;
  for (std::size_t t = 0; t < data.rows(); ++t) dcc_update(fit.last_q, fit.qbar, fit.a, fit.b, e.row(t));
  return fit;
}

/// Conditional state after filtering a window: next-step variances and Q.
struct DccState {
  std::vector<double> variance;
  Matrix q;
};

/// Filters an N x T condition window starting from the unconditional variances and Qbar.
/// Optionally records R_t for every step.
inline DccState dcc_filter(const DccFit& fit, const Matrix& condition, std::vector<Matrix>* correlations = nullptr) {
  const std::size_t n = fit.instruments();
  if (condition.rows() != n) throw DimensionError("dcc filter: condition has wrong instrument count");
  DccState st;
  for (const auto& g : fit.assets) st.variance.push_back(g.unconditional_variance());
  st.q = fit.qbar;
  std::vector<double> e(n);
  for (std::size_t t = 0; t < condition.cols(); ++t) {
    if (correlations) correlations->push_back(correlation_from_q(st.q));
    for (std::size_t i = 0; i < n; ++i) {
      const Garch11Fit& g = fit.assets[i];
      const double eps = condition(i, t) - g.mu;
      e[i] = eps / std::sqrt(st.variance[i]);
      st.variance[i] = g.omega + g.alpha * eps * eps + g.beta * st.variance[i];
    }
    dcc_update(st.q, fit.qbar, fit.a, fit.b, e);
  }
  return st;
}

/// `batch` independent N x horizon continuations of the condition window. Path k draws from
/// an engine seeded by derive_seed(seed, "dcc", k).
inline std::vector<Matrix> simulate_from_fit(const DccFit& fit, const Matrix& condition, std::size_t horizon,
                                             std::size_t batch, std::uint64_t seed) {
  const std::size_t n = fit.instruments();
  const DccState start = dcc_filter(fit, condition);
  std::vector<Matrix> out;
  out.reserve(batch);
  std::vector<double> g(n), z(n), e(n);
  for (std::size_t k = 0; k < batch; ++k) {
    Engine rng = make_engine(seed, "dcc", k);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::optional<std::chi_squared_distribution<double>> chi;
    if (fit.law == InnovationLaw::StudentT) chi.emplace(fit.nu);
    DccState st = start;
    Matrix path(n, horizon);
    for (std::size_t t = 0; t < horizon; ++t) {
      const Matrix l = cholesky_with_jitter(correlation_from_q(st.q)).first;
      for (double& v : g) v = nd(rng);
      const double scale = chi ? std::sqrt((fit.nu - 2.0) / (*chi)(rng)) : 1.0;
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j <= i; ++j) acc += l(i, j) * g[j];
        z[i] = acc * scale;
      }
      for (std::size_t i = 0; i < n; ++i) {
        const Garch11Fit& a = fit.assets[i];
        const double eps = std::sqrt(st.variance[i]) * z[i];
        path(i, t) = a.mu + eps;
        e[i] = z[i];
        st.variance[i] = a.omega + a.alpha * eps * eps + a.beta * st.variance[i];
      }
      dcc_update(st.q, fit.qbar, fit.a, fit.b, e);
    }
    out.push_back(std::move(path));
  }
  return out;
}

struct RollingFit {
  std::optional<DccFit> fit;  // empty when no window so far produced a fit
  bool carried_forward = false;
  std::string failure;
};

/// One fit per conditioning window (rows k .. k + window - 1 for k = 0 .. T - 2 window), aligned
/// with conditioning_windows. Failed windows reuse the previous successful fit, flagged.
inline std::vector<RollingFit> rolling_refit(const Matrix& returns, InnovationLaw law = InnovationLaw::Normal,
                                             const FitSchedule& schedule = {FitSchedule::Mode::Rolling, 40},
                                             const DccOptions& options = {}) {
  const std::size_t w = schedule.window;
  if (returns.rows() < 2 * w)
    throw DegenerateData("rolling refit: need at least " + std::to_string(2 * w) + " observations");
  std::vector<RollingFit> out;
  const std::size_t count = returns.rows() - 2 * w + 1;
  out.reserve(count);
  std::optional<DccFit> last;
  for (std::size_t k = 0; k < count; ++k) {
    RollingFit rf;
    try {
      rf.fit = fit_dcc(returns.row_range(k, k + w), law, {FitSchedule::Mode::FullTrain, w}, options);
      last = rf.fit;
    } catch (const Error& err) {
      rf.failure = err.what();
      rf.carried_forward = true;
      if (last) {
        rf.fit = last;
        rf.fit->carried_forward = true;
      }
    }
    out.push_back(std::move(rf));
  }
  return out;
}

}  // namespace ftsbench::parametric
