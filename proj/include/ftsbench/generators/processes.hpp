#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/matrix.hpp"
#include "ftsbench/core/random.hpp"

namespace ftsbench::generators {

/// NGARCH(1,1): r = mu + sigma z, sigma_t^2 = omega + beta (eps_{t-1} - gamma sigma_{t-1})^2
/// + alpha sigma_{t-1}^2. Note beta multiplies the innovation term and alpha the lagged variance.
struct NGarchParams {
  double mu = 0.0;
  double omega = 1e-5;
  double alpha = 0.85;
  double beta = 0.08;
  double gamma = 0.3;
  double sigma0 = 0.01;

  double persistence() const { return alpha + beta * (1.0 + gamma * gamma); }
  double unconditional_variance() const { return omega / (1.0 - persistence()); }

  void validate() const {
    if (!(omega > 0.0)) throw InvalidParameters("ngarch: omega must be > 0");
    if (alpha < 0.0 || beta < 0.0) throw InvalidParameters("ngarch: alpha, beta must be >= 0");
    if (!(persistence() < 1.0))
      throw InvalidParameters("ngarch: alpha + beta (1 + gamma^2) must be < 1");
    if (!(sigma0 >= 0.0) || !std::isfinite(mu) || !std::isfinite(gamma))
      throw InvalidParameters("ngarch: invalid mu/gamma/sigma0");
  }
};

/// Recursion state. The pre-sample innovation is zero and the pre-sample std is sigma0.
struct NGarchState {
  double sigma = 0.0;
  double eps = 0.0;

  static NGarchState initial(const NGarchParams& p) { return {p.sigma0, 0.0}; }

  /// Advances one step with shock z; returns (return, conditional variance of that return).
  std::pair<double, double> step(const NGarchParams& p, double z) {
    const double d = eps - p.gamma * sigma;
    const double var = p.omega + p.beta * d * d + p.alpha * sigma * sigma;
    sigma = std::sqrt(var);
    eps = sigma * z;
    return {p.mu + eps, var};
  }
};

struct ProcessPath {
  std::vector<double> returns;
  std::vector<double> variances;
};

inline ProcessPath simulate_ngarch(const NGarchParams& p, std::size_t steps,
                                   std::span<const double> shocks) {
  p.validate();
  if (shocks.size() != steps) throw DimensionError("simulate_ngarch: shocks length != steps");
  ProcessPath out;
  out.returns.reserve(steps);
  out.variances.reserve(steps);
  NGarchState s = NGarchState::initial(p);
  for (std::size_t t = 0; t < steps; ++t) {
    auto [r, v] = s.step(p, shocks[t]);
    out.returns.push_back(r);
    out.variances.push_back(v);
  }
  return out;
}

/// Heston diffusion in annual units, stepped with dt (years).
struct HestonParams {
  double mu = 0.05;
  double kappa = 2.0;
  double theta = 0.04;
  double sigma_v = 0.4;
  double rho = -0.6;
  double v0 = 0.04;
  double s0 = 100.0;
  double dt = 1.0 / 252.0;

  void validate() const {
    if (!(kappa > 0.0 && theta > 0.0 && sigma_v >= 0.0 && v0 > 0.0 && s0 > 0.0))
      throw InvalidParameters("heston: kappa, theta, v0, s0 must be > 0 and sigma_v >= 0");
    if (!(std::abs(rho) <= 1.0)) throw InvalidParameters("heston: |rho| must be <= 1");
    if (!(dt > 0.0)) throw InvalidParameters("heston: dt must be > 0");
  }
};

/// Euler-Maruyama with full truncation: V+ = max(V, 0) in both drift and diffusion.
struct HestonState {
  double v = 0.0;

  static HestonState initial(const HestonParams& p) { return {p.v0}; }

  /// Shocks (zs, zv) must already carry correlation rho. Returns (log return, V+).
  std::pair<double, double> step(const HestonParams& p, double zs, double zv) {
    const double vp = std::max(v, 0.0);
    const double sq = std::sqrt(vp * p.dt);
    const double r = (p.mu - 0.5 * vp) * p.dt + sq * zs;
    v = v + p.kappa * (p.theta - vp) * p.dt + p.sigma_v * sq * zv;
    return {r, vp};
  }
};

/// Builds the variance shock from an independent normal: zv = rho zs + sqrt(1 - rho^2) eta.
inline double correlate_variance_shock(double rho, double zs, double eta) {
  return rho * zs + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * eta;
}

struct HestonPath {
  std::vector<double> log_returns;
  std::vector<double> variances;  // V+ feeding each return, annualized
  std::vector<double> prices;     // S after each step
};

inline HestonPath simulate_heston(const HestonParams& p, std::size_t steps,
                                  std::span<const std::pair<double, double>> shocks) {
  p.validate();
  if (shocks.size() != steps) throw DimensionError("simulate_heston: shocks length != steps");
  HestonPath out;
  out.log_returns.reserve(steps);
  out.variances.reserve(steps);
  out.prices.reserve(steps);
  HestonState s = HestonState::initial(p);
  double logs = std::log(p.s0);
  for (std::size_t t = 0; t < steps; ++t) {
    auto [r, vp] = s.step(p, shocks[t].first, shocks[t].second);
    logs += r;
    out.log_returns.push_back(r);
    out.variances.push_back(vp);
    out.prices.push_back(std::exp(logs));
  }
  return out;
}

/// Factor stochastic volatility with n instruments and m factors. Log-variance entries
/// 0..n-1 are idiosyncratic, n..n+m-1 belong to the factors; each follows an AR(1).
struct FsvForwardParams {
  Matrix loadings;  // n x m
  std::vector<double> h_mean;
  std::vector<double> h_persistence;
  std::vector<double> h_std;
  bool upper_triangular = false;

  std::size_t instruments() const { return loadings.rows(); }
  std::size_t factors() const { return loadings.cols(); }

  void validate() const {
    const std::size_t n = instruments(), m = factors();
    if (!(m < n)) throw InvalidParameters("fsv: factor count must be < instruments");
    if (h_mean.size() != n + m || h_persistence.size() != n + m || h_std.size() != n + m)
      throw InvalidParameters("fsv: need n + m log-variance AR(1) parameters");
    for (std::size_t k = 0; k < n + m; ++k) {
      if (!(std::abs(h_persistence[k]) < 1.0)) throw InvalidParameters("fsv: |persistence| must be < 1");
      if (h_std[k] < 0.0) throw InvalidParameters("fsv: innovation std must be >= 0");
    }
    if (upper_triangular)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
          if (loadings(i, j) != 0.0) throw InvalidParameters("fsv: loadings violate the triangular restriction");
  }

  /// E[exp(h_k)] under the stationary law of the AR(1).
  double expected_variance(std::size_t k) const {
    const double var = h_std[k] * h_std[k] / (1.0 - h_persistence[k] * h_persistence[k]);
    return std::exp(h_mean[k] + 0.5 * var);
  }
};

struct FsvState {
  std::vector<double> h;

  /// Starts each log variance at a draw from its stationary law.
  static FsvState initial(const FsvForwardParams& p, Engine& rng) {
    FsvState s;
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::size_t k = 0; k < p.h_mean.size(); ++k) {
      const double sd = p.h_std[k] / std::sqrt(1.0 - p.h_persistence[k] * p.h_persistence[k]);
      s.h.push_back(p.h_mean[k] + sd * nd(rng));
    }
    return s;
  }

  /// Writes one cross-section of returns and conditional variances, then advances h.
  void step(const FsvForwardParams& p, Engine& rng, std::span<double> returns,
            std::span<double> variances) {
    const std::size_t n = p.instruments(), m = p.factors();
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> f(m);
    for (std::size_t k = 0; k < m; ++k) f[k] = std::exp(0.5 * h[n + k]) * nd(rng);
    for (std::size_t i = 0; i < n; ++i) {
      double r = 0.0, v = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        r += p.loadings(i, k) * f[k];
        v += p.loadings(i, k) * p.loadings(i, k) * std::exp(h[n + k]);
      }
      r += std::exp(0.5 * h[i]) * nd(rng);
      v += std::exp(h[i]);
      returns[i] = r;
      variances[i] = v;
    }
    for (std::size_t k = 0; k < n + m; ++k)
      h[k] = p.h_mean[k] + p.h_persistence[k] * (h[k] - p.h_mean[k]) + p.h_std[k] * nd(rng);
  }
};

}  // namespace ftsbench::generators
