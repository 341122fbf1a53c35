#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/matrix.hpp"
#include "ftsbench/core/random.hpp"
#include "ftsbench/har/features.hpp"

namespace ftsbench::har {

/// One day's at-the-money straddle on one instrument. Greeks are per unit straddle; theta is
/// per trading day.
struct SyntheticStraddle {
  std::size_t instrument = 0;
  double implied_variance = 0.0;  // annualized
  double gamma = 0.0;
  double theta = 0.0;
  double strike_bps = 0.0;  // |strike - forward| in basis points of the forward
  double spot = 100.0;

  double implied_vol() const { return std::sqrt(implied_variance); }

  void validate() const {
    if (!(implied_variance > 0.0) || !std::isfinite(implied_variance))
      throw InvalidParameters("straddle: implied variance must be positive");
    if (!(gamma > 0.0)) throw InvalidParameters("straddle: gamma must be positive");
    if (!(theta < 0.0)) throw InvalidParameters("straddle: theta must be negative");
  }
};

struct MarketConfig {
  double premium = 0.05;      // implied vol = true vol * (1 + premium) * exp(noise * eps)
  double noise = 0.10;        // log-vol noise std
  double strike_sd_bps = 20;  // strike distance ~ |N(0, sd)|
  double days_to_expiry = 30;
  double spot = 100.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(premium > -1.0)) throw ConfigError("market: premium must exceed -1");
    if (!(noise >= 0.0)) throw ConfigError("market: noise must be >= 0");
    if (!(strike_sd_bps >= 0.0)) throw ConfigError("market: strike_sd_bps must be >= 0");
    if (!(days_to_expiry > 0.0)) throw ConfigError("market: days_to_expiry must be positive");
    if (!(spot > 0.0)) throw ConfigError("market: spot must be positive");
  }
};

/// Black-Scholes straddle Greeks at the forward (zero rates): with d1 = sigma sqrt(T) / 2,
/// gamma = 2 phi(d1) / (S sigma sqrt(T)) and the annual theta is -S phi(d1) sigma / sqrt(T).
/// The ratio 1/2 gamma S^2 / |theta_day| is exactly 252 / sigma^2.
inline SyntheticStraddle atm_straddle(std::size_t instrument, double implied_variance, double days_to_expiry,
                                      double spot, double strike_bps = 0.0) {
  if (!(implied_variance > 0.0)) throw InvalidParameters("straddle: implied variance must be positive");
  const double sigma = std::sqrt(implied_variance), tau = days_to_expiry / kTradingDays;
  const double d1 = 0.5 * sigma * std::sqrt(tau);
  const double phi = std::exp(-0.5 * d1 * d1) / std::sqrt(2.0 * std::numbers::pi);
  SyntheticStraddle s;
  s.instrument = instrument;
  s.implied_variance = implied_variance;
  s.gamma = 2.0 * phi / (spot * sigma * std::sqrt(tau));
  s.theta = -spot * phi * sigma / std::sqrt(tau) / kTradingDays;
  s.strike_bps = strike_bps;
  s.spot = spot;
  return s;
}

struct LegPnl {
  double gamma = 0.0;  // realized gamma profit
  double theta = 0.0;  // theta decay
  double total() const { return gamma + theta; }
};

/// Position of `weight` units of theta: contracts = weight / |theta|; one day of gamma profit on
/// the underlying return plus theta decay over dt days.
inline LegPnl straddle_daily_pnl(const SyntheticStraddle& leg, double underlying_return, double weight,
                                 double dt = 1.0) {
  if (leg.theta == 0.0) throw InvalidParameters("straddle: zero theta");
  const double contracts = weight / std::abs(leg.theta);
  const double s = leg.spot;
  return {contracts * 0.5 * leg.gamma * s * s * underlying_return * underlying_return, contracts * leg.theta * dt};
}

/// Straddles for every (day, instrument) of a panel. Day t is priced at the close of t for the
/// return of day t + 1, so its implied vol is built from the true variance of step t + 1.
class SyntheticMarket {
 public:
  SyntheticMarket(const Matrix& true_variance, MarketConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t t = true_variance.rows(), n = true_variance.cols();
    if (t < 2) throw DegenerateData("market: need at least 2 steps of variance");
    days_ = t - 1;
    n_ = n;
    legs_.reserve(days_ * n);
    Engine noise = make_engine(cfg_.seed, "market-iv");
    Engine strike = make_engine(cfg_.seed, "market-strike");
    std::normal_distribution<double> nd;
    for (std::size_t d = 0; d < days_; ++d) {
      for (std::size_t i = 0; i < n; ++i) {
        const double v = true_variance(d + 1, i);
        if (!(v > 0.0)) throw DegenerateData("market: true variance must be positive");
        const double vol = std::sqrt(kTradingDays * v) * (1.0 + cfg_.premium) * std::exp(cfg_.noise * nd(noise));
        const double k = std::abs(cfg_.strike_sd_bps * nd(strike));
        legs_.push_back(atm_straddle(i, vol * vol, cfg_.days_to_expiry, cfg_.spot, k));
      }
    }
  }

  std::size_t days() const noexcept { return days_; }
  std::size_t instruments() const noexcept { return n_; }
  const MarketConfig& config() const noexcept { return cfg_; }

  const SyntheticStraddle& straddle(std::size_t day, std::size_t instrument) const {
    if (day >= days_ || instrument >= n_) throw DimensionError("market: straddle index out of range");
    return legs_[day * n_ + instrument];
  }

 private:
  MarketConfig cfg_;
  std::size_t days_ = 0, n_ = 0;
  std::vector<SyntheticStraddle> legs_;
};

}  // namespace ftsbench::har
