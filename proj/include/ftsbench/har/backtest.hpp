#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/matrix.hpp"
#include "ftsbench/core/parallel.hpp"
#include "ftsbench/core/random.hpp"
#include "ftsbench/evaluation/sampler.hpp"
#include "ftsbench/generators/dataset.hpp"
#include "ftsbench/generators/panel_io.hpp"
#include "ftsbench/har/features.hpp"
#include "ftsbench/har/market.hpp"
#include "ftsbench/har/ridge.hpp"

namespace ftsbench::har {

struct BasketLeg {
  std::size_t instrument = 0;
  double weight = 0.0;  // theta units; + long, - short
};

/// Long legs first (best ratio first), then short legs (worst ratio last).
struct Basket {
  std::vector<BasketLeg> legs;
  std::size_t n = 0;
};

/// Ranks tradable instruments by predicted rv / implied vol (ties: lower instrument index
/// first), goes long the top n at +1/n theta each and short the bottom n at -1/n each.
inline Basket rank_and_build_basket(std::span<const double> predicted_rv, std::span<const double> implied_vol,
                                    std::size_t n, const std::vector<bool>& tradable = {}) {
  const std::size_t m = predicted_rv.size();
  if (implied_vol.size() != m || (!tradable.empty() && tradable.size() != m))
    throw DimensionError("basket: input lengths differ");
  if (n == 0) throw InvalidParameters("basket: n must be positive");
  std::vector<std::size_t> ids;
  std::vector<double> ratio(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (!tradable.empty() && !tradable[i]) continue;
    if (!(implied_vol[i] > 0.0) || !std::isfinite(predicted_rv[i]))
      throw InvalidParameters("basket: forecasts must be finite and implied vols positive");
    ratio[i] = predicted_rv[i] / implied_vol[i];
    ids.push_back(i);
  }
  if (2 * n > ids.size())
    throw DegenerateData("basket: too few tradable instruments (" + std::to_string(ids.size()) + " for 2 x " +
                         std::to_string(n) + ")");
  std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) { return ratio[a] > ratio[b]; });
  Basket b;
  b.n = n;
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) b.legs.push_back({ids[k], w});
  for (std::size_t k = ids.size() - n; k < ids.size(); ++k) b.legs.push_back({ids[k], -w});
  return b;
}

enum class ForecasterKind { Oracle, Implied, Har, HarNet, HarGen };

inline ForecasterKind parse_forecaster(const std::string& s) {
  if (s == "oracle") return ForecasterKind::Oracle;
  if (s == "implied") return ForecasterKind::Implied;
  if (s == "har") return ForecasterKind::Har;
  if (s == "har_net") return ForecasterKind::HarNet;
  if (s == "har_gen") return ForecasterKind::HarGen;
  throw ConfigError("unknown forecaster '" + s + "'");
}

struct Forecaster {
  std::string name;
  ForecasterKind kind = ForecasterKind::Har;
  evaluation::Sampler sampler;  // har_gen only
};

struct BacktestConfig {
  std::vector<std::size_t> basket_sizes{5, 10, 15, 20, 25};
  RvProxy proxy = RvProxy::Abs;
  double half_life = 63.0;
  double lambda = -1.0;  // < 0: choose on the last validation_fraction of the history
  std::vector<double> lambda_grid = default_lambda_grid();
  double validation_fraction = 0.25;
  double network_threshold = 0.5;
  bool network_normalized = true;
  std::size_t condition = generators::kConditionLength;
  std::size_t gen_batch = 10;
  double strike_filter_bps = 50.0;
  std::size_t start = 0;      // first trading day (close index); 0: half the panel
  std::size_t history = 250;  // feature days before `start` used for the first fit
  bool keep_ledger = true;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;

  void validate() const {
    if (basket_sizes.empty()) throw ConfigError("backtest: empty basket size grid");
    for (std::size_t n : basket_sizes)
      if (n == 0) throw ConfigError("backtest: basket sizes must be positive");
    if (!(half_life > 0.0)) throw ConfigError("backtest: half_life must be positive");
    if (lambda < 0.0 && lambda_grid.empty()) throw ConfigError("backtest: lambda grid empty");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
      throw ConfigError("backtest: validation_fraction must be in (0, 1)");
    if (!(network_threshold > 0.0 && network_threshold < 1.0))
      throw ConfigError("backtest: network_threshold must be in (0, 1)");
    if (condition < 3) throw ConfigError("backtest: condition must be >= 3");
    if (gen_batch == 0) throw ConfigError("backtest: gen_batch must be positive");
    if (history < 2) throw ConfigError("backtest: history must be >= 2");
  }
};

struct LedgerRow {
  std::size_t day = 0;
  std::size_t instrument = 0;
  double weight = 0.0;
  LegPnl pnl;
};

/// Daily PnL series of one (forecaster, basket size) cell.
struct BacktestCell {
  std::string forecaster;
  std::size_t n = 0;
  std::vector<double> long_short, long_only, short_only;
  std::vector<LedgerRow> ledger;
};

enum class PnlMode { LongShort, LongOnly, ShortOnly };

inline const char* to_string(PnlMode m) {
  switch (m) {
    case PnlMode::LongShort: return "long_short";
    case PnlMode::LongOnly: return "long_only";
    case PnlMode::ShortOnly: return "short_only";
  }
  return "";
}

struct BacktestResult {
  std::vector<std::string> forecasters;
  std::vector<std::size_t> basket_sizes;
  std::vector<std::size_t> days;      // trading days (close index)
  std::vector<double> lambdas;        // per forecaster; NaN when no regression
  std::vector<BacktestCell> cells;    // forecaster-major

  const BacktestCell& cell(std::size_t forecaster, std::size_t size_index) const {
    return cells.at(forecaster * basket_sizes.size() + size_index);
  }

  const std::vector<double>& series(std::size_t f, std::size_t s, PnlMode mode) const {
    const auto& c = cell(f, s);
    return mode == PnlMode::LongShort ? c.long_short : mode == PnlMode::LongOnly ? c.long_only : c.short_only;
  }

  /// Mean PnL per day, forecasters x basket sizes.
  Matrix grid(PnlMode mode) const {
    Matrix g(forecasters.size(), basket_sizes.size());
    for (std::size_t f = 0; f < forecasters.size(); ++f)
      for (std::size_t s = 0; s < basket_sizes.size(); ++s) {
        const auto& v = series(f, s, mode);
        g(f, s) = v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      }
    return g;
  }
};

namespace detail {

inline std::size_t feature_count(ForecasterKind k) {
  switch (k) {
    case ForecasterKind::Har: return 3;
    case ForecasterKind::HarNet: return 4;
    case ForecasterKind::HarGen: return 6;
    default: return 0;
  }
}

/// N x p HAR design rows as of the close of day s.
inline Matrix day_features(const Forecaster& f, const Matrix& returns, std::size_t s, const BacktestConfig& cfg) {
  const std::size_t n = returns.cols(), obs = s + 1;
  Matrix x(n, feature_count(f.kind));
  std::vector<double> rv_d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto series = returns.col(i);
    const RvTriple r = rv_features(series, obs, cfg.proxy);
    x(i, 0) = r.d;
    x(i, 1) = r.w;
    x(i, 2) = r.m;
    rv_d[i] = r.d;
  }
  if (f.kind == ForecasterKind::HarNet) {
    const Matrix window = generators::window_of(returns, obs - cfg.condition, cfg.condition);
    const auto net = network_feature(rv_d, window, cfg.network_threshold, cfg.network_normalized);
    for (std::size_t i = 0; i < n; ++i) x(i, 3) = net[i];
  } else if (f.kind == ForecasterKind::HarGen) {
    if (!f.sampler) throw ConfigError("backtest: forecaster '" + f.name + "' needs a sampler");
    const Matrix window = generators::window_of(returns, obs - cfg.condition, cfg.condition);
    const auto paths = f.sampler(window, cfg.gen_batch, derive_seed(cfg.seed, "har-gen", s));
    const auto g = generative_features(paths, n, cfg.proxy);
    for (std::size_t i = 0; i < n; ++i) {
      x(i, 3) = g[i].d;
      x(i, 4) = g[i].w;
      x(i, 5) = g[i].m;
    }
  }
  return x;
}

}  // namespace detail

/// Daily loop over closes t = start .. T-2: refit the pooled HAR ridge on every row whose
/// target is already observed, forecast next-day rv, trade each basket size on the straddles
/// of day t and book the PnL of return t + 1.
inline BacktestResult run_backtest(const generators::ReturnPanel& panel, const SyntheticMarket& market,
                                   const std::vector<Forecaster>& forecasters, const BacktestConfig& cfg) {
  cfg.validate();
  if (forecasters.empty()) throw ConfigError("backtest: no forecasters");
  const Matrix& r = panel.returns;
  const std::size_t t_end = r.rows(), n = r.cols();
  if (market.instruments() != n || market.days() + 1 != t_end)
    throw DimensionError("backtest: market does not match the panel");
  const std::size_t first = std::max(kMonthly, cfg.condition) - 1;  // earliest feature close
  const std::size_t start = cfg.start ? cfg.start : t_end / 2;
  if (start < first + 2 || start + 1 >= t_end)
    throw DegenerateData("backtest: panel too short for the warm-up and at least one trading day");
  const std::size_t s0 = std::max(first, start > cfg.history ? start - cfg.history : 0);
  const double day_decay = std::exp2(-1.0 / cfg.half_life);

  BacktestResult res;
  res.basket_sizes = cfg.basket_sizes;
  for (std::size_t t = start; t + 1 < t_end; ++t) res.days.push_back(t);
  for (const auto& f : forecasters) {
    res.forecasters.push_back(f.name);
    for (std::size_t size : cfg.basket_sizes) res.cells.push_back({f.name, size, {}, {}, {}, {}});
  }

  auto target = [&](std::size_t s, std::size_t i) {
    const double v = r(s + 1, i);
    return rv_proxy(std::span<const double>(&v, 1), cfg.proxy);
  };

  for (std::size_t fi = 0; fi < forecasters.size(); ++fi) {
    const Forecaster& f = forecasters[fi];
    const std::size_t p = detail::feature_count(f.kind);
    std::vector<Matrix> feats;
    if (p > 0) {
      feats.resize(t_end - 1);
      parallel_for(t_end - 1 - s0, cfg.jobs,
                   [&](std::size_t k) { feats[s0 + k] = detail::day_features(f, r, s0 + k, cfg); });
    }
    double lambda = std::numeric_limits<double>::quiet_NaN();
    NormalEquations ne(p);
    if (p > 0) {
      lambda = cfg.lambda;
      if (lambda < 0.0) {
        const std::size_t hist_days = start - s0;
        const auto val_days = std::max<std::size_t>(1, static_cast<std::size_t>(cfg.validation_fraction * hist_days));
        if (val_days + 2 > hist_days) throw DegenerateData("backtest: history too short to select lambda");
        auto stack = [&](std::size_t a, std::size_t b, std::vector<double>& y) {
          Matrix x((b - a) * n, p);
          for (std::size_t s = a; s < b; ++s)
            for (std::size_t i = 0; i < n; ++i) {
              const auto row = feats[s].row(i);
              std::copy(row.begin(), row.end(), x.row((s - a) * n + i).begin());
              y.push_back(target(s, i));
            }
          return x;
        };
        std::vector<double> yt, yv;
        const Matrix xt = stack(s0, start - val_days, yt), xv = stack(start - val_days, start, yv);
        lambda = select_lambda(xt, yt, xv, yv, cfg.half_life, cfg.lambda_grid, n);
      }
      for (std::size_t s = s0; s < start; ++s) {
        const double w = std::exp2(-static_cast<double>(start - 1 - s) / cfg.half_life);
        for (std::size_t i = 0; i < n; ++i) ne.add(feats[s].row(i), target(s, i), w);
      }
    }
    res.lambdas.push_back(lambda);

    std::vector<double> forecast(n), implied(n);
    std::vector<bool> tradable(n);
    for (std::size_t t = start; t + 1 < t_end; ++t) {
      if (p > 0 && t > start) {
        ne.decay(day_decay);
        for (std::size_t i = 0; i < n; ++i) ne.add(feats[t - 1].row(i), target(t - 1, i), 1.0);
      }
      HarModel model;
      if (p > 0) model = ne.solve(lambda);
      for (std::size_t i = 0; i < n; ++i) {
        const SyntheticStraddle& leg = market.straddle(t, i);
        implied[i] = leg.implied_vol();
        tradable[i] = leg.strike_bps <= cfg.strike_filter_bps;
        switch (f.kind) {
          case ForecasterKind::Oracle: forecast[i] = std::sqrt(kTradingDays * panel.variance(t + 1, i)); break;
          case ForecasterKind::Implied: forecast[i] = implied[i]; break;
          default: forecast[i] = model.predict(feats[t].row(i));
        }
      }
      for (std::size_t si = 0; si < cfg.basket_sizes.size(); ++si) {
        BacktestCell& cell = res.cells[fi * cfg.basket_sizes.size() + si];
        const Basket b = rank_and_build_basket(forecast, implied, cfg.basket_sizes[si], tradable);
        double lo = 0.0, sh = 0.0;
        for (const BasketLeg& l : b.legs) {
          const LegPnl pnl = straddle_daily_pnl(market.straddle(t, l.instrument), r(t + 1, l.instrument), l.weight);
          (l.weight > 0.0 ? lo : sh) += pnl.total();
          if (cfg.keep_ledger) cell.ledger.push_back({t, l.instrument, l.weight, pnl});
        }
        cell.long_only.push_back(lo);
        cell.short_only.push_back(sh);
        cell.long_short.push_back(lo + sh);
      }
    }
  }
  return res;
}

/// Forecasters x basket sizes, one block of rows per mode.
inline std::string grid_csv(const BacktestResult& res) {
  std::ostringstream os;
  os << "mode,forecaster";
  for (std::size_t n : res.basket_sizes) os << ",n" << n;
  os << '\n';
  for (PnlMode mode : {PnlMode::LongShort, PnlMode::LongOnly, PnlMode::ShortOnly}) {
    const Matrix g = res.grid(mode);
    for (std::size_t f = 0; f < res.forecasters.size(); ++f) {
      os << to_string(mode) << ',' << res.forecasters[f];
      for (std::size_t s = 0; s < res.basket_sizes.size(); ++s) os << ',' << generators::format_real(g(f, s));
      os << '\n';
    }
  }
  return os.str();
}

inline std::string ledger_csv(const BacktestResult& res, const std::vector<std::string>& ids = {}) {
  std::ostringstream os;
  os << "forecaster,n,day,instrument,weight,gamma_pnl,theta_pnl,pnl\n";
  for (const auto& c : res.cells)
    for (const auto& row : c.ledger) {
      os << c.forecaster << ',' << c.n << ',' << row.day << ','
         << (row.instrument < ids.size() ? ids[row.instrument] : std::to_string(row.instrument)) << ','
         << generators::format_real(row.weight) << ',' << generators::format_real(row.pnl.gamma) << ','
         << generators::format_real(row.pnl.theta) << ',' << generators::format_real(row.pnl.total()) << '\n';
    }
  return os.str();
}

}  // namespace ftsbench::har
