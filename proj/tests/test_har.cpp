#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "ftsbench/core/stats.hpp"
#include "ftsbench/generators/spec_io.hpp"
#include "ftsbench/har/backtest.hpp"
#include "support/oracles.hpp"

using namespace ftsbench;
using namespace ftsbench::har;

namespace {

std::vector<double> normals(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sd);
  std::vector<double> v(n);
  for (double& x : v) x = nd(rng);
  return v;
}

Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return m;
}

/// Paths of i.i.d. normals with the condition window's pooled std.
evaluation::Sampler iid_sampler() {
  return [](const Matrix& cond, std::size_t batch, std::uint64_t seed) {
    double ss = 0.0;
    for (double v : cond.data()) ss += v * v;
    const double sd = std::sqrt(ss / static_cast<double>(cond.size()));
    Engine rng(seed);
    std::vector<Matrix> out;
    for (std::size_t b = 0; b < batch; ++b) {
      Matrix p(cond.rows(), 40);
      fill_normal(rng, p.data());
      for (double& v : p.data()) v *= sd;
      out.push_back(std::move(p));
    }
    return out;
  };
}

struct Market {
  generators::ReturnPanel panel;
  SyntheticMarket market;
};

Market ngarch_market(std::size_t n, std::size_t t, std::uint64_t seed, MarketConfig mc = {}) {
  auto panel = generators::build_dataset(generators::make_preset("ngarch", n, t, 1, seed));
  mc.seed = seed;
  SyntheticMarket m(panel.variance, mc);
  return {std::move(panel), std::move(m)};
}

std::vector<Forecaster> basic_forecasters() {
  return {{"oracle", ForecasterKind::Oracle, {}},
          {"implied", ForecasterKind::Implied, {}},
          {"har", ForecasterKind::Har, {}},
          {"har_net", ForecasterKind::HarNet, {}}};
}

}  // namespace

TEST(RvFeatures, ConstantMagnitude) {
  std::vector<double> r(30);
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = k % 2 ? 0.01 : -0.01;
  for (RvProxy p : {RvProxy::Abs, RvProxy::Squared}) {
    const RvTriple f = rv_features(r, 30, p);
    const double expected = 0.01 * std::sqrt(252.0);
    EXPECT_NEAR(f.d, expected, 1e-15);
    EXPECT_NEAR(f.w, expected, 1e-15);
    EXPECT_NEAR(f.m, expected, 1e-15);
  }
}

TEST(RvFeatures, SpikeOrdersHorizons) {
  std::vector<double> r(40, 0.001);
  r[29] = 0.05;  // latest of the first 30 observations
  for (RvProxy p : {RvProxy::Abs, RvProxy::Squared}) {
    const RvTriple f = rv_features(r, 30, p);
    EXPECT_GT(f.d, f.w);
    EXPECT_GT(f.w, f.m);
  }
}

TEST(RvFeatures, HistoryChecks) {
  const std::vector<double> r(30, 0.01);
  EXPECT_THROW(rv_features(r, 21), DegenerateData);
  EXPECT_NO_THROW(rv_features(r, 22));
  EXPECT_THROW(rv_features(r, 31), DimensionError);
  EXPECT_EQ(parse_proxy("squared"), RvProxy::Squared);
  EXPECT_THROW(parse_proxy("range"), ConfigError);
}

TEST(RvFeatures, HestonMonthlyProxyTracksTrueVolatility) {
  const auto panel = generators::build_dataset(generators::make_preset("heston", 1, 20000, 1, 3));
  const auto r = panel.returns.col(0);
  double mean_var = 0.0;
  for (std::size_t t = 0; t < r.size(); ++t) mean_var += panel.variance(t, 0);
  const double truth = std::sqrt(252.0 * mean_var / static_cast<double>(r.size()));
  double sq = 0.0, ab = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 22; t <= r.size(); ++t, ++count) {
    sq += rv_features(r, t, RvProxy::Squared).m;
    ab += rv_features(r, t, RvProxy::Abs).m;
  }
  sq /= static_cast<double>(count);
  ab /= static_cast<double>(count);
  EXPECT_NEAR(sq / truth, 1.0, 0.15);
  // The absolute-return proxy estimates E|r|, about sqrt(2 / pi) of the volatility.
  EXPECT_LT(ab / truth, 0.85);
  EXPECT_GT(ab / truth, 0.65);
}

TEST(NetworkFeature, IsolatedCompleteAndStar) {
  const std::size_t t = 4000;
  const auto a = normals(t, 1), b = normals(t, 2), c = normals(t, 3), e = normals(t, 4);
  Matrix star(4, t), complete(3, t);
  for (std::size_t k = 0; k < t; ++k) {
    star(0, k) = a[k] + b[k] + c[k];  // corr with each leaf = 1/sqrt(3)
    star(1, k) = a[k];
    star(2, k) = b[k];
    star(3, k) = c[k];
    complete(0, k) = a[k];
    complete(1, k) = a[k] + 0.1 * b[k];
    complete(2, k) = a[k] + 0.1 * e[k];
  }
  const std::vector<double> rv_star{10.0, 1.0, 2.0, 3.0};
  const auto f = network_feature(rv_star, star, 0.5);
  EXPECT_DOUBLE_EQ(f[0], 2.0);
  EXPECT_DOUBLE_EQ(f[1], 10.0);
  EXPECT_DOUBLE_EQ(network_feature(rv_star, star, 0.5, false)[0], 6.0);
  const std::vector<double> same(3, 0.3);
  for (double v : network_feature(same, complete, 0.9)) EXPECT_DOUBLE_EQ(v, 0.3);
  // Independent rows: nobody is linked at 0.5.
  Matrix iso(3, t);
  for (std::size_t k = 0; k < t; ++k) {
    iso(0, k) = a[k];
    iso(1, k) = b[k];
    iso(2, k) = c[k];
  }
  for (double v : network_feature(same, iso, 0.5)) EXPECT_EQ(v, 0.0);
}

TEST(NetworkFeature, Errors) {
  const Matrix w(2, 10, 1.0);
  const std::vector<double> rv{1.0, 2.0};
  EXPECT_THROW(network_feature(rv, w, 0.0), InvalidParameters);
  EXPECT_THROW(network_feature(rv, w, 1.0), InvalidParameters);
  EXPECT_THROW(network_feature(rv, w, 0.5), DegenerateData);
  EXPECT_THROW(network_feature(std::vector<double>{1.0}, w, 0.5), DimensionError);
}

TEST(GenerativeFeatures, EmptyAndReplay) {
  const std::vector<Matrix> none;
  for (const auto& f : generative_features(none, 3)) {
    EXPECT_EQ(f.d, 0.0);
    EXPECT_EQ(f.m, 0.0);
  }
  Matrix future(2, 40);
  const auto z = normals(80, 5, 0.01);
  std::copy(z.begin(), z.end(), future.data().begin());
  const std::vector<Matrix> one{future};
  const auto g = generative_features(one, 2);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto row = future.row(i);
    EXPECT_DOUBLE_EQ(g[i].d, std::abs(row[0]) * std::sqrt(252.0));
    EXPECT_DOUBLE_EQ(g[i].w, rv_proxy(row.first(5), RvProxy::Abs));
    EXPECT_DOUBLE_EQ(g[i].m, rv_proxy(row.first(22), RvProxy::Abs));
  }
  EXPECT_THROW(generative_features(std::vector<Matrix>{Matrix(2, 10)}, 2), DimensionError);
}

TEST(GenerativeFeatures, MonteCarloErrorShrinksWithBatch) {
  auto sd_over_reps = [](std::size_t batch) {
    std::vector<double> d;
    const auto sampler = iid_sampler();
    const Matrix cond(1, 40, 0.01);
    for (std::uint64_t rep = 0; rep < 300; ++rep) d.push_back(generative_features(sampler(cond, batch, rep * 7919 + batch), 1)[0].m);
    return sample_std(d);
  };
  const double ratio = sd_over_reps(8) / sd_over_reps(32);
  EXPECT_NEAR(ratio, 2.0, 0.4);
}

TEST(HarRidge, MatchesClosedFormOracle) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> rows(5, 60), feats(1, 6);
  std::uniform_real_distribution<double> lam(0.0, 2.0), hl(1.0, 100.0);
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    const auto n = static_cast<std::size_t>(rows(rng));
    const std::size_t p = std::min<std::size_t>(static_cast<std::size_t>(feats(rng)), n - 2);
    const auto xs = normals(n * p, 100 + c);
    const auto ys = normals(n, 200 + c);
    std::vector<std::vector<double>> x(n, std::vector<double>(p));
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t k = 0; k < p; ++k) x[t][k] = 0.5 + xs[t * p + k];
    const double lambda = c % 4 == 0 ? 0.0 : lam(rng), half_life = hl(rng);
    const auto w = exponential_weights(n, half_life);
    const auto want = oracle::ridge_centered(x, ys, w, lambda);
    const HarModel got = fit_har_ridge(rows_to_matrix(x), ys, lambda, half_life);
    worst = std::max(worst, std::abs(got.intercept - want[0]));
    for (std::size_t k = 0; k < p; ++k) worst = std::max(worst, std::abs(got.coefficients[k] - want[k + 1]));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(HarRidge, EqualWeightsNoPenaltyIsOls) {
  const std::size_t n = 40;
  const auto xs = normals(2 * n, 21), noise = normals(n, 22, 0.1);
  Matrix x(n, 2);
  std::vector<double> y(n);
  for (std::size_t t = 0; t < n; ++t) {
    x(t, 0) = xs[2 * t];
    x(t, 1) = xs[2 * t + 1];
    y[t] = 0.3 + 1.5 * x(t, 0) - 0.7 * x(t, 1) + noise[t];
  }
  // Augmented normal equations [1 x]'[1 x] solved directly.
  std::vector<std::vector<double>> a(3, std::vector<double>(3, 0.0));
  std::vector<double> b(3, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const double row[3] = {1.0, x(t, 0), x(t, 1)};
    for (int i = 0; i < 3; ++i) {
      b[i] += row[i] * y[t];
      for (int j = 0; j < 3; ++j) a[i][j] += row[i] * row[j];
    }
  }
  const auto ols = oracle::solve_dense(a, b);
  const HarModel m = fit_har_ridge(x, y, 0.0, 1e15);
  EXPECT_NEAR(m.intercept, ols[0], 1e-10);
  EXPECT_NEAR(m.coefficients[0], ols[1], 1e-10);
  EXPECT_NEAR(m.coefficients[1], ols[2], 1e-10);
}

TEST(HarRidge, ZeroFeaturesAndLargeLambda) {
  const std::size_t n = 30;
  const auto y = normals(n, 31);
  const auto w = exponential_weights(n, 10.0);
  const double wmean = std::inner_product(w.begin(), w.end(), y.begin(), 0.0) / std::accumulate(w.begin(), w.end(), 0.0);
  const HarModel zero = fit_har_ridge(Matrix(n, 3), y, 0.5, 10.0);
  EXPECT_NEAR(zero.intercept, wmean, 1e-12);
  for (double c : zero.coefficients) EXPECT_EQ(c, 0.0);
  try {
    fit_har_ridge(Matrix(n, 3), y, 0.0, 10.0);
    FAIL() << "expected singular system";
  } catch (const InvalidParameters& e) {
    EXPECT_NE(std::string(e.what()).find("lambda > 0"), std::string::npos);
  }
  const auto xs = normals(n * 3, 32);
  const HarModel big = fit_har_ridge(Matrix(n, 3, xs), y, 1e12, 10.0);
  for (double c : big.coefficients) EXPECT_LT(std::abs(c), 1e-9);
  EXPECT_NEAR(big.intercept, wmean, 1e-8);
  EXPECT_THROW(fit_har_ridge(Matrix(1, 1), std::vector<double>{1.0}, 1.0, 10.0), DegenerateData);
  EXPECT_THROW(exponential_weights(3, 0.0), InvalidParameters);
}

TEST(HarRidge, ScalingIdentity) {
  // fit(c x, c y, lambda) has the slopes of fit(x, y, lambda / c^2) and c times its intercept.
  const std::size_t n = 50;
  const auto xs = normals(n * 3, 41), y = normals(n, 42);
  const Matrix x(n, 3, xs);
  for (double c : {0.1, 3.0, 250.0}) {
    Matrix xc = x;
    for (double& v : xc.data()) v *= c;
    std::vector<double> yc = y;
    for (double& v : yc) v *= c;
    const HarModel scaled = fit_har_ridge(xc, yc, 0.7, 20.0);
    const HarModel ref = fit_har_ridge(x, y, 0.7 / (c * c), 20.0);
    EXPECT_NEAR(scaled.intercept, c * ref.intercept, 1e-9 * std::max(1.0, c));
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(scaled.coefficients[k], ref.coefficients[k], 1e-9);
  }
}

TEST(HarRidge, IncrementalDecayMatchesBatchFit) {
  const std::size_t days = 40, per_day = 3;
  const auto xs = normals(days * per_day * 2, 51), y = normals(days * per_day, 52);
  const Matrix x(days * per_day, 2, xs);
  const double hl = 7.0;
  NormalEquations ne(2);
  for (std::size_t d = 0; d < days; ++d) {
    ne.decay(std::exp2(-1.0 / hl));
    for (std::size_t k = 0; k < per_day; ++k) ne.add(x.row(d * per_day + k), y[d * per_day + k], 1.0);
  }
  const HarModel inc = ne.solve(0.3), batch = fit_har_ridge(x, y, 0.3, hl, per_day);
  EXPECT_NEAR(inc.intercept, batch.intercept, 1e-12);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(inc.coefficients[k], batch.coefficients[k], 1e-12);
  EXPECT_THROW(exponential_weights(7, 1.0, 3), DimensionError);
}

TEST(HarRidge, SelectLambdaMinimizesValidationError) {
  const std::size_t n = 200;
  const auto xs = normals(n * 4, 61), noise = normals(n, 62, 2.0);
  const Matrix x(n, 4, xs);
  std::vector<double> y(n);
  for (std::size_t t = 0; t < n; ++t) y[t] = 0.1 * x(t, 0) + noise[t];
  const Matrix xt = x.row_range(0, 150), xv = x.row_range(150, 200);
  const std::span<const double> yt(y.data(), 150), yv(y.data() + 150, 50);
  const double chosen = select_lambda(xt, yt, xv, yv, 50.0);
  auto mse = [&](double lambda) {
    const HarModel m = fit_har_ridge(xt, yt, lambda, 50.0);
    double s = 0.0;
    for (std::size_t t = 0; t < 50; ++t) s += std::pow(yv[t] - m.predict(xv.row(t)), 2);
    return s;
  };
  for (double l : default_lambda_grid()) EXPECT_LE(mse(chosen), mse(l));
  EXPECT_THROW(select_lambda(xt, yt, xv, yv, 50.0, {}), InvalidParameters);
}

TEST(Straddle, PureDecayAndSign) {
  const SyntheticStraddle s = atm_straddle(0, 0.04, 30, 100.0);
  s.validate();
  EXPECT_GT(s.gamma, 0.0);
  EXPECT_LT(s.theta, 0.0);
  EXPECT_NEAR(straddle_daily_pnl(s, 0.0, 1.0).total(), -1.0, 1e-15);
  EXPECT_NEAR(straddle_daily_pnl(s, 0.0, -1.0).total(), 1.0, 1e-15);
  EXPECT_NEAR(straddle_daily_pnl(s, 0.0, 0.5, 2.0).total(), -1.0, 1e-15);
}

TEST(Straddle, BreakevenMove) {
  for (double var : {0.01, 0.04, 0.25}) {
    const SyntheticStraddle s = atm_straddle(0, var, 20, 50.0);
    const double move = std::sqrt(var / 252.0);
    EXPECT_NEAR(straddle_daily_pnl(s, move, 1.0).total(), 0.0, 1e-12);
    EXPECT_NEAR(straddle_daily_pnl(s, -move, 1.0).total(), 0.0, 1e-12);
    EXPECT_GT(straddle_daily_pnl(s, 2 * move, 1.0).total(), 0.0);
  }
}

TEST(Straddle, AntisymmetricInPosition) {
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> var(0.005, 0.5), r(-0.1, 0.1), w(0.0, 2.0);
  for (int k = 0; k < 200; ++k) {
    const SyntheticStraddle s = atm_straddle(0, var(rng), 30, 100.0);
    const double ret = r(rng), weight = w(rng);
    EXPECT_EQ(straddle_daily_pnl(s, ret, weight).total(), -straddle_daily_pnl(s, ret, -weight).total());
  }
}

TEST(Straddle, Validation) {
  SyntheticStraddle s = atm_straddle(0, 0.04, 30, 100.0);
  s.theta = 0.0;
  EXPECT_THROW(straddle_daily_pnl(s, 0.01, 1.0), InvalidParameters);
  EXPECT_THROW(s.validate(), InvalidParameters);
  EXPECT_THROW(atm_straddle(0, 0.0, 30, 100.0), InvalidParameters);
}

TEST(SyntheticMarket, ImpliedVolFromNextStepVariance) {
  Matrix v(5, 2);
  for (std::size_t t = 0; t < 5; ++t) {
    v(t, 0) = 1e-4 * static_cast<double>(t + 1);
    v(t, 1) = 4e-4;
  }
  MarketConfig mc;
  mc.premium = 0.0;
  mc.noise = 0.0;
  mc.strike_sd_bps = 0.0;
  const SyntheticMarket m(v, mc);
  EXPECT_EQ(m.days(), 4u);
  for (std::size_t d = 0; d < 4; ++d) {
    EXPECT_NEAR(m.straddle(d, 0).implied_variance, 252.0 * v(d + 1, 0), 1e-15);
    EXPECT_EQ(m.straddle(d, 0).strike_bps, 0.0);
  }
  mc.premium = 0.05;
  const SyntheticMarket p(v, mc);
  EXPECT_NEAR(p.straddle(0, 1).implied_vol(), std::sqrt(252.0 * 4e-4) * 1.05, 1e-14);
  EXPECT_THROW(m.straddle(4, 0), DimensionError);
  v(3, 1) = 0.0;
  EXPECT_THROW(SyntheticMarket(v, mc), DegenerateData);
}

TEST(Basket, FiveLegWeightsAndTieBreak) {
  std::vector<double> rv(12), iv(12, 0.2);
  for (std::size_t i = 0; i < 12; ++i) rv[i] = 0.1 + 0.01 * static_cast<double>(i);
  const Basket b = rank_and_build_basket(rv, iv, 5);
  ASSERT_EQ(b.legs.size(), 10u);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(b.legs[k].weight, 0.2);
    EXPECT_EQ(b.legs[k].instrument, 11 - k);
    EXPECT_EQ(b.legs[5 + k].weight, -0.2);
  }
  const std::vector<double> flat(12, 0.3);
  const Basket tie = rank_and_build_basket(flat, iv, 3);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(tie.legs[k].instrument, k);
    EXPECT_EQ(tie.legs[3 + k].instrument, 9 + k);
  }
}

TEST(Basket, BoundaryAndFilter) {
  const std::vector<double> rv{0.3, 0.1, 0.5, 0.2}, iv(4, 0.2);
  const Basket all = rank_and_build_basket(rv, iv, 2);
  std::vector<std::size_t> ids;
  for (const auto& l : all.legs) ids.push_back(l.instrument);
  std::sort(ids.begin(), ids.end());
  EXPECT_EQ(ids, (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_THROW(rank_and_build_basket(rv, iv, 3), DegenerateData);
  const std::vector<bool> tradable{true, false, true, true};
  EXPECT_THROW(rank_and_build_basket(rv, iv, 2, tradable), DegenerateData);
  const Basket one = rank_and_build_basket(rv, iv, 1, tradable);
  EXPECT_EQ(one.legs[0].instrument, 2u);
  EXPECT_EQ(one.legs[1].instrument, 3u);
  EXPECT_THROW(rank_and_build_basket(rv, std::vector<double>{0.2, 0.0, 0.2, 0.2}, 1), InvalidParameters);
}

TEST(Basket, ThetaNeutralExactly) {
  std::mt19937_64 rng(81);
  std::uniform_real_distribution<double> u(0.05, 0.8);
  for (std::size_t n = 1; n <= 25; ++n) {
    std::vector<double> rv(60), iv(60);
    for (std::size_t i = 0; i < 60; ++i) {
      rv[i] = u(rng);
      iv[i] = u(rng);
    }
    const Basket b = rank_and_build_basket(rv, iv, n);
    double lo = 0.0, sh = 0.0;
    for (const auto& l : b.legs) (l.weight > 0 ? lo : sh) += l.weight;
    EXPECT_EQ(lo + sh, 0.0);
    EXPECT_NEAR(lo, 1.0, 1e-12);
  }
}

TEST(Backtest, GridShapeLedgerAndNeutrality) {
  const Market m = ngarch_market(60, 600, 3);
  BacktestConfig cfg;
  cfg.seed = 3;
  const auto res = run_backtest(m.panel, m.market, basic_forecasters(), cfg);
  for (PnlMode mode : {PnlMode::LongShort, PnlMode::LongOnly, PnlMode::ShortOnly}) {
    const Matrix g = res.grid(mode);
    EXPECT_EQ(g.rows(), 4u);
    EXPECT_EQ(g.cols(), 5u);
  }
  EXPECT_EQ(res.days.front(), 300u);
  EXPECT_EQ(res.days.size(), 299u);
  for (const auto& cell : res.cells) {
    ASSERT_EQ(cell.ledger.size(), res.days.size() * 2 * cell.n);
    std::size_t k = 0;
    for (std::size_t d = 0; d < res.days.size(); ++d) {
      double lo = 0.0, sh = 0.0, pnl = 0.0;
      for (std::size_t leg = 0; leg < 2 * cell.n; ++leg, ++k) {
        const auto& row = cell.ledger[k];
        EXPECT_EQ(row.day, res.days[d]);
        EXPECT_LE(m.market.straddle(row.day, row.instrument).strike_bps, 50.0);
        (row.weight > 0 ? lo : sh) += row.weight;
        pnl += row.pnl.total();
      }
      EXPECT_EQ(lo + sh, 0.0);
      EXPECT_NEAR(pnl, cell.long_short[d], 1e-12);
      EXPECT_NEAR(cell.long_only[d] + cell.short_only[d], cell.long_short[d], 1e-12);
    }
  }
  EXPECT_TRUE(std::isnan(res.lambdas[0]));
  EXPECT_GT(res.lambdas[2], 0.0);
  const std::string csv = grid_csv(res);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "mode,forecaster,n5,n10,n15,n20,n25");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
}

TEST(Backtest, OracleSignalAndNoSignal) {
  const Market m = ngarch_market(60, 1000, 1);
  BacktestConfig cfg;
  cfg.keep_ledger = false;
  const auto res = run_backtest(m.panel, m.market, basic_forecasters(), cfg);
  const Matrix g = res.grid(PnlMode::LongShort);
  EXPECT_GT(g(0, 4), 0.0);
  for (std::size_t s = 1; s < 5; ++s) EXPECT_LE(g(0, s), g(0, s - 1));
  // Implied-vol forecasts tie everywhere: a fixed basket with no information.
  EXPECT_GT(one_sample_t_test(res.series(1, 0, PnlMode::LongShort)).p_two_sided, 0.05);
}

TEST(Backtest, OracleDominatesNoSignalAcrossSeeds) {
  std::vector<double> diff;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Market m = ngarch_market(24, 300, 100 + seed);
    BacktestConfig cfg;
    cfg.basket_sizes = {5};
    cfg.keep_ledger = false;
    cfg.history = 100;
    const auto res = run_backtest(m.panel, m.market, {{"oracle", ForecasterKind::Oracle, {}}, {"implied", ForecasterKind::Implied, {}}}, cfg);
    const Matrix g = res.grid(PnlMode::LongShort);
    diff.push_back(g(0, 0) - g(1, 0));
  }
  EXPECT_LT(one_sample_t_test(diff).p_greater, 0.05);
}

TEST(Backtest, GenerativeForecasterAndDeterminism) {
  const Market m = ngarch_market(30, 400, 9);
  BacktestConfig cfg;
  cfg.basket_sizes = {5, 10};
  cfg.history = 120;
  std::vector<Forecaster> fs{{"har_gen", ForecasterKind::HarGen, iid_sampler()}, {"har", ForecasterKind::Har, {}}};
  const auto a = run_backtest(m.panel, m.market, fs, cfg);
  cfg.jobs = 3;
  const auto b = run_backtest(m.panel, m.market, fs, cfg);
  EXPECT_EQ(a.grid(PnlMode::LongShort), b.grid(PnlMode::LongShort));
  EXPECT_EQ(ledger_csv(a), ledger_csv(b));
  EXPECT_TRUE(std::isfinite(a.lambdas[0]));
  fs[0].sampler = nullptr;
  EXPECT_THROW(run_backtest(m.panel, m.market, fs, cfg), ConfigError);
}

TEST(Backtest, StrikeFilterAndShortPanels) {
  MarketConfig mc;
  mc.strike_sd_bps = 40.0;
  const Market m = ngarch_market(60, 400, 12, mc);
  BacktestConfig cfg;
  cfg.basket_sizes = {5};
  const auto res = run_backtest(m.panel, m.market, {{"oracle", ForecasterKind::Oracle, {}}}, cfg);
  std::size_t filtered_days = 0;
  for (std::size_t d : res.days) {
    std::size_t wide = 0;
    for (std::size_t i = 0; i < 60; ++i) wide += m.market.straddle(d, i).strike_bps > 50.0;
    filtered_days += wide > 0;
  }
  EXPECT_GT(filtered_days, 0u);
  for (const auto& row : res.cells[0].ledger) EXPECT_LE(m.market.straddle(row.day, row.instrument).strike_bps, 50.0);
  cfg.basket_sizes = {31};
  EXPECT_THROW(run_backtest(m.panel, m.market, {{"oracle", ForecasterKind::Oracle, {}}}, cfg), DegenerateData);
  const Market tiny = ngarch_market(12, 45, 1);
  cfg.basket_sizes = {5};
  EXPECT_THROW(run_backtest(tiny.panel, tiny.market, {{"oracle", ForecasterKind::Oracle, {}}}, cfg), DegenerateData);
}
