#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <vector>

#include "ftsbench/generators/dataset.hpp"
#include "ftsbench/generators/panel_io.hpp"

using namespace ftsbench;
using namespace ftsbench::generators;

namespace {

std::vector<double> normals(std::uint64_t seed, std::size_t n) {
  Engine rng(seed);
  std::vector<double> z(n);
  fill_normal(rng, z);
  return z;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

double corr_of(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean_of(a), mb = mean_of(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

NGarchParams quiet_ngarch() {
  NGarchParams p;
  p.omega = 1e-5;
  p.alpha = 0.1;
  p.beta = 0.05;
  p.gamma = 0.0;
  p.sigma0 = std::sqrt(p.unconditional_variance());
  return p;
}

GeneratorSpec single_segment(ModelFamily family, SegmentParams params, std::size_t n, std::size_t length) {
  GeneratorSpec s;
  s.family = family;
  s.instruments = n;
  s.segments = {Segment{length, std::move(params)}};
  s.correlation = BlockCorrelationSpec::identity(n);
  s.burn_in = 0;
  s.seed = 42;
  return s;
}

}  // namespace

TEST(Ngarch, CollapsesToConstantVariance) {
  NGarchParams p{0.001, 4e-4, 0.0, 0.0, 0.0, 0.02};
  const auto z = normals(1, 100);
  const auto path = simulate_ngarch(p, 100, z);
  for (std::size_t t = 1; t < 100; ++t) {
    EXPECT_DOUBLE_EQ(path.variances[t], 4e-4);
    EXPECT_DOUBLE_EQ(path.returns[t], 0.001 + 0.02 * z[t]);
  }
}

TEST(Ngarch, ZeroShocksReturnMean) {
  NGarchParams p = quiet_ngarch();
  p.mu = 0.05;
  const auto path = simulate_ngarch(p, 50, std::vector<double>(50, 0.0));
  for (double r : path.returns) EXPECT_EQ(r, 0.05);
}

TEST(Ngarch, UnconditionalVariance) {
  NGarchParams p{0.0, 1e-5, 0.90, 0.05, 0.5, 0.0};
  p.sigma0 = std::sqrt(p.unconditional_variance());
  EXPECT_NEAR(p.unconditional_variance(), 1e-5 / (1.0 - 0.90 - 0.05 * 1.25), 1e-18);
  const std::size_t n = 200000;
  const auto path = simulate_ngarch(p, n, normals(2, n));
  EXPECT_NEAR(variance_of(path.returns) / p.unconditional_variance(), 1.0, 0.05);
}

TEST(Ngarch, InvalidParametersRejected) {
  NGarchParams p{0.0, 1e-5, 0.9, 0.1, 0.5, 0.01};
  EXPECT_THROW(simulate_ngarch(p, 1, std::vector<double>{0.0}), InvalidParameters);
  p = quiet_ngarch();
  p.omega = 0.0;
  EXPECT_THROW(simulate_ngarch(p, 1, std::vector<double>{0.0}), InvalidParameters);
  EXPECT_THROW(simulate_ngarch(quiet_ngarch(), 2, std::vector<double>{0.0}), DimensionError);
}

TEST(Ngarch, VolatilityClustering) {
  NGarchParams p{0.0, 1e-6, 0.85, 0.08, 0.3, 0.0};
  ASSERT_GE(p.persistence(), 0.9);
  p.sigma0 = std::sqrt(p.unconditional_variance());
  const std::size_t n = 50000;
  const auto path = simulate_ngarch(p, n, normals(3, n));
  std::vector<double> sq, a, b;
  for (double r : path.returns) sq.push_back(r * r);
  a.assign(sq.begin(), sq.end() - 1);
  b.assign(sq.begin() + 1, sq.end());
  // One-sided 1% test against zero autocorrelation: z = rho * sqrt(n) > 2.326.
  EXPECT_GT(corr_of(a, b) * std::sqrt(static_cast<double>(n)), 2.326);
}

TEST(Ngarch, LeverageEffect) {
  NGarchParams p{0.0, 1e-6, 0.85, 0.08, 0.5, 0.0};
  p.sigma0 = std::sqrt(p.unconditional_variance());
  const std::size_t n = 100000;
  const auto path = simulate_ngarch(p, n, normals(4, n));
  std::vector<double> r(path.returns.begin(), path.returns.end() - 1);
  std::vector<double> v(path.variances.begin() + 1, path.variances.end());
  EXPECT_LT(corr_of(r, v), 0.0);
}

TEST(Heston, DegenerateCirStaysAtTheta) {
  HestonParams p;
  p.sigma_v = 0.0;
  p.v0 = p.theta;
  std::vector<std::pair<double, double>> shocks(300);
  const auto z = normals(5, 600);
  for (std::size_t t = 0; t < 300; ++t) shocks[t] = {z[2 * t], z[2 * t + 1]};
  const auto path = simulate_heston(p, 300, shocks);
  for (double v : path.variances) EXPECT_NEAR(v, p.theta, 1e-15);
}

TEST(Heston, DeterministicOdeSolution) {
  HestonParams p;
  p.sigma_v = 0.0;
  p.v0 = 0.16;
  p.kappa = 3.0;
  std::vector<std::pair<double, double>> shocks(500, {0.0, 0.0});
  const auto path = simulate_heston(p, 500, shocks);
  for (std::size_t t = 0; t < 500; ++t) {
    const double time = static_cast<double>(t) * p.dt;
    const double exact = p.theta + (p.v0 - p.theta) * std::exp(-p.kappa * time);
    EXPECT_NEAR(path.variances[t], exact, 2.0 * p.dt * std::abs(p.v0 - p.theta));
  }
}

TEST(Heston, MartingaleUnderZeroDrift) {
  HestonParams p;
  p.mu = 0.0;
  const std::size_t paths = 50000, steps = 252;
  Engine rng(6);
  std::normal_distribution<double> nd;
  std::vector<double> ratio(paths);
  std::vector<std::pair<double, double>> shocks(steps);
  for (std::size_t k = 0; k < paths; ++k) {
    for (auto& s : shocks) {
      const double zs = nd(rng);
      s = {zs, correlate_variance_shock(p.rho, zs, nd(rng))};
    }
    ratio[k] = simulate_heston(p, steps, shocks).prices.back() / p.s0;
  }
  const double se = std::sqrt(variance_of(ratio) / static_cast<double>(paths));
  EXPECT_LT(std::abs(mean_of(ratio) - 1.0), 3.0 * se);
}

TEST(Heston, FullTruncationKeepsVarianceNonNegative) {
  HestonParams p;
  p.sigma_v = 1.5;
  p.kappa = 0.5;
  const std::size_t steps = 20000;
  const auto z = normals(7, 2 * steps);
  std::vector<std::pair<double, double>> shocks(steps);
  for (std::size_t t = 0; t < steps; ++t) shocks[t] = {z[2 * t], correlate_variance_shock(p.rho, z[2 * t], z[2 * t + 1])};
  const auto path = simulate_heston(p, steps, shocks);
  for (double v : path.variances) EXPECT_GE(v, 0.0);
  for (double r : path.log_returns) EXPECT_TRUE(std::isfinite(r));
}

TEST(Fsv, NoFactorsGivesDiagonalGaussian) {
  FsvForwardParams p;
  p.loadings = Matrix(3, 1);
  p.h_mean = {-8.0, -9.0, -7.0, -8.0};
  p.h_persistence = {0.9, 0.9, 0.9, 0.9};
  p.h_std = {0.0, 0.0, 0.0, 0.0};
  GeneratorSpec spec = single_segment(ModelFamily::Fsv, p, 3, 50000);
  const ReturnPanel panel = build_dataset(spec);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(variance_of(panel.returns.col(i)) / std::exp(p.h_mean[i]), 1.0, 0.03);
    EXPECT_DOUBLE_EQ(panel.variance(100, i), std::exp(p.h_mean[i]));
  }
  EXPECT_LT(std::abs(corr_of(panel.returns.col(0), panel.returns.col(1))), 0.02);
}

TEST(Fsv, SingleFactorDrivesCorrelationToOne) {
  FsvForwardParams p;
  p.loadings = Matrix{{1.0}, {1.0}, {1.0}};
  p.h_mean = {-30.0, -30.0, -30.0, -8.0};
  p.h_persistence = {0.5, 0.5, 0.5, 0.95};
  p.h_std = {0.1, 0.1, 0.1, 0.2};
  const ReturnPanel panel = build_dataset(single_segment(ModelFamily::Fsv, p, 3, 5000));
  EXPECT_GT(corr_of(panel.returns.col(0), panel.returns.col(2)), 0.999999);
}

TEST(Fsv, CovarianceMatchesStationaryMoments) {
  FsvForwardParams p;
  p.loadings = Matrix{{0.8}, {0.5}, {-0.6}};
  p.h_mean = {-9.0, -8.5, -9.5, -8.0};
  p.h_persistence = {0.9, 0.8, 0.95, 0.97};
  p.h_std = {0.2, 0.3, 0.15, 0.15};
  const ReturnPanel panel = build_dataset(single_segment(ModelFamily::Fsv, p, 3, 100000));
  const double fv = p.expected_variance(3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      const auto a = panel.returns.col(i), b = panel.returns.col(j);
      const double ma = mean_of(a), mb = mean_of(b);
      double cov = 0.0;
      for (std::size_t t = 0; t < a.size(); ++t) cov += (a[t] - ma) * (b[t] - mb);
      cov /= static_cast<double>(a.size());
      double expected = p.loadings(i, 0) * p.loadings(j, 0) * fv;
      if (i == j) expected += p.expected_variance(i);
      EXPECT_NEAR(cov / expected, 1.0, 0.10) << i << "," << j;
    }
  }
}

TEST(Fsv, ValidationErrors) {
  FsvForwardParams p;
  p.loadings = Matrix(2, 2);
  p.h_mean = p.h_persistence = p.h_std = std::vector<double>(4, 0.0);
  EXPECT_THROW(p.validate(), InvalidParameters);
  p.loadings = Matrix{{1.0}, {0.5}};
  p.h_mean = p.h_std = std::vector<double>(3, 0.0);
  p.h_persistence = {0.5, 1.0, 0.5};
  EXPECT_THROW(p.validate(), InvalidParameters);
}

TEST(Correlation, IdentityLeavesShocksUnchanged) {
  Matrix z(50, 4);
  Engine rng(8);
  fill_normal(rng, z.data());
  EXPECT_TRUE(apply_correlation(Matrix::identity(4), z) == z);
}

TEST(Correlation, PerfectCorrelationCopiesColumn) {
  Matrix z(100, 2);
  Engine rng(9);
  fill_normal(rng, z.data());
  const Matrix c = apply_correlation(Matrix{{1.0, 1.0}, {1.0, 1.0}}, z);
  for (std::size_t t = 0; t < 100; ++t) EXPECT_EQ(c(t, 0), c(t, 1));
}

TEST(Correlation, BlockModelSampleCorrelations) {
  const auto spec = BlockCorrelationSpec::even(10, 2, 0.7, 0.1);
  const Matrix target = spec.matrix();
  Matrix z(100000, 10);
  Engine rng(10);
  fill_normal(rng, z.data());
  const Matrix c = apply_correlation(spec, z);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < i; ++j) EXPECT_NEAR(corr_of(c.col(i), c.col(j)), target(i, j), 0.02);
}

TEST(Correlation, NonPdSpecRejected) {
  BlockCorrelationSpec s{{2, 2}, {0.5, 0.5}, 0.9};
  EXPECT_THROW(s.validate(), NotPositiveDefinite);
  EXPECT_THROW(apply_correlation(Matrix{{1.0, 2.0}, {2.0, 1.0}}, Matrix(3, 2)), NotPositiveDefinite);
}

namespace {

GeneratorSpec regime_spec(double percentile, double omega_boost) {
  GeneratorSpec s;
  s.family = ModelFamily::NGarch;
  s.instruments = 3;
  s.burn_in = 500;
  s.seed = 77;
  s.correlation = BlockCorrelationSpec::identity(3);
  NGarchParams calm = quiet_ngarch();
  NGarchParams wild = calm;
  wild.omega *= omega_boost;
  wild.sigma0 = std::sqrt(wild.unconditional_variance());
  s.segments = {Segment{500, std::vector<NGarchParams>{calm}}, Segment{500, std::vector<NGarchParams>{wild}}};
  RegimeConfig r;
  r.window = 20;
  r.percentile = percentile;
  r.low = BlockCorrelationSpec::even(3, 1, 0.2, 0.0);
  r.high = BlockCorrelationSpec::even(3, 1, 0.9, 0.0);
  s.regimes = r;
  return s;
}

}  // namespace

TEST(Regimes, PercentileHundredNeverTriggers) {
  const FullPath full = simulate_full(regime_spec(100.0, 25.0));
  for (int l : full.panel.regime) EXPECT_EQ(l, 0);
}

TEST(Regimes, PercentileZeroAlwaysHighAfterBurnIn) {
  const FullPath full = simulate_full(regime_spec(0.0, 1.0));
  for (std::size_t t = 0; t < full.panel.steps(); ++t)
    EXPECT_EQ(full.panel.regime[t], t >= full.burn_in ? 1 : 0) << t;
}

TEST(Regimes, HighVolatilitySegmentSwitchesWithinWindow) {
  const auto spec = regime_spec(80.0, 25.0);
  const ReturnPanel panel = build_dataset(spec);
  const std::size_t start = 500;
  bool switched = false;
  for (std::size_t t = start; t <= start + spec.regimes->window; ++t) switched = switched || panel.regime[t] == 1;
  EXPECT_TRUE(switched);
  const double high_share =
      std::accumulate(panel.regime.begin() + start, panel.regime.end(), 0.0) / static_cast<double>(panel.steps() - start);
  EXPECT_GT(high_share, 0.9);
}

TEST(Regimes, LabelsAreDeterministicFunctionOfPath) {
  const auto spec = regime_spec(80.0, 25.0);
  const FullPath full = simulate_full(spec);
  const RegimeSeries replay = apply_regimes(full.panel.returns, *spec.regimes, spec.burn_in);
  EXPECT_EQ(replay.labels, full.panel.regime);
}

TEST(Regimes, BurnInTooShort) {
  auto spec = regime_spec(80.0, 1.0);
  spec.burn_in = 10;
  EXPECT_THROW(build_dataset(spec), InvalidParameters);
  EXPECT_THROW(RegimeTracker(*spec.regimes, 3, 10), InvalidParameters);
}

TEST(Jumps, ZeroIntensityOnlyForcedDays) {
  JumpConfig cfg;
  cfg.p_base = 0.0;
  cfg.p_amplitude = 0.0;
  cfg.normal.intensity = 0.0;
  cfg.large.intensity = 0.0;
  Engine rng(11);
  const JumpSample s = sample_jumps(cfg, 1260, 4, rng);
  for (double v : s.additions.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(std::accumulate(s.large_regime.begin(), s.large_regime.end(), 0), 10);

  cfg.large.intensity = 1.0;
  Engine rng2(11);
  const JumpSample forced = sample_jumps(cfg, 1260, 4, rng2);
  for (std::size_t t = 0; t < 1260; ++t)
    for (std::size_t i = 0; i < 4; ++i)
      if (!forced.large_regime[t]) {
        EXPECT_EQ(forced.counts(t, i), 0.0);
      }
}

TEST(Jumps, PoissonMean) {
  JumpConfig cfg;
  cfg.p_base = 0.0;
  cfg.p_amplitude = 0.0;
  cfg.normal.intensity = 0.1;
  cfg.large.intensity = 0.1;
  Engine rng(12);
  const std::size_t days = 100000;
  const JumpSample s = sample_jumps(cfg, days, 1, rng);
  const double mean = std::accumulate(s.counts.data().begin(), s.counts.data().end(), 0.0) / days;
  EXPECT_LT(std::abs(mean - 0.1), 3.0 * std::sqrt(0.1 / days));
}

TEST(Jumps, EverySemiAnnualBlockHasLargeRegime) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    JumpConfig cfg;
    cfg.p_amplitude = seed % 2 ? 0.0 : 0.01;
    Engine rng(seed);
    const JumpSample s = sample_jumps(cfg, 1260, 2, rng);
    for (std::size_t b = 0; b < 10; ++b) {
      const auto first = s.large_regime.begin() + static_cast<std::ptrdiff_t>(b * 126);
      EXPECT_GE(std::accumulate(first, first + 126, 0), 1) << "seed " << seed << " block " << b;
    }
  }
}

TEST(Jumps, InvalidConfig) {
  JumpConfig cfg;
  cfg.p_amplitude = 1.5;
  EXPECT_THROW(cfg.validate(), InvalidParameters);
  cfg = JumpConfig{};
  cfg.large.std = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidParameters);
}

TEST(Dataset, SingleSegmentMatchesDirectNgarch) {
  const NGarchParams p{1e-4, 2e-6, 0.85, 0.08, 0.3, 0.01};
  const GeneratorSpec spec = single_segment(ModelFamily::NGarch, std::vector<NGarchParams>{p}, 1, 300);
  const ReturnPanel panel = build_dataset(spec);
  Engine rng = make_engine(spec.seed, "price");
  std::vector<double> z(300);
  std::normal_distribution<double> nd;
  for (double& v : z) v = nd(rng);
  const auto direct = simulate_ngarch(p, 300, z);
  EXPECT_EQ(panel.returns.col(0), direct.returns);
  EXPECT_EQ(panel.variance.col(0), direct.variances);
}

TEST(Dataset, SingleSegmentMatchesDirectHeston) {
  const HestonParams p;
  const GeneratorSpec spec = single_segment(ModelFamily::Heston, std::vector<HestonParams>{p}, 1, 300);
  const ReturnPanel panel = build_dataset(spec);
  Engine price = make_engine(spec.seed, "price"), var = make_engine(spec.seed, "variance");
  std::normal_distribution<double> nd_price, nd_var;
  std::vector<std::pair<double, double>> shocks(300);
  for (auto& s : shocks) {
    const double zs = nd_price(price);
    s = {zs, correlate_variance_shock(p.rho, zs, nd_var(var))};
  }
  const auto direct = simulate_heston(p, 300, shocks);
  EXPECT_EQ(panel.returns.col(0), direct.log_returns);
}

TEST(Dataset, FiftyStitchedSegments) {
  GeneratorSpec spec = make_preset("ngarch", 2, 25000, 50, 3);
  EXPECT_EQ(spec.segments.size(), 50u);
  for (const auto& s : spec.segments) EXPECT_EQ(s.length, 500u);
  EXPECT_EQ(build_dataset(spec).steps(), 25000u);
}

TEST(Dataset, HestonPlusJumpsClusterInLargeRegime) {
  const ReturnPanel panel = build_dataset(make_preset("heston_plus", 5, 5000, 3, 9));
  double large_days = 0, large_jumps = 0, normal_days = 0, normal_jumps = 0;
  for (std::size_t t = 0; t < panel.steps(); ++t) {
    double k = 0;
    for (std::size_t i = 0; i < panel.instruments(); ++i) k += panel.jumps(t, i);
    if (panel.jump_regime[t]) {
      large_days += 1;
      large_jumps += k;
    } else {
      normal_days += 1;
      normal_jumps += k;
    }
  }
  ASSERT_GT(large_days, 0);
  EXPECT_GT(large_jumps / large_days, 5.0 * normal_jumps / normal_days);
}

TEST(Dataset, DeterministicPerSeed) {
  const auto spec = make_preset("heston_plus", 4, 1200, 3, 21);
  const ReturnPanel a = build_dataset(spec), b = build_dataset(spec);
  EXPECT_TRUE(a.returns == b.returns);
  EXPECT_TRUE(a.variance == b.variance);
  EXPECT_EQ(a.regime, b.regime);
  EXPECT_EQ(a.spec_hash, b.spec_hash);
  auto other = spec;
  other.seed = 22;
  EXPECT_FALSE(build_dataset(other).returns == a.returns);
}

TEST(Dataset, SpecValidation) {
  GeneratorSpec s = single_segment(ModelFamily::NGarch, std::vector<NGarchParams>{quiet_ngarch()}, 2, 30);
  EXPECT_THROW(build_dataset(s), InvalidParameters);
  s.segments.clear();
  EXPECT_THROW(build_dataset(s), InvalidParameters);
  s = single_segment(ModelFamily::Heston, std::vector<NGarchParams>{quiet_ngarch()}, 2, 100);
  EXPECT_THROW(build_dataset(s), InvalidParameters);
}

TEST(Split, DefaultFractions) {
  const auto p = ReturnPanel::from_returns(Matrix(1000, 2));
  const auto s = split_dataset(p);
  EXPECT_EQ(s.train.steps(), 600u);
  EXPECT_EQ(s.validation.steps(), 200u);
  EXPECT_EQ(s.test.steps(), 200u);
  const auto big = split_dataset(ReturnPanel::from_returns(Matrix(25000, 1)));
  EXPECT_EQ(big.train.steps(), 15000u);
  EXPECT_EQ(big.validation.steps(), 5000u);
  EXPECT_EQ(big.test.steps(), 5000u);
}

TEST(Split, AllTrainAndContiguity) {
  Matrix r(200, 1);
  for (std::size_t t = 0; t < 200; ++t) r(t, 0) = static_cast<double>(t);
  const auto s = split_dataset(ReturnPanel::from_returns(r), {1.0, 0.0, 0.0});
  EXPECT_EQ(s.train.steps(), 200u);
  EXPECT_EQ(s.validation.steps(), 0u);
  EXPECT_EQ(s.test.steps(), 0u);
  const auto t = split_dataset(ReturnPanel::from_returns(Matrix(r)), {0.5, 0.5, 0.0});
  EXPECT_EQ(t.validation.returns(0, 0), 100.0);
}

TEST(Split, Errors) {
  EXPECT_THROW(split_dataset(ReturnPanel::from_returns(Matrix(100, 1))), DegenerateData);
  EXPECT_THROW(split_dataset(ReturnPanel::from_returns(Matrix(1000, 1)), {0.5, 0.2, 0.2}), InvalidParameters);
}

TEST(Windows, CountsAndContents) {
  Matrix r(120, 3);
  for (std::size_t t = 0; t < 120; ++t)
    for (std::size_t i = 0; i < 3; ++i) r(t, i) = static_cast<double>(100 * t + i);
  EXPECT_EQ(conditioning_windows(r.row_range(0, 80)).size(), 1u);
  const auto w = conditioning_windows(r);
  ASSERT_EQ(w.size(), 41u);
  for (std::size_t t = 0; t < 40; ++t)
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(w[0].condition(i, t), r(t, i));
      EXPECT_EQ(w[0].target(i, t), r(40 + t, i));
      EXPECT_EQ(w[40].target(i, t), r(80 + t, i));
    }
  EXPECT_THROW(conditioning_windows(r.row_range(0, 79)), DegenerateData);
}

TEST(SpecIo, JsonRoundTripPreservesHash) {
  const auto spec = make_preset("heston_plus", 5, 1500, 3, 5);
  const nlohmann::json j = spec;
  const GeneratorSpec back = j.get<GeneratorSpec>();
  EXPECT_EQ(spec_hash(back), spec_hash(spec));
  EXPECT_EQ(nlohmann::json(back).dump(), j.dump());
  EXPECT_TRUE(build_dataset(back).returns == build_dataset(spec).returns);
}

TEST(SpecIo, PresetForm) {
  const auto j = nlohmann::json::parse(R"({"preset":"ngarch_plus","instruments":5,"length":5000,"segments":3,"seed":4})");
  const GeneratorSpec s = j.get<GeneratorSpec>();
  EXPECT_EQ(s.total_length(), 5000u);
  EXPECT_EQ(s.segments[0].length, 1667u);
  EXPECT_EQ(s.segments[2].length, 1666u);
  ASSERT_TRUE(s.regimes.has_value());
  EXPECT_FALSE(s.jumps.has_value());
  for (const auto& seg : s.segments)
    for (const auto& p : std::get<0>(seg.params)) EXPECT_LT(p.persistence(), 0.99);
  EXPECT_THROW(make_preset("fsv_plus", 5, 5000, 3, 1), ConfigError);
}

TEST(PanelIo, RoundTripAndTamperDetection) {
  const auto dir = std::filesystem::temp_directory_path() / "ftsbench_panel_io";
  std::filesystem::create_directories(dir);
  const std::string base = (dir / "heston").string();
  const auto spec = make_preset("heston_plus", 3, 400, 2, 8);
  const ReturnPanel panel = build_dataset(spec);
  write_panel(base, panel, nlohmann::json(spec));
  const ReturnPanel back = read_panel(base);
  EXPECT_TRUE(back.returns == panel.returns);
  EXPECT_TRUE(back.variance == panel.variance);
  EXPECT_TRUE(back.jumps == panel.jumps);
  EXPECT_EQ(back.regime, panel.regime);
  EXPECT_EQ(back.jump_regime, panel.jump_regime);
  EXPECT_EQ(back.ids, panel.ids);
  std::string csv = read_file(base + ".csv");
  csv[csv.size() - 2] = csv[csv.size() - 2] == '1' ? '2' : '1';
  write_file(base + ".csv", csv);
  EXPECT_THROW(read_panel(base), IoError);
  std::filesystem::remove_all(dir);
}
