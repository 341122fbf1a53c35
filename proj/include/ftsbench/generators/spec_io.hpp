#pragma once

#include <random>
#include <string>

#include "json.hpp"

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/hash.hpp"
#include "ftsbench/generators/dataset.hpp"

namespace ftsbench::generators {

using nlohmann::json;

inline void to_json(json& j, const NGarchParams& p) {
  j = {{"mu", p.mu}, {"omega", p.omega}, {"alpha", p.alpha}, {"beta", p.beta},
       {"gamma", p.gamma}, {"sigma0", p.sigma0}};
}
inline void from_json(const json& j, NGarchParams& p) {
  p.mu = j.value("mu", 0.0);
  p.omega = j.at("omega").get<double>();
  p.alpha = j.at("alpha").get<double>();
  p.beta = j.at("beta").get<double>();
  p.gamma = j.value("gamma", 0.0);
  p.sigma0 = j.contains("sigma0") ? j.at("sigma0").get<double>() : std::sqrt(p.unconditional_variance());
}

inline void to_json(json& j, const HestonParams& p) {
  j = {{"mu", p.mu}, {"kappa", p.kappa}, {"theta", p.theta}, {"sigma_v", p.sigma_v},
       {"rho", p.rho}, {"v0", p.v0}, {"s0", p.s0}, {"dt", p.dt}};
}
inline void from_json(const json& j, HestonParams& p) {
  p.mu = j.value("mu", 0.0);
  p.kappa = j.at("kappa").get<double>();
  p.theta = j.at("theta").get<double>();
  p.sigma_v = j.at("sigma_v").get<double>();
  p.rho = j.value("rho", 0.0);
  p.v0 = j.value("v0", p.theta);
  p.s0 = j.value("s0", 100.0);
  p.dt = j.value("dt", 1.0 / 252.0);
}

inline void to_json(json& j, const FsvForwardParams& p) {
  j = {{"instruments", p.loadings.rows()}, {"factors", p.loadings.cols()},
       {"loadings", p.loadings.storage()}, {"h_mean", p.h_mean},
       {"h_persistence", p.h_persistence}, {"h_std", p.h_std},
       {"upper_triangular", p.upper_triangular}};
}
inline void from_json(const json& j, FsvForwardParams& p) {
  p.loadings = Matrix(j.at("instruments").get<std::size_t>(), j.at("factors").get<std::size_t>(),
                      j.at("loadings").get<std::vector<double>>());
  p.h_mean = j.at("h_mean").get<std::vector<double>>();
  p.h_persistence = j.at("h_persistence").get<std::vector<double>>();
  p.h_std = j.at("h_std").get<std::vector<double>>();
  p.upper_triangular = j.value("upper_triangular", false);
}

inline void to_json(json& j, const BlockCorrelationSpec& s) {
  j = {{"block_sizes", s.block_sizes}, {"within", s.within}, {"across", s.across}};
}
inline void from_json(const json& j, BlockCorrelationSpec& s) {
  s.block_sizes = j.at("block_sizes").get<std::vector<std::size_t>>();
  s.within = j.at("within").get<std::vector<double>>();
  s.across = j.value("across", 0.0);
}

inline void to_json(json& j, const RegimeConfig& c) {
  j = {{"window", c.window}, {"percentile", c.percentile}, {"low", c.low}, {"high", c.high}};
}
inline void from_json(const json& j, RegimeConfig& c) {
  c.window = j.value("window", std::size_t{20});
  c.percentile = j.value("percentile", 80.0);
  c.low = j.at("low").get<BlockCorrelationSpec>();
  c.high = j.at("high").get<BlockCorrelationSpec>();
}

inline void to_json(json& j, const JumpLaw& l) {
  j = {{"intensity", l.intensity}, {"mean", l.mean}, {"std", l.std}};
}
inline void from_json(const json& j, JumpLaw& l) {
  l.intensity = j.at("intensity").get<double>();
  l.mean = j.value("mean", 0.0);
  l.std = j.at("std").get<double>();
}

inline void to_json(json& j, const JumpConfig& c) {
  j = {{"p_base", c.p_base}, {"p_amplitude", c.p_amplitude}, {"period", c.period},
       {"normal", c.normal}, {"large", c.large}, {"horizon", c.horizon}};
}
inline void from_json(const json& j, JumpConfig& c) {
  c = JumpConfig{};
  c.p_base = j.value("p_base", c.p_base);
  c.p_amplitude = j.value("p_amplitude", c.p_amplitude);
  c.period = j.value("period", c.period);
  if (j.contains("normal")) c.normal = j.at("normal").get<JumpLaw>();
  if (j.contains("large")) c.large = j.at("large").get<JumpLaw>();
  c.horizon = j.value("horizon", c.horizon);
}

inline std::string family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::NGarch: return "ngarch";
    case ModelFamily::Heston: return "heston";
    case ModelFamily::Fsv: return "fsv";
  }
  return "unknown";
}

inline ModelFamily parse_family(const std::string& s) {
  if (s == "ngarch") return ModelFamily::NGarch;
  if (s == "heston") return ModelFamily::Heston;
  if (s == "fsv") return ModelFamily::Fsv;
  throw ConfigError("unknown model family '" + s + "'");
}

inline void to_json(json& j, const GeneratorSpec& s) {
  json segs = json::array();
  for (const auto& seg : s.segments) {
    json js = {{"length", seg.length}};
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, std::vector<NGarchParams>>) js["ngarch"] = p;
          else if constexpr (std::is_same_v<T, std::vector<HestonParams>>) js["heston"] = p;
          else js["fsv"] = p;
        },
        seg.params);
    segs.push_back(std::move(js));
  }
  j = {{"family", family_name(s.family)}, {"instruments", s.instruments}, {"segments", segs},
       {"correlation", s.correlation}, {"burn_in", s.burn_in}, {"seed", s.seed},
       {"ids", s.instrument_ids()}};
  j["regimes"] = s.regimes ? json(*s.regimes) : json(nullptr);
  j["jumps"] = s.jumps ? json(*s.jumps) : json(nullptr);
}

GeneratorSpec make_preset(const std::string& name, std::size_t instruments, std::size_t length,
                          std::size_t segments, std::uint64_t seed, std::size_t burn_in = 500);

inline void from_json(const json& j, GeneratorSpec& s) {
  if (j.contains("preset")) {
    s = make_preset(j.at("preset").get<std::string>(), j.value("instruments", std::size_t{5}),
                    j.value("length", std::size_t{5000}), j.value("segments", std::size_t{3}),
                    j.value("seed", std::uint64_t{1}), j.value("burn_in", std::size_t{500}));
    return;
  }
  s = GeneratorSpec{};
  s.family = parse_family(j.at("family").get<std::string>());
  s.instruments = j.at("instruments").get<std::size_t>();
  for (const auto& js : j.at("segments")) {
    Segment seg;
    seg.length = js.at("length").get<std::size_t>();
    if (js.contains("ngarch")) seg.params = js.at("ngarch").get<std::vector<NGarchParams>>();
    else if (js.contains("heston")) seg.params = js.at("heston").get<std::vector<HestonParams>>();
    else if (js.contains("fsv")) seg.params = js.at("fsv").get<FsvForwardParams>();
    else throw ConfigError("segment without ngarch/heston/fsv parameters");
    s.segments.push_back(std::move(seg));
  }
  s.correlation = j.contains("correlation") ? j.at("correlation").get<BlockCorrelationSpec>()
                                            : BlockCorrelationSpec::identity(s.instruments);
  if (j.contains("regimes") && !j.at("regimes").is_null()) s.regimes = j.at("regimes").get<RegimeConfig>();
  if (j.contains("jumps") && !j.at("jumps").is_null()) s.jumps = j.at("jumps").get<JumpConfig>();
  s.burn_in = j.value("burn_in", std::size_t{500});
  s.seed = j.value("seed", std::uint64_t{1});
  if (j.contains("ids")) s.ids = j.at("ids").get<std::vector<std::string>>();
}

inline std::string spec_hash(const GeneratorSpec& spec) { return sha256_hex(json(spec).dump()); }

/// Stitched dataset definitions. Segment parameters are drawn from fixed ranges with a stream
/// derived from the seed:
///   ngarch: daily unconditional variance in [1e-4, 4e-4], alpha in [0.80, 0.90],
///           beta in [0.04, 0.10], gamma in [0, 0.8] (redrawn until persistence < 0.99),
///           mu in [-2e-4, 5e-4];
///   heston: kappa in [1, 4], theta in [0.02, 0.09], sigma_v in [0.2, 0.6],
///           rho in [-0.8, -0.3], mu in [0, 0.1], v0 = theta.
/// Two correlation blocks (0.6 within, 0.1 across). "_plus" variants add volatility regimes
/// (window 20, 80th percentile; high regime 0.85 within, 0.5 across); heston_plus adds
/// earnings-cycle jumps with the JumpConfig defaults.
inline GeneratorSpec make_preset(const std::string& name, std::size_t instruments, std::size_t length,
                                 std::size_t segments, std::uint64_t seed, std::size_t burn_in) {
  const bool ngarch = name == "ngarch" || name == "ngarch_plus";
  const bool heston = name == "heston" || name == "heston_plus";
  if (!ngarch && !heston) throw ConfigError("unknown preset '" + name + "'");
  if (segments == 0) throw ConfigError("preset: segments must be > 0");
  const bool plus = name.ends_with("_plus");

  GeneratorSpec s;
  s.family = ngarch ? ModelFamily::NGarch : ModelFamily::Heston;
  s.instruments = instruments;
  s.burn_in = burn_in;
  s.seed = seed;
  const std::size_t blocks = instruments >= 4 ? 2 : 1;
  s.correlation = BlockCorrelationSpec::even(instruments, blocks, 0.6, 0.1);
  Engine rng = make_engine(seed, "preset-segments");
  auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  for (std::size_t k = 0; k < segments; ++k) {
    Segment seg;
    seg.length = length / segments + (k < length % segments ? 1 : 0);
    if (ngarch) {
      std::vector<NGarchParams> ps;
      for (std::size_t i = 0; i < instruments; ++i) {
        NGarchParams p;
        do {
          p.alpha = u(0.80, 0.90);
          p.beta = u(0.04, 0.10);
          p.gamma = u(0.0, 0.8);
        } while (p.persistence() >= 0.99);
        const double target = u(1e-4, 4e-4);
        p.omega = target * (1.0 - p.persistence());
        p.mu = u(-2e-4, 5e-4);
        p.sigma0 = std::sqrt(target);
        ps.push_back(p);
      }
      seg.params = std::move(ps);
    } else {
      std::vector<HestonParams> ps;
      for (std::size_t i = 0; i < instruments; ++i) {
        HestonParams p;
        p.kappa = u(1.0, 4.0);
        p.theta = u(0.02, 0.09);
        p.sigma_v = u(0.2, 0.6);
        p.rho = u(-0.8, -0.3);
        p.mu = u(0.0, 0.1);
        p.v0 = p.theta;
        ps.push_back(p);
      }
      seg.params = std::move(ps);
    }
    s.segments.push_back(std::move(seg));
  }
  if (plus) {
    RegimeConfig r;
    r.window = 20;
    r.percentile = 80.0;
    r.low = s.correlation;
    r.high = BlockCorrelationSpec::even(instruments, blocks, 0.85, 0.5);
    s.regimes = r;
    if (heston) s.jumps = JumpConfig{};
  }
  return s;
}

}  // namespace ftsbench::generators
