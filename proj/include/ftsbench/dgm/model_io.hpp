#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/hash.hpp"
#include "ftsbench/core/net.hpp"
#include "ftsbench/dgm/gmmn.hpp"
#include "ftsbench/dgm/rcgan.hpp"

namespace ftsbench::dgm {

inline constexpr std::array<char, 8> kNetMagic = {'F', 'T', 'S', 'B', 'N', 'E', 'T', '\0'};
inline constexpr std::uint32_t kNetFormatVersion = 1;
inline constexpr int kModelSchemaVersion = 1;

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + b])) << (8 * b);
    pos_ += 8;
    return v;
  }

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }

  double f64() { return std::bit_cast<double>(u64()); }

  std::string_view bytes(std::size_t n) {
    need(n);
    const auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const noexcept { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw IoError("network file truncated");
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Magic, u32 version, u64 layer count, then per layer: u64 in, u64 out, u8 activation,
/// u8 residual, f64 slope, in*out weights (row-major), out biases. Little-endian throughout.
inline std::string serialize_net(const FeedForwardNet& net) {
  std::string out(kNetMagic.begin(), kNetMagic.end());
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((kNetFormatVersion >> (8 * b)) & 0xff));
  detail::put_u64(out, net.layers().size());
  for (const auto& l : net.layers()) {
    detail::put_u64(out, l.in());
    detail::put_u64(out, l.out());
    out.push_back(static_cast<char>(l.activation));
    out.push_back(static_cast<char>(l.residual));
    detail::put_f64(out, l.slope);
    for (double v : l.weight.data()) detail::put_f64(out, v);
    for (double v : l.bias.data()) detail::put_f64(out, v);
  }
  return out;
}

inline FeedForwardNet deserialize_net(std::string_view data) {
  detail::Reader r(data);
  if (r.bytes(8) != std::string_view(kNetMagic.data(), kNetMagic.size())) throw IoError("network file: bad magic");
  std::uint32_t version = 0;
  for (int b = 0; b < 4; ++b) version |= static_cast<std::uint32_t>(r.u8()) << (8 * b);
  if (version != kNetFormatVersion) throw IoError("network file: unsupported version " + std::to_string(version));
  const std::uint64_t count = r.u64();
  if (count == 0 || count > 1024) throw IoError("network file: implausible layer count");
  std::vector<DenseLayer> layers;
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::uint64_t in = r.u64(), out = r.u64();
    if (in == 0 || out == 0 || in > (1u << 20) || out > (1u << 20)) throw IoError("network file: bad layer shape");
    DenseLayer l;
    l.activation = r.u8() != 0;
    l.residual = r.u8() != 0;
    l.slope = r.f64();
    l.weight = Matrix(in, out);
    for (double& v : l.weight.data()) v = r.f64();
    l.bias = Matrix(1, out);
    for (double& v : l.bias.data()) v = r.f64();
    layers.push_back(std::move(l));
  }
  if (!r.done()) throw IoError("network file: trailing bytes");
  try {
    return FeedForwardNet(std::move(layers));
  } catch (const Error& e) {
    throw IoError(std::string("network file: ") + e.what());
  }
}

inline nlohmann::json to_json_config(const TrainConfig& c) {
  return {{"batch", c.batch},
          {"steps", c.steps},
          {"learning_rate", c.learning_rate},
          {"discriminator_learning_rate", c.discriminator_learning_rate},
          {"discriminator_steps", c.discriminator_steps},
          {"check_interval", c.check_interval},
          {"patience", c.patience},
          {"horizon", c.horizon},
          {"hidden", c.hidden},
          {"residual_blocks", c.residual_blocks},
          {"noise_dim", c.noise_dim},
          {"condition", c.condition},
          {"mmd_multipliers", c.mmd_multipliers},
          {"validation_batch", c.validation_batch},
          {"validation_stride", c.validation_stride},
          {"validation_windows", c.validation_windows},
          {"seed", c.seed}};
}

/// Reads a TrainConfig, keeping defaults for absent keys.
inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c = {}) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("batch", c.batch);
  get("steps", c.steps);
  get("learning_rate", c.learning_rate);
  get("discriminator_learning_rate", c.discriminator_learning_rate);
  get("discriminator_steps", c.discriminator_steps);
  get("check_interval", c.check_interval);
  get("patience", c.patience);
  get("horizon", c.horizon);
  get("hidden", c.hidden);
  get("residual_blocks", c.residual_blocks);
  get("noise_dim", c.noise_dim);
  get("condition", c.condition);
  get("mmd_multipliers", c.mmd_multipliers);
  get("validation_batch", c.validation_batch);
  get("validation_stride", c.validation_stride);
  get("validation_windows", c.validation_windows);
  get("seed", c.seed);
  c.validate();
  return c;
}

inline nlohmann::json history_json(const TrainingHistory& h) {
  nlohmann::json checks = nlohmann::json::array();
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  for (const auto& c : h.checks)
    checks.push_back({{"step", c.step}, {"train_loss", num(c.train_loss)}, {"validation", num(c.validation)},
                      {"generated_std", num(c.generated_std)}});
  return {{"checks", checks},         {"best_check", h.best_check},       {"steps_run", h.steps_run},
          {"early_stopped", h.early_stopped}, {"initial_loss", num(h.initial_loss)}, {"best_loss", num(h.best_loss)}};
}

inline TrainingHistory history_from_json(const nlohmann::json& j) {
  auto num = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  TrainingHistory h;
  for (const auto& c : j.at("checks"))
    h.checks.push_back({c.at("step").get<std::size_t>(), num(c.at("train_loss")), num(c.at("validation")),
                        num(c.at("generated_std"))});
  h.best_check = j.at("best_check").get<std::size_t>();
  h.steps_run = j.at("steps_run").get<std::size_t>();
  h.early_stopped = j.at("early_stopped").get<bool>();
  h.initial_loss = num(j.at("initial_loss"));
  h.best_loss = num(j.at("best_loss"));
  return h;
}

namespace detail {

inline nlohmann::json generator_meta(const ArFnnModel& g) {
  return {{"instruments", g.instruments}, {"condition", g.condition}, {"noise_dim", g.noise_dim}, {"scale", g.scale}};
}

inline ArFnnModel generator_from(const nlohmann::json& meta, FeedForwardNet net) {
  ArFnnModel g;
  g.network = std::move(net);
  g.instruments = meta.at("instruments").get<std::size_t>();
  g.condition = meta.at("condition").get<std::size_t>();
  g.noise_dim = meta.at("noise_dim").get<std::size_t>();
  g.scale = meta.at("scale").get<double>();
  try {
    g.validate();
  } catch (const Error& e) {
    throw IoError(std::string("model sidecar does not match weights: ") + e.what());
  }
  return g;
}

inline std::string write_net(const std::string& path, const FeedForwardNet& net) {
  const std::string bytes = serialize_net(net);
  write_file(path, bytes);
  return sha256_hex(bytes);
}

inline FeedForwardNet read_net(const std::string& path, const std::string& expected_hash) {
  const std::string bytes = read_file(path);
  if (sha256_hex(bytes) != expected_hash) throw IoError("content hash mismatch for " + path);
  return deserialize_net(bytes);
}

inline nlohmann::json read_sidecar(const std::string& base, const char* kind) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file(base + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("model sidecar " + base + ".json: " + e.what());
  }
  if (meta.value("schema_version", 0) != kModelSchemaVersion) throw IoError("model sidecar: unsupported schema version");
  if (meta.value("kind", "") != kind) throw IoError(std::string("model sidecar: expected kind ") + kind);
  return meta;
}

}  // namespace detail

/// Writes base.generator.bin and the base.json sidecar.
inline void save_gmmn(const std::string& base, const GmmnModel& m) {
  nlohmann::json meta = {{"schema_version", kModelSchemaVersion},
                         {"kind", "gmmn"},
                         {"generator", detail::generator_meta(m.generator)},
                         {"generator_sha256", detail::write_net(base + ".generator.bin", m.generator.network)},
                         {"config", to_json_config(m.config)},
                         {"history", history_json(m.history)}};
  write_file(base + ".json", meta.dump(2) + "\n");
}

inline GmmnModel load_gmmn(const std::string& base) {
  const auto meta = detail::read_sidecar(base, "gmmn");
  GmmnModel m;
  m.generator = detail::generator_from(meta.at("generator"),
                                       detail::read_net(base + ".generator.bin", meta.at("generator_sha256")));
  m.config = train_config_from_json(meta.at("config"));
  m.history = history_from_json(meta.at("history"));
  return m;
}

/// Writes base.generator.bin, base.discriminator.bin and the base.json sidecar.
inline void save_rcgan(const std::string& base, const RcganModel& m) {
  nlohmann::json meta = {{"schema_version", kModelSchemaVersion},
                         {"kind", "rcgan"},
                         {"generator", detail::generator_meta(m.generator)},
                         {"generator_sha256", detail::write_net(base + ".generator.bin", m.generator.network)},
                         {"discriminator_sha256", detail::write_net(base + ".discriminator.bin", m.discriminator)},
                         {"config", to_json_config(m.config)},
                         {"history", history_json(m.history)}};
  write_file(base + ".json", meta.dump(2) + "\n");
}

inline RcganModel load_rcgan(const std::string& base) {
  const auto meta = detail::read_sidecar(base, "rcgan");
  RcganModel m;
  m.generator = detail::generator_from(meta.at("generator"),
                                       detail::read_net(base + ".generator.bin", meta.at("generator_sha256")));
  m.discriminator = detail::read_net(base + ".discriminator.bin", meta.at("discriminator_sha256"));
  m.config = train_config_from_json(meta.at("config"));
  m.history = history_from_json(meta.at("history"));
  return m;
}

}  // namespace ftsbench::dgm
