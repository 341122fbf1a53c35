#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace ftsbench {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Counter-based seed split: each (tag, index) pair owns an independent stream, so adding a new
/// consumer never shifts the draws of existing ones.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                 std::uint64_t index = 0) noexcept {
  return splitmix64(splitmix64(master ^ fnv1a(tag)) + splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Engine make_engine(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) {
  return Engine(derive_seed(master, tag, index));
}

inline void fill_normal(Engine& rng, std::span<double> out) {
  std::normal_distribution<double> nd(0.0, 1.0);
  for (double& v : out) v = nd(rng);
}

inline double uniform01(Engine& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace ftsbench
