#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/matrix.hpp"
#include "ftsbench/generators/dataset.hpp"

namespace ftsbench::evaluation {

/// Conditional sampler: N x condition-length window in, `batch` N x horizon paths out.
using Sampler = std::function<std::vector<Matrix>(const Matrix& condition, std::size_t batch, std::uint64_t seed)>;

/// Replays the true continuation of each condition window of `returns` (T x N). Conditions are
/// looked up by content, so the first occurrence wins for repeated windows.
inline Sampler replay_sampler(const Matrix& returns, std::size_t condition = generators::kConditionLength,
                              std::size_t horizon = generators::kTargetLength) {
  auto index = std::make_shared<std::unordered_map<std::string, std::size_t>>();
  auto data = std::make_shared<Matrix>(returns);
  auto key = [](const Matrix& m) {
    std::string k(m.size() * sizeof(double), '\0');
    std::memcpy(k.data(), m.data().data(), k.size());
    return k;
  };
  const std::size_t count = generators::window_count(returns.rows(), condition, horizon);
  for (std::size_t s = 0; s < count; ++s) index->emplace(key(generators::window_of(returns, s, condition)), s);
  return [index, data, key, condition, horizon](const Matrix& cond, std::size_t batch, std::uint64_t) {
    const auto it = index->find(key(cond));
    if (it == index->end()) throw InvalidParameters("replay sampler: unknown condition window");
    const Matrix future = generators::window_of(*data, it->second + condition, horizon);
    return std::vector<Matrix>(batch, future);
  };
}

/// Emits zeros regardless of the condition.
inline Sampler zero_sampler(std::size_t horizon = generators::kTargetLength) {
  return [horizon](const Matrix& cond, std::size_t batch, std::uint64_t) {
    return std::vector<Matrix>(batch, Matrix(cond.rows(), horizon));
  };
}

}  // namespace ftsbench::evaluation
