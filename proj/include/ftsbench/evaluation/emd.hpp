#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "ftsbench/core/error.hpp"

namespace ftsbench::evaluation {

/// Optimal-transport cost between two uniform empirical distributions on the line under the
/// squared distance. The monotone (quantile) coupling is optimal; it is evaluated exactly by
/// walking the merged breakpoints i/n and j/m, so unequal sizes need no grid.
inline double emd1d_squared(std::span<const double> p, std::span<const double> q) {
  if (p.empty() || q.empty()) throw DegenerateData("emd: empty sample");
  std::vector<double> a(p.begin(), p.end()), b(q.begin(), q.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::uint64_t n = a.size(), m = b.size();
  // Positions are measured in units of 1/(n m).
  std::uint64_t pos = 0;
  std::size_t i = 0, j = 0;
  double cost = 0.0;
  while (i < n && j < m) {
    const std::uint64_t end_a = (i + 1) * m, end_b = (j + 1) * n;
    const std::uint64_t next = std::min(end_a, end_b);
    const double d = a[i] - b[j];
    cost += static_cast<double>(next - pos) * d * d;
    pos = next;
    if (end_a == next) ++i;
    if (end_b == next) ++j;
  }
  return cost / (static_cast<double>(n) * static_cast<double>(m));
}

}  // namespace ftsbench::evaluation
