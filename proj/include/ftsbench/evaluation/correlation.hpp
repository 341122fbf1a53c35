#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/matrix.hpp"
#include "ftsbench/core/stats.hpp"

namespace ftsbench::evaluation {

/// Pearson correlation matrix of the rows of an N x T window.
inline Matrix correlation_matrix(const Matrix& window) {
  const std::size_t n = window.rows(), t = window.cols();
  if (t < 3) throw DegenerateData("correlation: need at least 3 steps, got " + std::to_string(t));
  Matrix centered(n, t);
  std::vector<double> ss(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = window.row(i);
    double mean = 0.0, raw = 0.0;
    for (double v : row) {
      mean += v;
      raw += v * v;
    }
    mean /= static_cast<double>(t);
    for (std::size_t k = 0; k < t; ++k) {
      centered(i, k) = row[k] - mean;
      ss[i] += centered(i, k) * centered(i, k);
    }
    if (negligible_variance(ss[i], raw))
      throw DegenerateData("correlation: instrument " + std::to_string(i) + " has zero variance");
  }
  Matrix c(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    c(i, i) = 1.0;
    const auto ci = centered.row(i);
    for (std::size_t j = 0; j < i; ++j) {
      const auto cj = centered.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < t; ++k) s += ci[k] * cj[k];
      c(i, j) = c(j, i) = std::clamp(s / std::sqrt(ss[i] * ss[j]), -1.0, 1.0);
    }
  }
  return c;
}

/// Lower triangle of a square matrix ordered (1,0), (2,0), (2,1), ...
inline std::vector<double> lower_triangle(const Matrix& c) {
  std::vector<double> out;
  out.reserve(c.rows() * (c.rows() - 1) / 2);
  for (std::size_t i = 1; i < c.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j) out.push_back(c(i, j));
  return out;
}

/// N(N-1)/2 pairwise correlations of an N x T window.
inline std::vector<double> correlation_values(const Matrix& window) {
  return lower_triangle(correlation_matrix(window));
}

}  // namespace ftsbench::evaluation
