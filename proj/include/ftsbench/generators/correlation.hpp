#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/matrix.hpp"

namespace ftsbench::generators {

/// Block-structured correlation: `within[b]` inside block b, `across` between blocks.
struct BlockCorrelationSpec {
  std::vector<std::size_t> block_sizes;
  std::vector<double> within;
  double across = 0.0;

  std::size_t size() const {
    return std::accumulate(block_sizes.begin(), block_sizes.end(), std::size_t{0});
  }

  Matrix matrix() const {
    if (block_sizes.size() != within.size())
      throw InvalidParameters("block correlation: one within-block value per block required");
    const std::size_t n = size();
    std::vector<std::size_t> block_of;
    for (std::size_t b = 0; b < block_sizes.size(); ++b) block_of.insert(block_of.end(), block_sizes[b], b);
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        m(i, j) = i == j ? 1.0 : (block_of[i] == block_of[j] ? within[block_of[i]] : across);
    return m;
  }

  /// Throws NotPositiveDefinite if the implied matrix is not a valid correlation matrix.
  void validate() const {
    for (double w : within)
      if (w < -1.0 || w > 1.0) throw InvalidParameters("block correlation: |rho| > 1");
    if (across < -1.0 || across > 1.0) throw InvalidParameters("block correlation: |rho| > 1");
    (void)cholesky(matrix());
  }

  static BlockCorrelationSpec identity(std::size_t n) {
    return {std::vector<std::size_t>(n, 1), std::vector<double>(n, 0.0), 0.0};
  }

  /// `blocks` near-equal blocks over n instruments.
  static BlockCorrelationSpec even(std::size_t n, std::size_t blocks, double within, double across) {
    BlockCorrelationSpec s;
    for (std::size_t b = 0; b < blocks; ++b) {
      s.block_sizes.push_back(n / blocks + (b < n % blocks ? 1 : 0));
      s.within.push_back(within);
    }
    s.across = across;
    return s;
  }
};

/// Colors an i.i.d. T x N shock panel so rows carry the given correlation. Singular PSD matrices
/// (e.g. perfect correlation) are accepted; indefinite ones raise NotPositiveDefinite.
inline Matrix apply_correlation(const Matrix& correlation, const Matrix& shocks) {
  if (correlation.rows() != shocks.cols())
    throw DimensionError("apply_correlation: matrix size " + std::to_string(correlation.rows()) +
                         " != instruments " + std::to_string(shocks.cols()));
  const Matrix l = cholesky_semidefinite(correlation);
  Matrix out(shocks.rows(), shocks.cols());
  for (std::size_t t = 0; t < shocks.rows(); ++t) {
    const auto z = shocks.row(t);
    auto o = out.row(t);
    for (std::size_t i = 0; i < l.rows(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k <= i; ++k) s += l(i, k) * z[k];
      o[i] = s;
    }
  }
  return out;
}

inline Matrix apply_correlation(const BlockCorrelationSpec& spec, const Matrix& shocks) {
  spec.validate();
  return apply_correlation(spec.matrix(), shocks);
}

/// z_out = L z for a precomputed lower-triangular factor.
inline void color_in_place(const Matrix& l, std::vector<double>& z) {
  for (std::size_t i = l.rows(); i-- > 0;) {
    double s = 0.0;
    for (std::size_t k = 0; k <= i; ++k) s += l(i, k) * z[k];
    z[i] = s;
  }
}

}  // namespace ftsbench::generators
