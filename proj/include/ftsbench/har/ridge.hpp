#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/matrix.hpp"

namespace ftsbench::har {

struct HarModel {
  double intercept = 0.0;
  std::vector<double> coefficients;  // rv_d, rv_w, rv_m, then optional extras
  double lambda = 0.0;
  double half_life = 63.0;

  double predict(std::span<const double> x) const {
    if (x.size() != coefficients.size()) throw DimensionError("har predict: feature count mismatch");
    double y = intercept;
    for (std::size_t k = 0; k < x.size(); ++k) y += coefficients[k] * x[k];
    return y;
  }
};

/// w = 2^(-age / half_life) for rows ordered oldest first. Consecutive groups of
/// `rows_per_period` rows share one period; the newest period has age 0.
inline std::vector<double> exponential_weights(std::size_t count, double half_life, std::size_t rows_per_period = 1) {
  if (!(half_life > 0.0)) throw InvalidParameters("har: half-life must be positive");
  if (rows_per_period == 0 || count % rows_per_period != 0)
    throw DimensionError("har: row count is not a whole number of periods");
  const std::size_t periods = count / rows_per_period;
  std::vector<double> w(count);
  for (std::size_t t = 0; t < count; ++t)
    w[t] = std::exp2(-static_cast<double>(periods - 1 - t / rows_per_period) / half_life);
  return w;
}

/// Running weighted sums for an intercept-plus-slopes least-squares problem. `decay` multiplies
/// every stored weight, so ageing all rows by one period is a single call.
class NormalEquations {
 public:
  explicit NormalEquations(std::size_t features) : p_(features), sxx_(features, features), sx_(features), sxy_(features) {}

  std::size_t features() const noexcept { return p_; }
  double weight() const noexcept { return sw_; }

  void add(std::span<const double> x, double y, double w) {
    if (x.size() != p_) throw DimensionError("har ridge: feature count mismatch");
    if (!(w >= 0.0) || !std::isfinite(y)) throw InvalidParameters("har ridge: invalid row");
    sw_ += w;
    sy_ += w * y;
    for (std::size_t i = 0; i < p_; ++i) {
      sx_[i] += w * x[i];
      sxy_[i] += w * x[i] * y;
      for (std::size_t j = 0; j <= i; ++j) sxx_(i, j) += w * x[i] * x[j];
    }
  }

  void decay(double factor) {
    sw_ *= factor;
    sy_ *= factor;
    for (double& v : sx_) v *= factor;
    for (double& v : sxy_) v *= factor;
    for (double& v : sxx_.data()) v *= factor;
  }

  /// Minimizer of sum w (y - a - x'b)^2 + lambda |b|^2 with the intercept a unpenalized:
  /// b solves (Xc' W Xc + lambda I) b = Xc' W yc on weighted-centered data.
  HarModel solve(double lambda) const {
    if (!(lambda >= 0.0)) throw InvalidParameters("har ridge: lambda must be >= 0");
    if (!(sw_ > 0.0)) throw DegenerateData("har ridge: no weighted rows");
    HarModel m;
    m.lambda = lambda;
    m.coefficients.assign(p_, 0.0);
    const double ybar = sy_ / sw_;
    if (p_ == 0) {
      m.intercept = ybar;
      return m;
    }
    Matrix a(p_, p_);
    std::vector<double> b(p_);
    double scale = 0.0;
    for (std::size_t i = 0; i < p_; ++i) {
      b[i] = sxy_[i] - sx_[i] * ybar;
      for (std::size_t j = 0; j <= i; ++j) {
        a(i, j) = a(j, i) = sxx_(i, j) - sx_[i] * sx_[j] / sw_;
      }
      scale = std::max(scale, std::abs(sxx_(i, i)));
      a(i, i) += lambda;
    }
    Matrix l;
    try {
      l = cholesky(a);
    } catch (const NotPositiveDefinite&) {
      throw InvalidParameters(singular_message(lambda));
    }
    for (std::size_t i = 0; i < p_; ++i)
      if (l(i, i) * l(i, i) <= 1e-12 * std::max(scale, lambda)) throw InvalidParameters(singular_message(lambda));
    m.coefficients = cholesky_solve(l, b);
    m.intercept = ybar;
    for (std::size_t i = 0; i < p_; ++i) m.intercept -= m.coefficients[i] * sx_[i] / sw_;
    return m;
  }

 private:
  static std::string singular_message(double lambda) {
    return lambda == 0.0 ? "har ridge: singular normal equations; use lambda > 0"
                         : "har ridge: singular normal equations";
  }

  std::size_t p_;
  Matrix sxx_;  // lower triangle used
  std::vector<double> sx_, sxy_;
  double sw_ = 0.0, sy_ = 0.0;
};

/// Exponentially weighted ridge on rows x (oldest first) and targets y.
inline HarModel fit_har_ridge(const Matrix& x, std::span<const double> y, double lambda, double half_life,
                              std::size_t rows_per_period = 1) {
  if (x.rows() != y.size()) throw DimensionError("har ridge: row count differs from target count");
  if (x.rows() < 2) throw DegenerateData("har ridge: need at least 2 rows");
  const auto w = exponential_weights(x.rows(), half_life, rows_per_period);
  NormalEquations ne(x.cols());
  for (std::size_t t = 0; t < x.rows(); ++t) ne.add(x.row(t), y[t], w[t]);
  HarModel m = ne.solve(lambda);
  m.half_life = half_life;
  return m;
}

inline const std::vector<double>& default_lambda_grid() {
  static const std::vector<double> grid{1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1};
  return grid;
}

/// Lambda with the lowest mean squared error on the validation rows; ties keep the smaller.
inline double select_lambda(const Matrix& x_train, std::span<const double> y_train, const Matrix& x_val,
                            std::span<const double> y_val, double half_life,
                            const std::vector<double>& grid = default_lambda_grid(),
                            std::size_t rows_per_period = 1) {
  if (grid.empty()) throw InvalidParameters("har ridge: empty lambda grid");
  if (x_val.rows() != y_val.size() || x_val.rows() == 0) throw DimensionError("har ridge: bad validation rows");
  double best = grid.front(), best_mse = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    HarModel m;
    try {
      m = fit_har_ridge(x_train, y_train, lambda, half_life, rows_per_period);
    } catch (const InvalidParameters&) {
      continue;
    }
    double mse = 0.0;
    for (std::size_t t = 0; t < x_val.rows(); ++t) {
      const double e = y_val[t] - m.predict(x_val.row(t));
      mse += e * e;
    }
    mse /= static_cast<double>(x_val.rows());
    if (mse < best_mse) {
      best_mse = mse;
      best = lambda;
    }
  }
  if (!std::isfinite(best_mse)) throw InvalidParameters("har ridge: no lambda in the grid gives a solvable system");
  return best;
}

}  // namespace ftsbench::har
