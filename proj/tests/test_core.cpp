#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ftsbench/core/adam.hpp"
#include "ftsbench/core/matrix.hpp"
#include "ftsbench/core/net.hpp"
#include "ftsbench/core/optimize.hpp"
#include "ftsbench/core/random.hpp"
#include "ftsbench/core/tape.hpp"

using namespace ftsbench;

namespace {

DenseLayer layer(Matrix w, Matrix b, bool act, bool residual = false) {
  DenseLayer l;
  l.weight = std::move(w);
  l.bias = std::move(b);
  l.activation = act;
  l.residual = residual;
  return l;
}

double loss_of(const FeedForwardNet& net, const Matrix& input) {
  const Matrix out = forward_batch(net, input);
  double s = 0.0;
  for (double v : out.data()) s += v * v;
  return s / static_cast<double>(out.size());
}

std::vector<double> tape_gradient(const FeedForwardNet& net, const Matrix& input) {
  Tape tape;
  const NetBinding b = bind(tape, net, true);
  const NodeId x = tape.leaf(input);
  const NodeId loss = tape.mean(tape.square(record_forward(tape, net, b, x)));
  tape.backward(loss);
  return gather_gradients(tape, net, b);
}

FeedForwardNet random_net(Engine& rng) {
  std::uniform_int_distribution<std::size_t> width(1, 16), depth(1, 4);
  std::normal_distribution<double> nd(0.0, 0.7);
  const std::size_t layers = depth(rng);
  std::vector<DenseLayer> ls;
  std::size_t in = width(rng);
  for (std::size_t k = 0; k < layers; ++k) {
    const bool residual = k > 0 && k + 1 < layers && (rng() & 1u);
    const std::size_t out = residual ? in : width(rng);
    Matrix w(in, out), b(1, out);
    for (double& v : w.data()) v = nd(rng);
    for (double& v : b.data()) v = nd(rng);
    DenseLayer l = layer(std::move(w), std::move(b), k + 1 < layers, residual);
    l.slope = 0.1 + 0.4 * uniform01(rng);
    ls.push_back(std::move(l));
    in = out;
  }
  return FeedForwardNet(std::move(ls));
}

}  // namespace

TEST(Forward, ZeroWeightsGiveZeroOutput) {
  FeedForwardNet net({layer(Matrix(3, 4), Matrix(1, 4), true), layer(Matrix(4, 2), Matrix(1, 2), false)});
  const auto y = forward(net, std::vector<double>{1.5, -2.0, 0.3});
  EXPECT_EQ(y, (std::vector<double>{0.0, 0.0}));
}

TEST(Forward, IdentityLayer) {
  FeedForwardNet net({layer(Matrix::identity(2), Matrix(1, 2), false)});
  EXPECT_EQ(forward(net, std::vector<double>{1.0, 2.0}), (std::vector<double>{1.0, 2.0}));
}

TEST(Forward, MatchesScalarReevaluation) {
  Engine rng(7);
  std::normal_distribution<double> nd;
  Matrix w1(3, 4), b1(1, 4), w2(4, 2), b2(1, 2);
  for (Matrix* m : {&w1, &b1, &w2, &b2})
    for (double& v : m->data()) v = nd(rng);
  FeedForwardNet net({layer(w1, b1, true), layer(w2, b2, false)});
  const std::vector<double> x{0.4, -1.2, 0.9};
  std::vector<double> hidden(4), expected(2);
  for (int j = 0; j < 4; ++j) {
    double z = b1(0, j);
    for (int i = 0; i < 3; ++i) z += x[i] * w1(i, j);
    hidden[j] = z > 0 ? z : 0.25 * z;
  }
  for (int j = 0; j < 2; ++j) {
    double z = b2(0, j);
    for (int i = 0; i < 4; ++i) z += hidden[i] * w2(i, j);
    expected[j] = z;
  }
  const auto y = forward(net, x);
  for (int j = 0; j < 2; ++j) EXPECT_NEAR(y[j], expected[j], 1e-14);
}

TEST(Forward, ResidualAddsInput) {
  FeedForwardNet net({layer(Matrix(2, 2), Matrix(1, 2, 1.0), true, true)});
  EXPECT_EQ(forward(net, std::vector<double>{3.0, -1.0}), (std::vector<double>{4.0, 0.0}));
}

TEST(Forward, DimensionMismatchThrows) {
  FeedForwardNet net({layer(Matrix::identity(2), Matrix(1, 2), false)});
  EXPECT_THROW(forward(net, std::vector<double>{1.0}), DimensionError);
  EXPECT_THROW(FeedForwardNet({layer(Matrix(2, 3), Matrix(1, 3), true, true)}), DimensionError);
  EXPECT_THROW(FeedForwardNet({layer(Matrix(2, 3), Matrix(1, 3), true), layer(Matrix(2, 1), Matrix(1, 1), false)}),
               DimensionError);
}

TEST(Forward, PureFunction) {
  Engine rng(3);
  const FeedForwardNet net = make_net({6, 8, 2, 3}, rng);
  Matrix x(5, 6);
  fill_normal(rng, x.data());
  const Matrix a = forward_batch(net, x);
  const Matrix b = forward_batch(net, x);
  EXPECT_TRUE(a == b);
}

TEST(Backward, IdentityDerivative) {
  Tape t;
  const NodeId p = t.leaf(Matrix(1, 1, 2.5), true);
  t.backward(p);
  EXPECT_EQ(t.grad(p)(0, 0), 1.0);
}

TEST(Backward, SumOfSquares) {
  Tape t;
  const NodeId p = t.leaf(Matrix{{1.0, -2.0, 0.5}}, true);
  t.backward(t.sum(t.square(p)));
  EXPECT_EQ(t.grad(p), (Matrix{{2.0, -4.0, 1.0}}));
}

TEST(Backward, NonScalarLossAndIncompleteTapeThrow) {
  Tape t;
  const NodeId p = t.leaf(Matrix{{1.0, 2.0}}, true);
  EXPECT_THROW(t.backward(p), DimensionError);
  EXPECT_THROW(t.backward(p + 10), Error);
}

TEST(Backward, RandomNetsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Engine rng(derive_seed(11, "fd", seed));
    FeedForwardNet net = random_net(rng);
    Matrix x(3, net.input_dim());
    fill_normal(rng, x.data());
    const auto g = tape_gradient(net, x);
    const auto p0 = net.parameters();
    double err = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < p0.size(); ++k) {
      auto p = p0;
      p[k] += 1e-5;
      net.set_parameters(p);
      const double up = loss_of(net, x);
      p[k] -= 2e-5;
      net.set_parameters(p);
      const double down = loss_of(net, x);
      const double fd = (up - down) / 2e-5;
      err = std::max(err, std::abs(fd - g[k]));
      scale = std::max({scale, std::abs(fd), std::abs(g[k])});
    }
    net.set_parameters(p0);
    EXPECT_LT(err / std::max(scale, 1e-12), 1e-5) << "seed " << seed;
  }
}

TEST(Backward, ElementwiseOpsMatchFiniteDifferences) {
  Engine rng(5);
  Matrix a0(3, 4), b0(3, 4);
  fill_normal(rng, a0.data());
  fill_normal(rng, b0.data());
  auto build = [&](Tape& t, NodeId a, NodeId b) {
    const NodeId e = t.exp(t.scale(a, 0.3));
    const NodeId l = t.log(t.add_scalar(t.square(b), 1.0));
    const NodeId s = t.softplus(t.sub(a, b));
    const NodeId m = t.mul(t.abs(a), e);
    const std::vector<NodeId> parts{t.slice_cols(m, 1, 2), t.slice_cols(l, 0, 3)};
    const NodeId c = t.concat_cols(parts);
    const NodeId sd = t.sqdist(c, t.select_rows(c, {2, 0}));
    return t.add(t.sum(sd), t.add(t.mean(s), t.sum(t.lower_corr(t.add(a, b), 2, 2))));
  };
  Tape t;
  const NodeId a = t.leaf(a0, true), b = t.leaf(b0, true);
  t.backward(build(t, a, b));
  auto value_at = [&](const Matrix& av, const Matrix& bv) {
    Tape u;
    const NodeId x = u.leaf(av), y = u.leaf(bv);
    return u.value(build(u, x, y))(0, 0);
  };
  for (std::size_t k = 0; k < a0.size(); ++k) {
    Matrix ap = a0, am = a0;
    ap.data()[k] += 1e-6;
    am.data()[k] -= 1e-6;
    EXPECT_NEAR(t.grad(a).data()[k], (value_at(ap, b0) - value_at(am, b0)) / 2e-6, 1e-6);
    Matrix bp = b0, bm = b0;
    bp.data()[k] += 1e-6;
    bm.data()[k] -= 1e-6;
    EXPECT_NEAR(t.grad(b).data()[k], (value_at(a0, bp) - value_at(a0, bm)) / 2e-6, 1e-6);
  }
}

TEST(Backward, LowerCorrFlagsDegenerateRows) {
  Tape t;
  Matrix p{{1.0, 2.0, 1.0, 3.0, 1.0, 5.0}, {1.0, 2.0, 2.0, 1.0, 3.0, 3.0}};
  const NodeId c = t.lower_corr(t.leaf(p), 2, 3);
  EXPECT_EQ(t.degenerate_rows(c), (std::vector<std::size_t>{0}));
  EXPECT_EQ(t.value(c)(0, 0), 0.0);
  EXPECT_NEAR(t.value(c)(1, 0), 0.5, 1e-12);
}

TEST(Adam, ZeroGradientIsFixedPoint) {
  AdamState s(3, {});
  std::vector<double> p{1.0, -2.0, 3.0};
  const auto p0 = p;
  for (int i = 0; i < 10; ++i) s.step(p, std::vector<double>(3, 0.0));
  EXPECT_EQ(p, p0);
}

TEST(Adam, FirstStepMagnitudeIsLearningRate) {
  AdamState s(2, {});
  std::vector<double> p{0.0, 0.0};
  s.step(p, std::vector<double>{0.7, -3.0});
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  EXPECT_NEAR(p[0], -1e-3 * 0.7 / (0.7 + 1e-8), 1e-15);
  EXPECT_NEAR(p[1], 1e-3 * 3.0 / (3.0 + 1e-8), 1e-15);
}

TEST(Adam, ConvergesOnQuadratic) {
  AdamState s(1, {0.05});
  std::vector<double> p{0.0};
  for (int i = 0; i < 2000; ++i) s.step(p, std::vector<double>{2.0 * (p[0] - 3.0)});
  EXPECT_NEAR(p[0], 3.0, 1e-3);
}

TEST(Adam, Errors) {
  AdamState s(2, {});
  std::vector<double> p{0.0, 0.0};
  EXPECT_THROW(s.step(p, std::vector<double>{1.0}), DimensionError);
  EXPECT_THROW(s.step(p, std::vector<double>{1.0, NAN}), NonFiniteError);
}

TEST(Cholesky, Examples) {
  EXPECT_TRUE(cholesky(Matrix::identity(3)) == Matrix::identity(3));
  EXPECT_TRUE(cholesky(Matrix{{4.0, 0.0}, {0.0, 9.0}}) == (Matrix{{2.0, 0.0}, {0.0, 3.0}}));
  Matrix m{{1.0, 0.5, 0.5}, {0.5, 1.0, 0.5}, {0.5, 0.5, 1.0}};
  const Matrix l = cholesky(m);
  EXPECT_LT(max_abs_diff(l * l.transposed(), m), 1e-12);
}

TEST(Cholesky, RejectsNonPdAndAsymmetric) {
  EXPECT_THROW(cholesky(Matrix{{1.0, 2.0}, {2.0, 1.0}}), NotPositiveDefinite);
  EXPECT_THROW(cholesky(Matrix{{1.0, 0.2}, {0.1, 1.0}}), InvalidParameters);
}

TEST(Cholesky, RoundTripRandomLower) {
  Engine rng(17);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 8;
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < i; ++j) l(i, j) = nd(rng);
      l(i, i) = 0.5 + std::abs(nd(rng));
    }
    EXPECT_LT(max_abs_diff(cholesky(l * l.transposed()), l), 1e-9);
  }
}

TEST(Cholesky, JitterFallback) {
  const Matrix singular{{1.0, 1.0}, {1.0, 1.0}};
  auto [l, jitter] = cholesky_with_jitter(singular);
  EXPECT_GT(jitter, 0.0);
  EXPECT_LT(max_abs_diff(l * l.transposed(), singular), 1e-6);
  EXPECT_THROW(cholesky_with_jitter(Matrix{{1.0, 3.0}, {3.0, 1.0}}), NotPositiveDefinite);
}

TEST(Bfgs, MinimizesRosenbrock) {
  auto f = [](std::span<const double> x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  BfgsOptions opt;
  opt.max_iterations = 500;
  const auto r = minimize_bfgs(f, {-1.2, 1.0}, opt);
  EXPECT_NEAR(r.x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.x[1], 1.0, 1e-4);
}

TEST(Random, DeriveSeedSeparatesStreams) {
  EXPECT_EQ(derive_seed(1, "a", 0), derive_seed(1, "a", 0));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "a", 1));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "b", 0));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(2, "a", 0));
}
