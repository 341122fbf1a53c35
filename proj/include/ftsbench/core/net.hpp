#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/matrix.hpp"
#include "ftsbench/core/random.hpp"
#include "ftsbench/core/tape.hpp"

namespace ftsbench {

/// One affine map x*W + b (W is in x out), optionally followed by PReLU. A residual layer
/// returns x + layer(x) and needs in == out.
struct DenseLayer {
  Matrix weight;
  Matrix bias;  // 1 x out
  bool activation = true;
  double slope = 0.25;
  bool residual = false;

  std::size_t in() const noexcept { return weight.rows(); }
  std::size_t out() const noexcept { return weight.cols(); }
};

struct NetShape {
  std::size_t input = 0;
  std::size_t hidden = 32;
  std::size_t residual_blocks = 2;
  std::size_t output = 1;
};

class FeedForwardNet {
 public:
  FeedForwardNet() = default;
  explicit FeedForwardNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { validate(); }

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }

  std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().in(); }
  std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().out(); }

  void validate() const {
    if (layers_.empty()) throw DimensionError("network has no layers");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const DenseLayer& l = layers_[i];
      if (l.bias.rows() != 1 || l.bias.cols() != l.out())
        throw DimensionError("layer " + std::to_string(i) + ": bias shape mismatch");
      if (i > 0 && layers_[i - 1].out() != l.in())
        throw DimensionError("layer " + std::to_string(i) + ": input width " + std::to_string(l.in()) +
                             " != previous output " + std::to_string(layers_[i - 1].out()));
      if (l.residual && l.in() != l.out())
        throw DimensionError("layer " + std::to_string(i) + ": residual block needs equal widths");
      if (!std::isfinite(l.slope)) throw NonFiniteError("layer " + std::to_string(i) + ": slope");
    }
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size() + (l.activation ? 1 : 0);
    return n;
  }

  /// Parameters flattened as (weights, bias, slope) per layer.
  std::vector<double> parameters() const {
    std::vector<double> p;
    p.reserve(parameter_count());
    for (const auto& l : layers_) {
      p.insert(p.end(), l.weight.data().begin(), l.weight.data().end());
      p.insert(p.end(), l.bias.data().begin(), l.bias.data().end());
      if (l.activation) p.push_back(l.slope);
    }
    return p;
  }

  void set_parameters(std::span<const double> p) {
    if (p.size() != parameter_count()) throw DimensionError("set_parameters: length mismatch");
    std::size_t k = 0;
    for (auto& l : layers_) {
      for (double& v : l.weight.data()) v = p[k++];
      for (double& v : l.bias.data()) v = p[k++];
      if (l.activation) l.slope = p[k++];
    }
  }

 private:
  std::vector<DenseLayer> layers_;
};

/// Glorot-uniform weights, zero biases, PReLU slope 0.25. Layout: input -> hidden, then
/// `residual_blocks` residual hidden layers, then a linear output layer.
inline FeedForwardNet make_net(const NetShape& shape, Engine& rng) {
  auto dense = [&](std::size_t in, std::size_t out, bool act, bool residual) {
    DenseLayer l;
    l.weight = Matrix(in, out);
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& v : l.weight.data()) v = u(rng);
    l.bias = Matrix(1, out);
    l.activation = act;
    l.residual = residual;
    return l;
  };
  std::vector<DenseLayer> layers;
  layers.push_back(dense(shape.input, shape.hidden, true, false));
  for (std::size_t b = 0; b < shape.residual_blocks; ++b)
    layers.push_back(dense(shape.hidden, shape.hidden, true, true));
  layers.push_back(dense(shape.hidden, shape.output, false, false));
  return FeedForwardNet(std::move(layers));
}

/// Batched forward pass; each row of `inputs` is one example.
inline Matrix forward_batch(const FeedForwardNet& net, const Matrix& inputs) {
  if (inputs.cols() != net.input_dim()) {
    throw DimensionError("forward: input width " + std::to_string(inputs.cols()) + " != " +
                         std::to_string(net.input_dim()));
  }
  Matrix x = inputs;
  for (const auto& l : net.layers()) {
    Matrix y(x.rows(), l.out());
    matmul_accumulate(x, l.weight, y);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto row = y.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        double v = row[c] + l.bias(0, c);
        if (l.activation && v <= 0.0) v *= l.slope;
        row[c] = v;
      }
    }
    if (l.residual) {
      for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] += x.data()[i];
    }
    x = std::move(y);
  }
  return x;
}

inline std::vector<double> forward(const FeedForwardNet& net, std::span<const double> input) {
  Matrix in(1, input.size(), std::vector<double>(input.begin(), input.end()));
  return forward_batch(net, in).storage();
}

/// Tape handles for every parameter of a network.
struct NetBinding {
  std::vector<NodeId> weights;
  std::vector<NodeId> biases;
  std::vector<NodeId> slopes;
};

inline NetBinding bind(Tape& tape, const FeedForwardNet& net, bool trainable) {
  NetBinding b;
  for (const auto& l : net.layers()) {
    b.weights.push_back(tape.leaf(l.weight, trainable));
    b.biases.push_back(tape.leaf(l.bias, trainable));
    b.slopes.push_back(tape.leaf(Matrix(1, 1, l.slope), trainable && l.activation));
  }
  return b;
}

inline NodeId record_forward(Tape& tape, const FeedForwardNet& net, const NetBinding& b,
                             NodeId input) {
  NodeId x = input;
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const auto& l = net.layers()[i];
    NodeId y = tape.add_row(tape.matmul(x, b.weights[i]), b.biases[i]);
    if (l.activation) y = tape.prelu(y, b.slopes[i]);
    if (l.residual) y = tape.add(x, y);
    x = y;
  }
  return x;
}

/// Gradients gathered in the same order as FeedForwardNet::parameters().
inline std::vector<double> gather_gradients(const Tape& tape, const FeedForwardNet& net,
                                            const NetBinding& b) {
  std::vector<double> g;
  g.reserve(net.parameter_count());
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const auto& l = net.layers()[i];
    auto append = [&](NodeId id, std::size_t n) {
      const Matrix& gm = tape.grad(id);
      if (gm.size() == n) {
        g.insert(g.end(), gm.data().begin(), gm.data().end());
      } else {
        g.insert(g.end(), n, 0.0);
      }
    };
    append(b.weights[i], l.weight.size());
    append(b.biases[i], l.bias.size());
    if (l.activation) append(b.slopes[i], 1);
  }
  return g;
}

}  // namespace ftsbench
