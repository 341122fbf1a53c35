#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ftsbench/core/error.hpp"
#include "ftsbench/core/matrix.hpp"
#include "ftsbench/core/stats.hpp"

namespace ftsbench {

using NodeId = std::size_t;

/// Reverse-mode tape over matrix-valued nodes. Rows are batch entries. Nodes are appended in
/// evaluation order, so node ids are already a topological order.
class Tape {
 public:
  NodeId leaf(Matrix value, bool requires_grad = false) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return push(std::move(n));
  }

  NodeId matmul(NodeId a, NodeId b) {
    const Matrix& va = value(a);
    const Matrix& vb = value(b);
    if (va.cols() != vb.rows()) throw DimensionError("tape matmul: inner dimensions differ");
    Matrix out(va.rows(), vb.cols());
    matmul_accumulate(va, vb, out);
    return push_op(Op::MatMul, std::move(out), {a, b});
  }

  /// a (B x m) plus a broadcast row (1 x m).
  NodeId add_row(NodeId a, NodeId row) {
    const Matrix& va = value(a);
    const Matrix& vr = value(row);
    if (vr.rows() != 1 || vr.cols() != va.cols()) throw DimensionError("tape add_row: bad row");
    Matrix out = va;
    for (std::size_t r = 0; r < out.rows(); ++r)
      for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += vr(0, c);
    return push_op(Op::AddRow, std::move(out), {a, row});
  }

  NodeId add(NodeId a, NodeId b) { return push_op(Op::Add, value(a) + value(b), {a, b}); }
  NodeId sub(NodeId a, NodeId b) { return push_op(Op::Sub, value(a) - value(b), {a, b}); }

  NodeId mul(NodeId a, NodeId b) {
    Matrix out = value(a);
    require_same_shape(out, value(b), "tape mul");
    const auto vb = value(b).data();
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= vb[i];
    return push_op(Op::Mul, std::move(out), {a, b});
  }

  NodeId scale(NodeId a, double c) {
    NodeId id = push_op(Op::Scale, c * value(a), {a});
    nodes_[id].scalar = c;
    return id;
  }

  NodeId add_scalar(NodeId a, double c) {
    Matrix out = value(a);
    for (double& v : out.data()) v += c;
    return push_op(Op::AddScalar, std::move(out), {a});
  }

  /// Parametric ReLU with a trainable 1x1 slope node.
  NodeId prelu(NodeId x, NodeId slope) {
    const Matrix& vs = value(slope);
    if (vs.rows() != 1 || vs.cols() != 1) throw DimensionError("tape prelu: slope must be 1x1");
    const double a = vs(0, 0);
    Matrix out = value(x);
    for (double& v : out.data())
      if (v <= 0.0) v *= a;
    return push_op(Op::PRelu, std::move(out), {x, slope});
  }

  NodeId abs(NodeId a) { return unary(Op::Abs, a, [](double v) { return std::abs(v); }); }
  NodeId square(NodeId a) { return unary(Op::Square, a, [](double v) { return v * v; }); }
  NodeId exp(NodeId a) { return unary(Op::Exp, a, [](double v) { return std::exp(v); }); }
  NodeId log(NodeId a) { return unary(Op::Log, a, [](double v) { return std::log(v); }); }
  NodeId softplus(NodeId a) { return unary(Op::Softplus, a, softplus_value); }

  NodeId slice_cols(NodeId a, std::size_t start, std::size_t count) {
    const Matrix& va = value(a);
    if (start + count > va.cols()) throw DimensionError("tape slice_cols: out of range");
    Matrix out(va.rows(), count);
    for (std::size_t r = 0; r < va.rows(); ++r)
      for (std::size_t c = 0; c < count; ++c) out(r, c) = va(r, start + c);
    NodeId id = push_op(Op::SliceCols, std::move(out), {a});
    nodes_[id].i0 = start;
    return id;
  }

  NodeId concat_cols(std::span<const NodeId> parts) {
    if (parts.empty()) throw DimensionError("tape concat_cols: no inputs");
    const std::size_t rows = value(parts[0]).rows();
    std::size_t cols = 0;
    for (NodeId p : parts) {
      if (value(p).rows() != rows) throw DimensionError("tape concat_cols: row mismatch");
      cols += value(p).cols();
    }
    Matrix out(rows, cols);
    std::size_t off = 0;
    for (NodeId p : parts) {
      const Matrix& vp = value(p);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < vp.cols(); ++c) out(r, off + c) = vp(r, c);
      off += vp.cols();
    }
    return push_op(Op::ConcatCols, std::move(out), std::vector<NodeId>(parts.begin(), parts.end()));
  }

  NodeId sum(NodeId a) {
    double s = 0.0;
    for (double v : value(a).data()) s += v;
    return push_op(Op::SumAll, Matrix(1, 1, s), {a});
  }

  NodeId mean(NodeId a) {
    const Matrix& va = value(a);
    if (va.empty()) throw DimensionError("tape mean: empty node");
    double s = 0.0;
    for (double v : va.data()) s += v;
    return push_op(Op::MeanAll, Matrix(1, 1, s / static_cast<double>(va.size())), {a});
  }

  /// Pairwise squared Euclidean distances between the rows of a (n x d) and b (m x d).
  NodeId sqdist(NodeId a, NodeId b) {
    const Matrix& va = value(a);
    const Matrix& vb = value(b);
    if (va.cols() != vb.cols()) throw DimensionError("tape sqdist: dimension mismatch");
    Matrix out(va.rows(), vb.rows());
    for (std::size_t i = 0; i < va.rows(); ++i) {
      const auto ai = va.row(i);
      for (std::size_t j = 0; j < vb.rows(); ++j) {
        const auto bj = vb.row(j);
        double s = 0.0;
        for (std::size_t k = 0; k < ai.size(); ++k) {
          const double d = ai[k] - bj[k];
          s += d * d;
        }
        out(i, j) = s;
      }
    }
    return push_op(Op::SqDist, std::move(out), {a, b});
  }

  /// Lower-triangle Pearson correlations of each row of `paths`, where a row holds `steps`
  /// consecutive vectors of `n` instruments (time-major). Output is B x n(n-1)/2 ordered
  /// (1,0), (2,0), (2,1), ... Rows with a constant instrument get zeros and are listed by
  /// degenerate_rows().
  NodeId lower_corr(NodeId paths, std::size_t n, std::size_t steps) {
    const Matrix& vp = value(paths);
    if (vp.cols() != n * steps || n < 2 || steps < 2) throw DimensionError("tape lower_corr: bad layout");
    const std::size_t pairs = n * (n - 1) / 2;
    Matrix out(vp.rows(), pairs);
    std::vector<std::size_t> degenerate;
    for (std::size_t b = 0; b < vp.rows(); ++b) {
      const Moments2 m = second_moments(vp.row(b), n, steps);
      if (m.degenerate) {
        degenerate.push_back(b);
        continue;
      }
      std::size_t p = 0;
      for (std::size_t i = 1; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j, ++p)
          out(b, p) = m.cross[i * n + j] / std::sqrt(m.cross[i * n + i] * m.cross[j * n + j]);
    }
    NodeId id = push_op(Op::LowerCorr, std::move(out), {paths});
    nodes_[id].i0 = n;
    nodes_[id].i1 = steps;
    nodes_[id].indices = std::move(degenerate);
    return id;
  }

  NodeId select_rows(NodeId a, std::vector<std::size_t> rows) {
    const Matrix& va = value(a);
    Matrix out(rows.size(), va.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r] >= va.rows()) throw DimensionError("tape select_rows: index out of range");
      for (std::size_t c = 0; c < va.cols(); ++c) out(r, c) = va(rows[r], c);
    }
    NodeId id = push_op(Op::SelectRows, std::move(out), {a});
    nodes_[id].indices = std::move(rows);
    return id;
  }

  const Matrix& value(NodeId id) const { return node(id).value; }
  const Matrix& grad(NodeId id) const { return node(id).grad; }
  bool requires_grad(NodeId id) const { return node(id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Rows flagged as degenerate by a lower_corr node.
  const std::vector<std::size_t>& degenerate_rows(NodeId id) const {
    if (node(id).op != Op::LowerCorr) throw Error("degenerate_rows: not a lower_corr node");
    return node(id).indices;
  }

  /// Accumulates d(loss)/d(node) into grad() for every node that requires a gradient.
  void backward(NodeId loss) {
    if (loss >= nodes_.size()) throw Error("backward: loss node not on tape (incomplete tape)");
    if (value(loss).rows() != 1 || value(loss).cols() != 1) {
      throw DimensionError("backward: loss node is not scalar");
    }
    for (Node& n : nodes_) {
      if (n.requires_grad) {
        n.grad = Matrix(n.value.rows(), n.value.cols());
      } else {
        n.grad = Matrix();
      }
    }
    if (!nodes_[loss].requires_grad) return;
    nodes_[loss].grad(0, 0) = 1.0;
    for (std::size_t k = loss + 1; k-- > 0;) {
      if (nodes_[k].requires_grad && nodes_[k].op != Op::Leaf) propagate(k);
    }
  }

 private:
  enum class Op {
    Leaf, MatMul, AddRow, Add, Sub, Mul, Scale, AddScalar, PRelu, Abs, Square, Exp, Log,
    Softplus, SliceCols, ConcatCols, SumAll, MeanAll, SqDist, LowerCorr, SelectRows
  };

  struct Node {
    Op op = Op::Leaf;
    Matrix value;
    Matrix grad;
    std::vector<NodeId> parents;
    bool requires_grad = false;
    double scalar = 0.0;
    std::size_t i0 = 0;
    std::size_t i1 = 0;
    std::vector<std::size_t> indices;
  };

  struct Moments2 {
    std::vector<double> centered;  // steps x n
    std::vector<double> cross;     // n x n centered cross products
    bool degenerate = false;
  };

  static double softplus_value(double v) {
    return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  }

  static Moments2 second_moments(std::span<const double> row, std::size_t n, std::size_t steps) {
    Moments2 m;
    std::vector<double> mean(n, 0.0), raw(n, 0.0);
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t i = 0; i < n; ++i) {
        mean[i] += row[t * n + i];
        raw[i] += row[t * n + i] * row[t * n + i];
      }
    for (double& v : mean) v /= static_cast<double>(steps);
    m.centered.resize(steps * n);
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t i = 0; i < n; ++i) m.centered[t * n + i] = row[t * n + i] - mean[i];
    m.cross.assign(n * n, 0.0);
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j)
          m.cross[i * n + j] += m.centered[t * n + i] * m.centered[t * n + j];
    for (std::size_t i = 0; i < n; ++i)
      if (negligible_variance(m.cross[i * n + i], raw[i])) m.degenerate = true;
    return m;
  }

  const Node& node(NodeId id) const {
    if (id >= nodes_.size()) throw Error("tape: unknown node " + std::to_string(id));
    return nodes_[id];
  }

  NodeId push(Node n) {
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  NodeId push_op(Op op, Matrix out, std::vector<NodeId> parents) {
    Node n;
    n.op = op;
    n.value = std::move(out);
    for (NodeId p : parents) n.requires_grad = n.requires_grad || node(p).requires_grad;
    n.parents = std::move(parents);
    return push(std::move(n));
  }

  template <class F>
  NodeId unary(Op op, NodeId a, F f) {
    Matrix out = value(a);
    for (double& v : out.data()) v = f(v);
    return push_op(op, std::move(out), {a});
  }

  void propagate(std::size_t k) {
    Node& n = nodes_[k];
    const Matrix& g = n.grad;
    auto wants = [&](std::size_t i) { return nodes_[n.parents[i]].requires_grad; };
    auto pgrad = [&](std::size_t i) -> Matrix& { return nodes_[n.parents[i]].grad; };
    auto pval = [&](std::size_t i) -> const Matrix& { return nodes_[n.parents[i]].value; };

    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::MatMul: {
        const Matrix& a = pval(0);
        const Matrix& b = pval(1);
        if (wants(0)) {
          Matrix& ga = pgrad(0);
          for (std::size_t i = 0; i < a.rows(); ++i) {
            const auto gi = g.row(i);
            for (std::size_t p = 0; p < a.cols(); ++p) {
              const auto bp = b.row(p);
              double s = 0.0;
              for (std::size_t j = 0; j < gi.size(); ++j) s += gi[j] * bp[j];
              ga(i, p) += s;
            }
          }
        }
        if (wants(1)) {
          Matrix& gb = pgrad(1);
          for (std::size_t i = 0; i < a.rows(); ++i) {
            const auto gi = g.row(i);
            for (std::size_t p = 0; p < a.cols(); ++p) {
              const double av = a(i, p);
              if (av == 0.0) continue;
              auto gbp = gb.row(p);
              for (std::size_t j = 0; j < gi.size(); ++j) gbp[j] += av * gi[j];
            }
          }
        }
        break;
      }
      case Op::AddRow: {
        if (wants(0)) accumulate(pgrad(0), g, 1.0);
        if (wants(1)) {
          Matrix& gr = pgrad(1);
          for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) gr(0, c) += g(r, c);
        }
        break;
      }
      case Op::Add:
        if (wants(0)) accumulate(pgrad(0), g, 1.0);
        if (wants(1)) accumulate(pgrad(1), g, 1.0);
        break;
      case Op::Sub:
        if (wants(0)) accumulate(pgrad(0), g, 1.0);
        if (wants(1)) accumulate(pgrad(1), g, -1.0);
        break;
      case Op::Mul: {
        const auto va = pval(0).data();
        const auto vb = pval(1).data();
        if (wants(0)) {
          auto ga = pgrad(0).data();
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g.data()[i] * vb[i];
        }
        if (wants(1)) {
          auto gb = pgrad(1).data();
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g.data()[i] * va[i];
        }
        break;
      }
      case Op::Scale:
        if (wants(0)) accumulate(pgrad(0), g, n.scalar);
        break;
      case Op::AddScalar:
        if (wants(0)) accumulate(pgrad(0), g, 1.0);
        break;
      case Op::PRelu: {
        const Matrix& x = pval(0);
        const double a = pval(1)(0, 0);
        if (wants(0)) {
          auto gx = pgrad(0).data();
          for (std::size_t i = 0; i < g.size(); ++i)
            gx[i] += x.data()[i] > 0.0 ? g.data()[i] : a * g.data()[i];
        }
        if (wants(1)) {
          double s = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i)
            if (x.data()[i] <= 0.0) s += g.data()[i] * x.data()[i];
          pgrad(1)(0, 0) += s;
        }
        break;
      }
      case Op::Abs:
        elementwise(n, [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
        break;
      case Op::Square:
        elementwise(n, [](double x, double) { return 2.0 * x; });
        break;
      case Op::Exp:
        elementwise(n, [](double, double y) { return y; });
        break;
      case Op::Log:
        elementwise(n, [](double x, double) { return 1.0 / x; });
        break;
      case Op::Softplus:
        elementwise(n, [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
        break;
      case Op::SliceCols: {
        if (!wants(0)) break;
        Matrix& ga = pgrad(0);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) ga(r, n.i0 + c) += g(r, c);
        break;
      }
      case Op::ConcatCols: {
        std::size_t off = 0;
        for (std::size_t i = 0; i < n.parents.size(); ++i) {
          const std::size_t w = pval(i).cols();
          if (wants(i)) {
            Matrix& gp = pgrad(i);
            for (std::size_t r = 0; r < g.rows(); ++r)
              for (std::size_t c = 0; c < w; ++c) gp(r, c) += g(r, off + c);
          }
          off += w;
        }
        break;
      }
      case Op::SumAll:
        if (wants(0))
          for (double& v : pgrad(0).data()) v += g(0, 0);
        break;
      case Op::MeanAll:
        if (wants(0)) {
          const double s = g(0, 0) / static_cast<double>(pval(0).size());
          for (double& v : pgrad(0).data()) v += s;
        }
        break;
      case Op::SqDist: {
        const Matrix& a = pval(0);
        const Matrix& b = pval(1);
        const std::size_t d = a.cols();
        const bool wa = wants(0), wb = wants(1);
        for (std::size_t i = 0; i < a.rows(); ++i) {
          for (std::size_t j = 0; j < b.rows(); ++j) {
            const double gij = 2.0 * g(i, j);
            if (gij == 0.0) continue;
            for (std::size_t k = 0; k < d; ++k) {
              const double diff = gij * (a(i, k) - b(j, k));
              if (wa) pgrad(0)(i, k) += diff;
              if (wb) pgrad(1)(j, k) -= diff;
            }
          }
        }
        break;
      }
      case Op::LowerCorr: {
        if (!wants(0)) break;
        const std::size_t ni = n.i0, steps = n.i1;
        const Matrix& paths = pval(0);
        Matrix& gp = pgrad(0);
        std::size_t next_bad = 0;
        for (std::size_t b = 0; b < paths.rows(); ++b) {
          if (next_bad < n.indices.size() && n.indices[next_bad] == b) {
            ++next_bad;
            continue;
          }
          const Moments2 m = second_moments(paths.row(b), ni, steps);
          auto grow = gp.row(b);
          std::size_t p = 0;
          for (std::size_t i = 1; i < ni; ++i)
            for (std::size_t j = 0; j < i; ++j, ++p) {
              const double gc = g(b, p);
              if (gc == 0.0) continue;
              const double sii = m.cross[i * ni + i], sjj = m.cross[j * ni + j];
              const double inv = 1.0 / std::sqrt(sii * sjj);
              const double corr = n.value(b, p);
              for (std::size_t t = 0; t < steps; ++t) {
                const double ci = m.centered[t * ni + i], cj = m.centered[t * ni + j];
                grow[t * ni + i] += gc * (cj * inv - corr * ci / sii);
                grow[t * ni + j] += gc * (ci * inv - corr * cj / sjj);
              }
            }
        }
        break;
      }
      case Op::SelectRows: {
        if (!wants(0)) break;
        Matrix& ga = pgrad(0);
        for (std::size_t r = 0; r < n.indices.size(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) ga(n.indices[r], c) += g(r, c);
        break;
      }
    }
  }

  static void accumulate(Matrix& target, const Matrix& g, double s) {
    auto t = target.data();
    const auto src = g.data();
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += s * src[i];
  }

  /// Unary op backward: parent grad += g * f'(x, y).
  template <class D>
  void elementwise(Node& n, D deriv) {
    Node& parent = nodes_[n.parents[0]];
    if (!parent.requires_grad) return;
    auto gp = parent.grad.data();
    const auto x = parent.value.data();
    const auto y = n.value.data();
    const auto g = n.grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i] * deriv(x[i], y[i]);
  }

  std::vector<Node> nodes_;
};

}  // namespace ftsbench
