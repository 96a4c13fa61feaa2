#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "timbre/errors.hpp"

namespace timbre::ad {

/// Handle into a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Define-by-run reverse-mode tape over dense matrices. A fresh tape is
/// built for every training step; nodes are stored in topological order so
/// backward is a single reverse sweep. Scalars are 1x1 matrices.
template <class S>
class Tape {
 public:
  using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

  Var leaf(Matrix value, bool requires_grad = false) {
    return push(Op::Leaf, -1, -1, std::move(value), requires_grad);
  }
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  Var matmul(Var a, Var b) {
    check_cols_rows(a, b);
    return push(Op::Matmul, a.id, b.id, value(a) * value(b), any_grad(a, b));
  }

  Var add(Var a, Var b) {
    check_same(a, b);
    return push(Op::Add, a.id, b.id, value(a) + value(b), any_grad(a, b));
  }

  /// Broadcast a 1 x n row (bias) over every row of a.
  Var add_rowvec(Var a, Var bias) {
    if (value(bias).rows() != 1 || value(bias).cols() != value(a).cols())
      throw ShapeError("bias must be 1 x cols(a)");
    Matrix out = value(a);
    out.rowwise() += value(bias).row(0);
    return push(Op::AddRowvec, a.id, bias.id, std::move(out), any_grad(a, bias));
  }

  Var sub(Var a, Var b) {
    check_same(a, b);
    return push(Op::Sub, a.id, b.id, value(a) - value(b), any_grad(a, b));
  }

  Var mul(Var a, Var b) {
    check_same(a, b);
    return push(Op::Mul, a.id, b.id, value(a).cwiseProduct(value(b)),
                any_grad(a, b));
  }

  Var scale(Var a, S c) {
    Var v = push(Op::Scale, a.id, -1, value(a) * c, needs_grad(a));
    nodes_[size_t(v.id)].payload = c;
    return v;
  }

  Var add_scalar(Var a, S c) {
    Var v = push(Op::AddScalar, a.id, -1,
                 Matrix(value(a).array() + c), needs_grad(a));
    nodes_[size_t(v.id)].payload = c;
    return v;
  }

  Var relu(Var a) {
    return push(Op::Relu, a.id, -1, value(a).cwiseMax(S(0)), needs_grad(a));
  }

  Var exp(Var a) {
    return push(Op::Exp, a.id, -1, Matrix(value(a).array().exp()), needs_grad(a));
  }

  Var log(Var a) {
    return push(Op::Log, a.id, -1, Matrix(value(a).array().log()), needs_grad(a));
  }

  Var square(Var a) {
    return push(Op::Square, a.id, -1, Matrix(value(a).array().square()),
                needs_grad(a));
  }

  Var softplus(Var a) {
    // log1p(exp(x)) computed as max(x,0) + log1p(exp(-|x|)) for stability
    Matrix out = value(a).unaryExpr([](S x) {
      return std::max(x, S(0)) + S(std::log1p(std::exp(-std::abs(double(x)))));
    });
    return push(Op::Softplus, a.id, -1, std::move(out), needs_grad(a));
  }

  Var sum(Var a) {
    Matrix out(1, 1);
    out(0, 0) = value(a).sum();
    return push(Op::Sum, a.id, -1, std::move(out), needs_grad(a));
  }

  Var mean(Var a) {
    Matrix out(1, 1);
    out(0, 0) = value(a).mean();
    return push(Op::Mean, a.id, -1, std::move(out), needs_grad(a));
  }

  /// Reparameterized Gaussian draw: mu + exp(log_var / 2) .* eps, with eps
  /// held constant, so gradients flow through mu and log_var only.
  Var gaussian_sample(Var mu, Var log_var, Matrix eps) {
    check_same(mu, log_var);
    if (eps.rows() != value(mu).rows() || eps.cols() != value(mu).cols())
      throw ShapeError("eps shape must match mu");
    Matrix sigma = (value(log_var).array() * S(0.5)).exp();
    Matrix out = value(mu) + sigma.cwiseProduct(eps);
    Var v = push(Op::GaussianSample, mu.id, log_var.id, std::move(out),
                 needs_grad(mu) || needs_grad(log_var));
    nodes_[size_t(v.id)].aux = std::move(eps);
    return v;
  }

  /// n x n matrix of squared Euclidean distances between rows of z.
  Var pairwise_sqdist(Var z) {
    const Matrix& pts = value(z);
    const Eigen::Index n = pts.rows();
    Matrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      out(i, i) = S(0);
      for (Eigen::Index j = i + 1; j < n; ++j)
        out(i, j) = out(j, i) = (pts.row(i) - pts.row(j)).squaredNorm();
    }
    return push(Op::PairwiseSqdist, z.id, -1, std::move(out), needs_grad(z));
  }

  /// Row-stochastic normalized exponential over off-diagonal entries:
  /// out_ij = exp(l_ij) / sum_{k != i} exp(l_ik), zero diagonal.
  Var masked_row_softmax(Var logits) {
    const Matrix& l = value(logits);
    if (l.rows() != l.cols()) throw ShapeError("softmax needs a square matrix");
    const Eigen::Index n = l.rows();
    Matrix out = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      S mx = std::numeric_limits<S>::lowest();
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i) mx = std::max(mx, l(i, j));
      S denom = S(0);
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i) denom += std::exp(l(i, j) - mx);
      for (Eigen::Index j = 0; j < n; ++j)
        if (j != i) out(i, j) = std::exp(l(i, j) - mx) / denom;
    }
    return push(Op::MaskedRowSoftmax, logits.id, -1, std::move(out),
                needs_grad(logits));
  }

  /// Per-class mean of rows: out has n_classes rows; row c is the mean of
  /// all x rows whose label is c. Every class must be populated.
  Var segment_mean(Var x, const std::vector<int>& labels, int n_classes) {
    const Matrix& in = value(x);
    if (Eigen::Index(labels.size()) != in.rows())
      throw ShapeError("one label per row required");
    Matrix out = Matrix::Zero(n_classes, in.cols());
    std::vector<int> counts(size_t(n_classes), 0);
    for (Eigen::Index r = 0; r < in.rows(); ++r) {
      const int c = labels[size_t(r)];
      if (c < 0 || c >= n_classes) throw ShapeError("label out of range");
      out.row(c) += in.row(r);
      ++counts[size_t(c)];
    }
    for (int c = 0; c < n_classes; ++c) {
      if (counts[size_t(c)] == 0)
        throw ShapeError("class " + std::to_string(c) + " has no rows");
      out.row(c) /= S(counts[size_t(c)]);
    }
    Var v = push(Op::SegmentMean, x.id, -1, std::move(out), needs_grad(x));
    nodes_[size_t(v.id)].labels = labels;
    nodes_[size_t(v.id)].counts = std::move(counts);
    return v;
  }

  const Matrix& value(Var v) const { return nodes_[size_t(v.id)].value; }
  S scalar(Var v) const {
    const Matrix& m = value(v);
    if (m.size() != 1) throw NotScalar("expected a 1x1 value");
    return m(0, 0);
  }

  bool has_grad(Var v) const {
    return nodes_[size_t(v.id)].requires_grad &&
           nodes_[size_t(v.id)].grad.size() > 0;
  }
  const Matrix& grad(Var v) const {
    if (!has_grad(v)) throw Error("no gradient recorded for this variable");
    return nodes_[size_t(v.id)].grad;
  }

  /// Reverse accumulation from a scalar loss through the whole tape.
  void backward(Var loss) {
    Node& top = nodes_[size_t(loss.id)];
    if (top.value.size() != 1) throw NotScalar("backward needs a scalar loss");
    for (auto& n : nodes_)
      if (n.requires_grad) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    if (!top.requires_grad) return;
    top.grad(0, 0) = S(1);
    for (int id = loss.id; id >= 0; --id) backprop_node(id);
  }

 private:
  enum class Op {
    Leaf, Matmul, Add, AddRowvec, Sub, Mul, Scale, AddScalar, Relu, Exp, Log,
    Square, Softplus, Sum, Mean, GaussianSample, PairwiseSqdist,
    MaskedRowSoftmax, SegmentMean
  };

  struct Node {
    Op op = Op::Leaf;
    int a = -1, b = -1;
    Matrix value;
    Matrix grad;
    Matrix aux;  // eps for GaussianSample
    std::vector<int> labels;
    std::vector<int> counts;
    S payload = S(0);
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;

  bool needs_grad(Var a) const { return nodes_[size_t(a.id)].requires_grad; }
  bool any_grad(Var a, Var b) const { return needs_grad(a) || needs_grad(b); }

  void check_same(Var a, Var b) const {
    if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
      throw ShapeError("operand shapes must match");
  }
  void check_cols_rows(Var a, Var b) const {
    if (value(a).cols() != value(b).rows())
      throw ShapeError("inner dimensions must agree");
  }

  Var push(Op op, int a, int b, Matrix value, bool requires_grad) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{int(nodes_.size()) - 1};
  }

  void accumulate(int id, const Matrix& g) {
    if (id < 0) return;
    Node& n = nodes_[size_t(id)];
    if (n.requires_grad) n.grad += g;
  }

  void backprop_node(int id) {
    Node& n = nodes_[size_t(id)];
    if (!n.requires_grad || n.op == Op::Leaf) return;
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Matmul:
        accumulate(n.a, g * nodes_[size_t(n.b)].value.transpose());
        accumulate(n.b, nodes_[size_t(n.a)].value.transpose() * g);
        break;
      case Op::Add:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::AddRowvec:
        accumulate(n.a, g);
        accumulate(n.b, Matrix(g.colwise().sum()));
        break;
      case Op::Sub:
        accumulate(n.a, g);
        accumulate(n.b, Matrix(-g));
        break;
      case Op::Mul:
        accumulate(n.a, g.cwiseProduct(nodes_[size_t(n.b)].value));
        accumulate(n.b, g.cwiseProduct(nodes_[size_t(n.a)].value));
        break;
      case Op::Scale:
        accumulate(n.a, Matrix(g * n.payload));
        break;
      case Op::AddScalar:
        accumulate(n.a, g);
        break;
      case Op::Relu: {
        const Matrix& x = nodes_[size_t(n.a)].value;
        accumulate(n.a, Matrix((x.array() > S(0)).template cast<S>() * g.array()));
        break;
      }
      case Op::Exp:
        accumulate(n.a, g.cwiseProduct(n.value));
        break;
      case Op::Log:
        accumulate(n.a, Matrix(g.array() / nodes_[size_t(n.a)].value.array()));
        break;
      case Op::Square:
        accumulate(n.a,
                   Matrix(S(2) * g.cwiseProduct(nodes_[size_t(n.a)].value)));
        break;
      case Op::Softplus: {
        const Matrix& x = nodes_[size_t(n.a)].value;
        Matrix sig = x.unaryExpr(
            [](S v) { return S(1) / (S(1) + S(std::exp(-double(v)))); });
        accumulate(n.a, g.cwiseProduct(sig));
        break;
      }
      case Op::Sum:
        accumulate(n.a, Matrix::Constant(nodes_[size_t(n.a)].value.rows(),
                                         nodes_[size_t(n.a)].value.cols(),
                                         g(0, 0)));
        break;
      case Op::Mean:
        accumulate(n.a, Matrix::Constant(nodes_[size_t(n.a)].value.rows(),
                                         nodes_[size_t(n.a)].value.cols(),
                                         g(0, 0) / S(nodes_[size_t(n.a)].value.size())));
        break;
      case Op::GaussianSample: {
        accumulate(n.a, g);
        const Matrix& lv = nodes_[size_t(n.b)].value;
        Matrix dsigma = (lv.array() * S(0.5)).exp() * S(0.5);
        accumulate(n.b, g.cwiseProduct(n.aux).cwiseProduct(dsigma));
        break;
      }
      case Op::PairwiseSqdist: {
        const Matrix& z = nodes_[size_t(n.a)].value;
        Matrix h = g + g.transpose();
        Matrix dz = S(2) * (h.rowwise().sum().asDiagonal() * z - h * z);
        accumulate(n.a, dz);
        break;
      }
      case Op::MaskedRowSoftmax: {
        const Matrix& p = n.value;
        const Eigen::Index rows = p.rows();
        Matrix dl = Matrix::Zero(rows, rows);
        for (Eigen::Index i = 0; i < rows; ++i) {
          const S dot = g.row(i).cwiseProduct(p.row(i)).sum();
          for (Eigen::Index j = 0; j < rows; ++j)
            if (j != i) dl(i, j) = p(i, j) * (g(i, j) - dot);
        }
        accumulate(n.a, dl);
        break;
      }
      case Op::SegmentMean: {
        const Matrix& in = nodes_[size_t(n.a)].value;
        Matrix dx(in.rows(), in.cols());
        for (Eigen::Index r = 0; r < in.rows(); ++r) {
          const int c = n.labels[size_t(r)];
          dx.row(r) = g.row(c) / S(n.counts[size_t(c)]);
        }
        accumulate(n.a, dx);
        break;
      }
    }
  }
};

using TapeF = Tape<float>;
using TapeD = Tape<double>;

}  // namespace timbre::ad
