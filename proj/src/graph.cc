#include "lmstyle/graph.h"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "lmstyle/errors.h"

namespace lmstyle {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMajor>;
using ConstMatMap = Eigen::Map<const RowMajor>;

MatMap as_matrix(Tensor& t) { return MatMap(t.data(), t.rows(), t.cols()); }
ConstMatMap as_matrix(const Tensor& t) { return ConstMatMap(t.data(), t.rows(), t.cols()); }

Shape matrix_shape(int64_t rows, int64_t cols) { return Shape{rows, cols}; }

// Row-wise log-sum-exp with max subtraction.
void log_softmax_rows(const Tensor& in, Tensor& out) {
  const int64_t r = in.rows(), c = in.cols();
  for (int64_t i = 0; i < r; ++i) {
    const double* x = in.data() + i * c;
    double* y = out.data() + i * c;
    double m = *std::max_element(x, x + c);
    double s = 0.0;
    for (int64_t j = 0; j < c; ++j) s += std::exp(x[j] - m);
    const double lse = m + std::log(s);
    for (int64_t j = 0; j < c; ++j) y[j] = x[j] - lse;
  }
}

void softmax_rows(const Tensor& in, Tensor& out) {
  const int64_t r = in.rows(), c = in.cols();
  for (int64_t i = 0; i < r; ++i) {
    const double* x = in.data() + i * c;
    double* y = out.data() + i * c;
    double m = *std::max_element(x, x + c);
    double s = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      y[j] = std::exp(x[j] - m);
      s += y[j];
    }
    const double inv = 1.0 / s;
    for (int64_t j = 0; j < c; ++j) y[j] *= inv;
  }
}

void check_axis(const Tensor& t, int axis) {
  const int last = t.rank() == 0 ? 0 : static_cast<int>(t.rank()) - 1;
  LMS_REQUIRE(axis == -1 || axis == last, "only the last axis is supported");
}

}  // namespace

const Tensor& Var::value() const {
  LMS_REQUIRE(valid(), "invalid Var");
  return graph->value(*this);
}

Var Graph::push(Node node) {
#ifndef NDEBUG
  assert(node.value.all_finite() && "non-finite value in forward pass");
#endif
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int32_t>(nodes_.size() - 1)};
}

void Graph::check(Var v) const {
  LMS_REQUIRE(v.graph == this, "Var belongs to a different graph");
  LMS_REQUIRE(v.id >= 0 && static_cast<size_t>(v.id) < nodes_.size(), "Var id out of range");
}

const Graph::Node& Graph::node(Var v) const {
  check(v);
  return nodes_[static_cast<size_t>(v.id)];
}

const Tensor& Graph::value(Var v) const { return node(v).value; }

bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

Tensor Graph::grad(Var v) const {
  const Node& n = node(v);
  if (n.has_grad) return n.grad;
  return Tensor(n.value.shape(), 0.0);
}

Var Graph::constant(Tensor value) {
  Node n;
  n.kind = OpKind::kInput;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::param(Parameter& p, bool trainable) {
  Node n;
  n.kind = trainable ? OpKind::kParam : OpKind::kInput;
  n.param = trainable ? &p : nullptr;
  n.requires_grad = trainable;
  n.value = p.value;
  return push(std::move(n));
}

Var Graph::matmul(Var a, Var b) {
  const Tensor& x = node(a).value;
  const Tensor& y = node(b).value;
  LMS_REQUIRE(x.cols() == y.rows(), "inner dimensions differ: " + shape_string(x.shape()) + " x " +
                                        shape_string(y.shape()));
  Node n;
  n.kind = OpKind::kMatMul;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.value = Tensor(matrix_shape(x.rows(), y.cols()));
  as_matrix(n.value).noalias() = as_matrix(x) * as_matrix(y);
  return push(std::move(n));
}

Var Graph::add(Var a, Var b) {
  const Tensor& x = node(a).value;
  const Tensor& y = node(b).value;
  Node n;
  n.kind = OpKind::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.value = x;
  if (x.same_shape(y)) {
    for (int64_t i = 0; i < x.size(); ++i) n.value[i] += y[i];
  } else {
    LMS_REQUIRE(y.rows() == 1 && y.cols() == x.cols(),
                "add needs equal shapes or a broadcast row: " + shape_string(x.shape()) + " + " +
                    shape_string(y.shape()));
    const int64_t c = x.cols();
    for (int64_t i = 0; i < x.rows(); ++i)
      for (int64_t j = 0; j < c; ++j) n.value[i * c + j] += y[j];
    n.lo = 1;  // broadcast flag
  }
  return push(std::move(n));
}

Var Graph::mul(Var a, Var b) {
  const Tensor& x = node(a).value;
  const Tensor& y = node(b).value;
  LMS_REQUIRE(x.same_shape(y), "mul needs equal shapes: " + shape_string(x.shape()) + " * " +
                                   shape_string(y.shape()));
  Node n;
  n.kind = OpKind::kMul;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.value = x;
  for (int64_t i = 0; i < x.size(); ++i) n.value[i] *= y[i];
  return push(std::move(n));
}

Var Graph::scale(Var a, double c) {
  Node n;
  n.kind = OpKind::kScale;
  n.a = a.id;
  n.scalar = c;
  n.requires_grad = node(a).requires_grad;
  n.value = node(a).value;
  for (double& v : n.value.values()) v *= c;
  return push(std::move(n));
}

Var Graph::add_scalar(Var a, double c) {
  Node n;
  n.kind = OpKind::kAddScalar;
  n.a = a.id;
  n.scalar = c;
  n.requires_grad = node(a).requires_grad;
  n.value = node(a).value;
  for (double& v : n.value.values()) v += c;
  return push(std::move(n));
}

Var Graph::sigmoid(Var a) {
  Node n;
  n.kind = OpKind::kSigmoid;
  n.a = a.id;
  n.requires_grad = node(a).requires_grad;
  n.value = node(a).value;
  for (double& v : n.value.values()) v = 1.0 / (1.0 + std::exp(-v));
  return push(std::move(n));
}

Var Graph::tanh(Var a) {
  Node n;
  n.kind = OpKind::kTanh;
  n.a = a.id;
  n.requires_grad = node(a).requires_grad;
  n.value = node(a).value;
  for (double& v : n.value.values()) v = std::tanh(v);
  return push(std::move(n));
}

Var Graph::softmax(Var logits, int axis) {
  const Tensor& x = node(logits).value;
  check_axis(x, axis);
  Node n;
  n.kind = OpKind::kSoftmax;
  n.a = logits.id;
  n.requires_grad = node(logits).requires_grad;
  n.value = Tensor(x.shape());
  softmax_rows(x, n.value);
  return push(std::move(n));
}

Var Graph::log_softmax(Var logits, int axis) {
  const Tensor& x = node(logits).value;
  check_axis(x, axis);
  Node n;
  n.kind = OpKind::kLogSoftmax;
  n.a = logits.id;
  n.requires_grad = node(logits).requires_grad;
  n.value = Tensor(x.shape());
  log_softmax_rows(x, n.value);
  return push(std::move(n));
}

Var Graph::gather_rows(Var table, std::span<const int> ids) {
  const Tensor& t = node(table).value;
  LMS_REQUIRE(!ids.empty(), "gather needs at least one id");
  const int64_t d = t.cols();
  Node n;
  n.kind = OpKind::kGatherRows;
  n.a = table.id;
  n.ids.assign(ids.begin(), ids.end());
  n.requires_grad = node(table).requires_grad;
  n.value = Tensor(matrix_shape(static_cast<int64_t>(ids.size()), d));
  for (size_t i = 0; i < ids.size(); ++i) {
    LMS_REQUIRE(ids[i] >= 0 && ids[i] < t.rows(),
                "token id " + std::to_string(ids[i]) + " outside table of " + std::to_string(t.rows()));
    std::copy_n(t.data() + ids[i] * d, d, n.value.data() + static_cast<int64_t>(i) * d);
  }
  return push(std::move(n));
}

Var Graph::concat_cols(std::span<const Var> parts) {
  LMS_REQUIRE(!parts.empty(), "concat of nothing");
  const int64_t r = node(parts[0]).value.rows();
  int64_t c = 0;
  Node n;
  n.kind = OpKind::kConcatCols;
  for (Var p : parts) {
    const Tensor& v = node(p).value;
    LMS_REQUIRE(v.rows() == r, "concat row counts differ");
    c += v.cols();
    n.inputs.push_back(p.id);
    n.requires_grad = n.requires_grad || node(p).requires_grad;
  }
  n.value = Tensor(matrix_shape(r, c));
  int64_t off = 0;
  for (Var p : parts) {
    const Tensor& v = node(p).value;
    const int64_t pc = v.cols();
    for (int64_t i = 0; i < r; ++i) std::copy_n(v.data() + i * pc, pc, n.value.data() + i * c + off);
    off += pc;
  }
  return push(std::move(n));
}

Var Graph::slice_cols(Var a, int64_t begin, int64_t end) {
  const Tensor& x = node(a).value;
  LMS_REQUIRE(0 <= begin && begin < end && end <= x.cols(), "column slice out of range");
  const int64_t r = x.rows(), c = x.cols(), w = end - begin;
  Node n;
  n.kind = OpKind::kSliceCols;
  n.a = a.id;
  n.lo = begin;
  n.hi = end;
  n.requires_grad = node(a).requires_grad;
  n.value = Tensor(matrix_shape(r, w));
  for (int64_t i = 0; i < r; ++i) std::copy_n(x.data() + i * c + begin, w, n.value.data() + i * w);
  return push(std::move(n));
}

Var Graph::slice_rows(Var a, int64_t begin, int64_t end) {
  const Tensor& x = node(a).value;
  LMS_REQUIRE(0 <= begin && begin < end && end <= x.rows(), "row slice out of range");
  const int64_t c = x.cols();
  Node n;
  n.kind = OpKind::kSliceRows;
  n.a = a.id;
  n.lo = begin;
  n.hi = end;
  n.requires_grad = node(a).requires_grad;
  n.value = Tensor(matrix_shape(end - begin, c));
  std::copy_n(x.data() + begin * c, (end - begin) * c, n.value.data());
  return push(std::move(n));
}

Var Graph::sum(Var a) {
  Node n;
  n.kind = OpKind::kSum;
  n.a = a.id;
  n.requires_grad = node(a).requires_grad;
  double s = 0.0;
  for (double v : node(a).value.values()) s += v;
  n.value = Tensor::scalar(s);
  return push(std::move(n));
}

Var Graph::mean(Var a) {
  Node n;
  n.kind = OpKind::kMean;
  n.a = a.id;
  n.requires_grad = node(a).requires_grad;
  const Tensor& x = node(a).value;
  double s = 0.0;
  for (double v : x.values()) s += v;
  n.value = Tensor::scalar(s / static_cast<double>(x.size()));
  return push(std::move(n));
}

Var Graph::cross_entropy(Var target, Var log_probs, bool check_simplex) {
  const Tensor& t = node(target).value;
  const Tensor& lp = node(log_probs).value;
  LMS_REQUIRE(t.rows() == lp.rows() && t.cols() == lp.cols(), "cross_entropy shape mismatch");
  const int64_t r = t.rows(), c = t.cols();
  Node n;
  n.kind = OpKind::kCrossEntropy;
  n.a = target.id;
  n.b = log_probs.id;
  n.requires_grad = node(target).requires_grad || node(log_probs).requires_grad;
  n.value = Tensor(matrix_shape(r, 1));
  for (int64_t i = 0; i < r; ++i) {
    double s = 0.0, mass = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      const double p = t[i * c + j];
      if (check_simplex) LMS_REQUIRE(p >= -1e-6, "target has a negative entry");
      mass += p;
      if (p != 0.0) s -= p * lp[i * c + j];
    }
    if (check_simplex) LMS_REQUIRE(std::abs(mass - 1.0) <= 1e-6, "target row is off the simplex");
    n.value[i] = s;
  }
  return push(std::move(n));
}

Tensor& Graph::grad_buffer(int32_t id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.has_grad) {
    if (n.grad.same_shape(n.value)) {
      n.grad.fill(0.0);
    } else {
      n.grad = Tensor(n.value.shape(), 0.0);
    }
    n.has_grad = true;
  }
  return n.grad;
}

void Graph::backward(Var loss) {
  check(loss);
  LMS_REQUIRE(node(loss).value.size() == 1, "loss must be a scalar, got shape " +
                                                shape_string(node(loss).value.shape()));
  for (Node& n : nodes_) n.has_grad = false;
  if (!node(loss).requires_grad) return;
  grad_buffer(loss.id).fill(1.0);
  for (int32_t i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.requires_grad || !n.has_grad) continue;
#ifndef NDEBUG
    assert(n.grad.all_finite() && "non-finite gradient in backward pass");
#endif
    backward_node(n);
  }
}

void Graph::backward_node(Node& n) {
  const Tensor& g = n.grad;
  auto wants = [&](int32_t id) { return id >= 0 && nodes_[static_cast<size_t>(id)].requires_grad; };

  switch (n.kind) {
    case OpKind::kInput:
      break;
    case OpKind::kParam: {
      Tensor& pg = n.param->grad;
      for (int64_t i = 0; i < g.size(); ++i) pg[i] += g[i];
      break;
    }
    case OpKind::kMatMul: {
      const Tensor& x = nodes_[static_cast<size_t>(n.a)].value;
      const Tensor& y = nodes_[static_cast<size_t>(n.b)].value;
      if (wants(n.a)) as_matrix(grad_buffer(n.a)).noalias() += as_matrix(g) * as_matrix(y).transpose();
      if (wants(n.b)) as_matrix(grad_buffer(n.b)).noalias() += as_matrix(x).transpose() * as_matrix(g);
      break;
    }
    case OpKind::kAdd: {
      if (wants(n.a)) {
        Tensor& ga = grad_buffer(n.a);
        for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(n.b)) {
        Tensor& gb = grad_buffer(n.b);
        if (n.lo == 0) {
          for (int64_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        } else {
          const int64_t c = g.cols();
          for (int64_t i = 0; i < g.rows(); ++i)
            for (int64_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
        }
      }
      break;
    }
    case OpKind::kMul: {
      const Tensor& x = nodes_[static_cast<size_t>(n.a)].value;
      const Tensor& y = nodes_[static_cast<size_t>(n.b)].value;
      if (wants(n.a)) {
        Tensor& ga = grad_buffer(n.a);
        for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
      }
      if (wants(n.b)) {
        Tensor& gb = grad_buffer(n.b);
        for (int64_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
      }
      break;
    }
    case OpKind::kScale: {
      Tensor& ga = grad_buffer(n.a);
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.scalar;
      break;
    }
    case OpKind::kAddScalar: {
      Tensor& ga = grad_buffer(n.a);
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      break;
    }
    case OpKind::kSigmoid: {
      Tensor& ga = grad_buffer(n.a);
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
      break;
    }
    case OpKind::kTanh: {
      Tensor& ga = grad_buffer(n.a);
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
      break;
    }
    case OpKind::kSoftmax: {
      Tensor& ga = grad_buffer(n.a);
      const int64_t r = g.rows(), c = g.cols();
      for (int64_t i = 0; i < r; ++i) {
        const double* y = n.value.data() + i * c;
        const double* gy = g.data() + i * c;
        double dot = 0.0;
        for (int64_t j = 0; j < c; ++j) dot += gy[j] * y[j];
        double* gx = ga.data() + i * c;
        for (int64_t j = 0; j < c; ++j) gx[j] += y[j] * (gy[j] - dot);
      }
      break;
    }
    case OpKind::kLogSoftmax: {
      Tensor& ga = grad_buffer(n.a);
      const int64_t r = g.rows(), c = g.cols();
      for (int64_t i = 0; i < r; ++i) {
        const double* y = n.value.data() + i * c;
        const double* gy = g.data() + i * c;
        double total = 0.0;
        for (int64_t j = 0; j < c; ++j) total += gy[j];
        double* gx = ga.data() + i * c;
        for (int64_t j = 0; j < c; ++j) gx[j] += gy[j] - std::exp(y[j]) * total;
      }
      break;
    }
    case OpKind::kGatherRows: {
      Tensor& ga = grad_buffer(n.a);
      const int64_t d = g.cols();
      for (size_t i = 0; i < n.ids.size(); ++i) {
        const double* src = g.data() + static_cast<int64_t>(i) * d;
        double* dst = ga.data() + static_cast<int64_t>(n.ids[i]) * d;
        for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
      }
      break;
    }
    case OpKind::kConcatCols: {
      const int64_t r = g.rows(), c = g.cols();
      int64_t off = 0;
      for (int32_t id : n.inputs) {
        const int64_t pc = nodes_[static_cast<size_t>(id)].value.cols();
        if (wants(id)) {
          Tensor& gp = grad_buffer(id);
          for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < pc; ++j) gp[i * pc + j] += g[i * c + off + j];
        }
        off += pc;
      }
      break;
    }
    case OpKind::kSliceCols: {
      Tensor& ga = grad_buffer(n.a);
      const int64_t c = ga.cols(), w = n.hi - n.lo;
      for (int64_t i = 0; i < g.rows(); ++i)
        for (int64_t j = 0; j < w; ++j) ga[i * c + n.lo + j] += g[i * w + j];
      break;
    }
    case OpKind::kSliceRows: {
      Tensor& ga = grad_buffer(n.a);
      const int64_t off = n.lo * ga.cols();
      for (int64_t i = 0; i < g.size(); ++i) ga[off + i] += g[i];
      break;
    }
    case OpKind::kSum: {
      Tensor& ga = grad_buffer(n.a);
      const double s = g[0];
      for (double& v : ga.values()) v += s;
      break;
    }
    case OpKind::kMean: {
      Tensor& ga = grad_buffer(n.a);
      const double s = g[0] / static_cast<double>(ga.size());
      for (double& v : ga.values()) v += s;
      break;
    }
    case OpKind::kCrossEntropy: {
      const Tensor& t = nodes_[static_cast<size_t>(n.a)].value;
      const Tensor& lp = nodes_[static_cast<size_t>(n.b)].value;
      const int64_t r = t.rows(), c = t.cols();
      if (wants(n.a)) {
        Tensor& gt = grad_buffer(n.a);
        for (int64_t i = 0; i < r; ++i)
          for (int64_t j = 0; j < c; ++j) gt[i * c + j] -= g[i] * lp[i * c + j];
      }
      if (wants(n.b)) {
        Tensor& gl = grad_buffer(n.b);
        for (int64_t i = 0; i < r; ++i)
          for (int64_t j = 0; j < c; ++j) gl[i * c + j] -= g[i] * t[i * c + j];
      }
      break;
    }
  }
}

}  // namespace lmstyle
