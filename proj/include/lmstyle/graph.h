#ifndef LMSTYLE_GRAPH_H_
#define LMSTYLE_GRAPH_H_

#include <cstdint>
#include <span>
#include <vector>

#include "lmstyle/parameters.h"
#include "lmstyle/tensor.h"

namespace lmstyle {

class Graph;

// Handle to a node of a Graph. Cheap to copy; only valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  int32_t id = -1;

  bool valid() const { return graph != nullptr && id >= 0; }
  const Tensor& value() const;
};

enum class OpKind : uint8_t {
  kInput,
  kParam,
  kMatMul,
  kAdd,
  kMul,
  kScale,
  kAddScalar,
  kSigmoid,
  kTanh,
  kSoftmax,
  kLogSoftmax,
  kGatherRows,
  kConcatCols,
  kSliceCols,
  kSliceRows,
  kSum,
  kMean,
  kCrossEntropy,
};

// Tape for reverse-mode differentiation. Nodes are appended in construction
// order, which is a topological order because every op only refers to
// existing nodes. backward() walks the tape once in reverse.
//
// All ops treat values as matrices (see Tensor::rows/cols). Row-wise ops
// (softmax, log_softmax, cross_entropy) act along the last axis.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // A trainable leaf. When trainable is false the parameter enters as a
  // constant and receives no gradient.
  Var param(Parameter& p, bool trainable = true);

  Var matmul(Var a, Var b);
  // b is either the same shape as a, or a single row broadcast over a's rows.
  Var add(Var a, Var b);
  Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var softmax(Var logits, int axis = -1);
  Var log_softmax(Var logits, int axis = -1);
  // Rows of table selected by ids (embedding lookup).
  Var gather_rows(Var table, std::span<const int> ids);
  // probs (n x V) times table (V x d): expected embedding under each row.
  Var weighted_embedding(Var probs, Var table) { return matmul(probs, table); }
  Var concat_cols(std::span<const Var> parts);
  Var slice_cols(Var a, int64_t begin, int64_t end);
  Var slice_rows(Var a, int64_t begin, int64_t end);
  Var sum(Var a);
  Var mean(Var a);
  // Row-wise -sum_j target_ij * log_probs_ij, shape (rows x 1). When
  // check_simplex is set, every target row must lie on the simplex.
  Var cross_entropy(Var target, Var log_probs, bool check_simplex = false);

  const Tensor& value(Var v) const;
  // Gradient of the last backward() loss w.r.t. v (zeros if unreachable).
  Tensor grad(Var v) const;
  bool requires_grad(Var v) const;

  // Propagates d(loss)/d(node) through the tape and accumulates the result
  // into Parameter::grad of every trainable parameter reached.
  void backward(Var loss);

  size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    OpKind kind = OpKind::kInput;
    int32_t a = -1;
    int32_t b = -1;
    std::vector<int32_t> inputs;  // concat only
    std::vector<int> ids;         // gather only
    int64_t lo = 0;
    int64_t hi = 0;
    double scalar = 0.0;
    Parameter* param = nullptr;
    bool requires_grad = false;
    bool has_grad = false;
    Tensor value;
    Tensor grad;
  };

  Var push(Node node);
  const Node& node(Var v) const;
  void check(Var v) const;
  Tensor& grad_buffer(int32_t id);
  void backward_node(Node& n);

  std::vector<Node> nodes_;
};

}  // namespace lmstyle

#endif  // LMSTYLE_GRAPH_H_
