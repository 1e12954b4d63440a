#pragma once

// Tensor-level reverse-mode automatic differentiation.
//
// A Graph is an append-only tape: every primitive evaluates eagerly, stores
// its value and records its parents, so parents always precede children.
// backward() walks the tape in reverse. With `record` set, every adjoint is
// itself built from graph primitives, which makes the returned gradients
// ordinary nodes that can be differentiated again (double backprop).

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "otjr/tensor.hpp"

namespace otjr::ad {

enum class Op : std::uint8_t {
  Variable,
  Constant,
  // user-facing primitives
  Add,
  Sub,
  Mul,
  Scale,
  MatMul,
  Affine,
  Relu,
  Softplus,
  Square,
  Sum,
  Mean,
  Inner,
  LogSumExp,
  Softmax,
  CrossEntropy,
  L2Norm,
  Abs,
  // adjoint building blocks
  ScaleShift,
  Sigmoid,
  ReluMask,
  SignMask,
  Reciprocal,
  ReduceLast,
  ExpandLast,
  ReduceFirst,
  ExpandFirst,
  ExpandScalar,
  Take,
  ScatterAdd,
};

std::string_view op_name(Op op);

using NodeIndex = std::uint32_t;

/// Everything about a node except its value.
struct NodeAttrs {
  Op op = Op::Constant;
  std::array<NodeIndex, 3> parents{};
  std::uint8_t arity = 0;
  double alpha = 0.0;
  double beta = 0.0;
  bool trans_a = false;
  bool trans_b = false;
  std::size_t extent = 0;
  Shape target_shape;
  std::shared_ptr<const std::vector<std::size_t>> index;
};

struct Node {
  NodeAttrs attrs;
  Tensor value;
  bool requires_grad = false;
};

class Graph;

/// Handle to a node on a Graph; valid while the graph lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return graph_ != nullptr; }
  Graph& graph() const;
  NodeIndex id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  double item() const { return value().item(); }

 private:
  friend class Graph;
  Var(Graph* graph, NodeIndex id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  NodeIndex id_ = 0;
};

/// Gradients of a scalar with respect to requested variables.
class GradMap {
 public:
  /// Gradient value for `v`; throws if `v` was not requested.
  const Tensor& operator[](Var v) const;
  /// Gradient node for `v`; only available from a recorded backward pass.
  Var node(Var v) const;
  bool recorded() const { return recorded_; }
  bool contains(Var v) const { return values_.count(v.id()) != 0; }

 private:
  friend class Graph;
  bool recorded_ = false;
  std::unordered_map<NodeIndex, Tensor> values_;
  std::unordered_map<NodeIndex, Var> nodes_;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf that gradients may be requested for.
  Var variable(Tensor value);
  /// Leaf that never receives a gradient.
  Var constant(Tensor value);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
  /// x (B,I), w (O,I), b (O) -> x w^T + b.
  Var affine(Var x, Var w, Var b);
  Var relu(Var a);
  Var softplus(Var a);
  Var square(Var a);
  Var sum(Var a);
  Var mean(Var a);
  Var inner(Var a, Var b);
  /// Stable log-sum-exp over the last axis.
  Var logsumexp(Var a);
  /// Softmax over the last axis.
  Var softmax(Var a);
  /// Fused per-row cross-entropy of logits against (possibly soft) targets.
  Var cross_entropy(Var logits, Var targets);
  /// Euclidean norm over the last axis.
  Var l2_norm(Var a);
  Var abs(Var a);

  Var scale_shift(Var a, double alpha, double beta);
  Var sigmoid(Var a);
  Var relu_mask(Var g, Var x);
  Var sign_mask(Var g, Var x);
  Var reciprocal(Var a);
  Var reduce_last(Var a);
  Var expand_last(Var a, std::size_t n);
  Var reduce_first(Var a);
  Var expand_first(Var a, std::size_t n);
  Var expand_scalar(Var a, Shape shape);
  Var take(Var a, std::shared_ptr<const std::vector<std::size_t>> index,
           Shape out_shape);
  Var scatter_add(Var g, std::shared_ptr<const std::vector<std::size_t>> index,
                  Shape out_shape);

  /// Reverse-mode gradients of the scalar `output`. With `record` set the
  /// adjoints are appended to this graph and remain differentiable.
  GradMap backward(Var output, std::span<const Var> wrt, bool record = false);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeIndex i) const { return nodes_.at(i); }
  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  /// Handle for an existing node index.
  Var handle(NodeIndex i);

  /// Recomputes every non-leaf node from its parents and reports whether the
  /// stored values were reproduced bit-for-bit.
  bool replay_matches() const;

 private:
  Var push(NodeAttrs attrs);
  Var leaf(Tensor value, bool requires_grad);
  void check_owned(Var v) const;

  std::vector<Node> nodes_;
};

Tensor evaluate(const NodeAttrs& attrs, std::span<const Tensor* const> parents);

// Free-function spellings so model code reads like maths.
inline Var relu(Var a) { return a.graph().relu(a); }
inline Var softplus(Var a) { return a.graph().softplus(a); }
inline Var square(Var a) { return a.graph().square(a); }
inline Var sum(Var a) { return a.graph().sum(a); }
inline Var mean(Var a) { return a.graph().mean(a); }
inline Var abs(Var a) { return a.graph().abs(a); }
inline Var softmax(Var a) { return a.graph().softmax(a); }
inline Var logsumexp(Var a) { return a.graph().logsumexp(a); }
inline Var l2_norm(Var a) { return a.graph().l2_norm(a); }
inline Var inner(Var a, Var b) { return a.graph().inner(a, b); }
inline Var matmul(Var a, Var b, bool ta = false, bool tb = false) {
  return a.graph().matmul(a, b, ta, tb);
}
inline Var affine(Var x, Var w, Var b) { return x.graph().affine(x, w, b); }
inline Var cross_entropy(Var logits, Var targets) {
  return logits.graph().cross_entropy(logits, targets);
}
inline Var scale(Var a, double c) { return a.graph().scale(a, c); }
inline Var operator+(Var a, Var b) { return a.graph().add(a, b); }
inline Var operator-(Var a, Var b) { return a.graph().sub(a, b); }
inline Var operator*(Var a, Var b) { return a.graph().mul(a, b); }
inline Var operator*(double c, Var a) { return a.graph().scale(a, c); }

}  // namespace otjr::ad
