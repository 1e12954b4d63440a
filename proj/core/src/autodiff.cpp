#include "otjr/autodiff.hpp"

#include <optional>
#include <type_traits>
#include <string>

#include "otjr/errors.hpp"
#include "otjr/kernels.hpp"

namespace otjr::ad {

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Variable: return "variable";
    case Op::Constant: return "constant";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::MatMul: return "matmul";
    case Op::Affine: return "affine";
    case Op::Relu: return "relu";
    case Op::Softplus: return "softplus";
    case Op::Square: return "square";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::Inner: return "inner";
    case Op::LogSumExp: return "logsumexp";
    case Op::Softmax: return "softmax";
    case Op::CrossEntropy: return "cross_entropy";
    case Op::L2Norm: return "l2_norm";
    case Op::Abs: return "abs";
    case Op::ScaleShift: return "scale_shift";
    case Op::Sigmoid: return "sigmoid";
    case Op::ReluMask: return "relu_mask";
    case Op::SignMask: return "sign_mask";
    case Op::Reciprocal: return "reciprocal";
    case Op::ReduceLast: return "reduce_last";
    case Op::ExpandLast: return "expand_last";
    case Op::ReduceFirst: return "reduce_first";
    case Op::ExpandFirst: return "expand_first";
    case Op::ExpandScalar: return "expand_scalar";
    case Op::Take: return "take";
    case Op::ScatterAdd: return "scatter_add";
  }
  return "unknown";
}

Graph& Var::graph() const {
  if (!graph_) throw ContractError("use of an empty Var");
  return *graph_;
}

const Tensor& Var::value() const { return graph().value(*this); }

const Tensor& GradMap::operator[](Var v) const {
  auto it = values_.find(v.id());
  if (it == values_.end()) {
    throw ContractError("gradient requested for a variable not passed to backward");
  }
  return it->second;
}

Var GradMap::node(Var v) const {
  if (!recorded_) throw ContractError("gradient nodes need a recorded backward pass");
  auto it = nodes_.find(v.id());
  if (it == nodes_.end()) {
    throw ContractError("gradient requested for a variable not passed to backward");
  }
  return it->second;
}

Tensor evaluate(const NodeAttrs& a, std::span<const Tensor* const> p) {
  namespace k = kernels;
  switch (a.op) {
    case Op::Variable:
    case Op::Constant:
      throw ContractError("leaves are not evaluated");
    case Op::Add: return k::add(*p[0], *p[1]);
    case Op::Sub: return k::sub(*p[0], *p[1]);
    case Op::Mul: return k::mul(*p[0], *p[1]);
    case Op::Scale: return k::scale(*p[0], a.alpha);
    case Op::MatMul: return k::matmul(*p[0], *p[1], a.trans_a, a.trans_b);
    case Op::Affine: return k::affine(*p[0], *p[1], *p[2]);
    case Op::Relu: return k::relu(*p[0]);
    case Op::Softplus: return k::softplus(*p[0]);
    case Op::Square: return k::square(*p[0]);
    case Op::Sum: return k::sum(*p[0]);
    case Op::Mean: return k::mean(*p[0]);
    case Op::Inner: return k::inner(*p[0], *p[1]);
    case Op::LogSumExp: return k::logsumexp_last(*p[0]);
    case Op::Softmax: return k::softmax_last(*p[0]);
    case Op::CrossEntropy: return k::cross_entropy_last(*p[0], *p[1]);
    case Op::L2Norm: return k::l2norm_last(*p[0]);
    case Op::Abs: return k::abs(*p[0]);
    case Op::ScaleShift: return k::scale_shift(*p[0], a.alpha, a.beta);
    case Op::Sigmoid: return k::sigmoid(*p[0]);
    case Op::ReluMask: return k::relu_mask(*p[0], *p[1]);
    case Op::SignMask: return k::sign_mask(*p[0], *p[1]);
    case Op::Reciprocal: return k::reciprocal(*p[0]);
    case Op::ReduceLast: return k::reduce_last(*p[0]);
    case Op::ExpandLast: return k::expand_last(*p[0], a.extent);
    case Op::ReduceFirst: return k::reduce_first(*p[0]);
    case Op::ExpandFirst: return k::expand_first(*p[0], a.extent);
    case Op::ExpandScalar: return k::expand_scalar(*p[0], a.target_shape);
    case Op::Take: return k::take(*p[0], *a.index, a.target_shape);
    case Op::ScatterAdd: return k::scatter_add(*p[0], *a.index, a.target_shape);
  }
  throw ContractError("unknown primitive");
}

// ---------------------------------------------------------------------------
// Graph construction

void Graph::check_owned(Var v) const {
  if (!v.valid() || &v.graph() != this || v.id() >= nodes_.size()) {
    throw ContractError("variable does not belong to this graph");
  }
}

Var Graph::handle(NodeIndex i) {
  if (i >= nodes_.size()) throw ContractError("node index out of range");
  return Var(this, i);
}

Var Graph::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) {
    throw NumericError("non-finite value supplied as graph input");
  }
  Node n;
  n.attrs.op = requires_grad ? Op::Variable : Op::Constant;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<NodeIndex>(nodes_.size() - 1));
}

Var Graph::variable(Tensor value) { return leaf(std::move(value), true); }
Var Graph::constant(Tensor value) { return leaf(std::move(value), false); }

Var Graph::push(NodeAttrs attrs) {
  std::array<const Tensor*, 3> parents{};
  bool requires_grad = false;
  for (std::uint8_t i = 0; i < attrs.arity; ++i) {
    const Node& p = nodes_[attrs.parents[i]];
    parents[i] = &p.value;
    requires_grad = requires_grad || p.requires_grad;
  }
  Tensor value;
  try {
    value = evaluate(attrs, std::span<const Tensor* const>(parents.data(), attrs.arity));
  } catch (const ContractError& e) {
    throw ContractError(std::string(op_name(attrs.op)) + ": " + e.what());
  }
  if (!value.all_finite()) {
    throw NumericError(std::string(op_name(attrs.op)) + " produced a non-finite value");
  }
  Node n{std::move(attrs), std::move(value), requires_grad};
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<NodeIndex>(nodes_.size() - 1));
}

namespace {

NodeAttrs unary(Op op, Var a) {
  NodeAttrs at;
  at.op = op;
  at.arity = 1;
  at.parents[0] = a.id();
  return at;
}

NodeAttrs binary(Op op, Var a, Var b) {
  NodeAttrs at = unary(op, a);
  at.arity = 2;
  at.parents[1] = b.id();
  return at;
}

}  // namespace

#define OTJR_OWN1(a) check_owned(a)
#define OTJR_OWN2(a, b) (check_owned(a), check_owned(b))

Var Graph::add(Var a, Var b) { OTJR_OWN2(a, b); return push(binary(Op::Add, a, b)); }
Var Graph::sub(Var a, Var b) { OTJR_OWN2(a, b); return push(binary(Op::Sub, a, b)); }
Var Graph::mul(Var a, Var b) { OTJR_OWN2(a, b); return push(binary(Op::Mul, a, b)); }

Var Graph::scale(Var a, double c) {
  OTJR_OWN1(a);
  NodeAttrs at = unary(Op::Scale, a);
  at.alpha = c;
  return push(std::move(at));
}

Var Graph::matmul(Var a, Var b, bool trans_a, bool trans_b) {
  OTJR_OWN2(a, b);
  NodeAttrs at = binary(Op::MatMul, a, b);
  at.trans_a = trans_a;
  at.trans_b = trans_b;
  return push(std::move(at));
}

Var Graph::affine(Var x, Var w, Var b) {
  OTJR_OWN2(x, w);
  OTJR_OWN1(b);
  NodeAttrs at = binary(Op::Affine, x, w);
  at.arity = 3;
  at.parents[2] = b.id();
  return push(std::move(at));
}

Var Graph::relu(Var a) { OTJR_OWN1(a); return push(unary(Op::Relu, a)); }
Var Graph::softplus(Var a) { OTJR_OWN1(a); return push(unary(Op::Softplus, a)); }
Var Graph::square(Var a) { OTJR_OWN1(a); return push(unary(Op::Square, a)); }
Var Graph::sum(Var a) { OTJR_OWN1(a); return push(unary(Op::Sum, a)); }
Var Graph::mean(Var a) { OTJR_OWN1(a); return push(unary(Op::Mean, a)); }
Var Graph::inner(Var a, Var b) { OTJR_OWN2(a, b); return push(binary(Op::Inner, a, b)); }
Var Graph::logsumexp(Var a) { OTJR_OWN1(a); return push(unary(Op::LogSumExp, a)); }
Var Graph::softmax(Var a) { OTJR_OWN1(a); return push(unary(Op::Softmax, a)); }

Var Graph::cross_entropy(Var logits, Var targets) {
  OTJR_OWN2(logits, targets);
  return push(binary(Op::CrossEntropy, logits, targets));
}

Var Graph::l2_norm(Var a) { OTJR_OWN1(a); return push(unary(Op::L2Norm, a)); }
Var Graph::abs(Var a) { OTJR_OWN1(a); return push(unary(Op::Abs, a)); }

Var Graph::scale_shift(Var a, double alpha, double beta) {
  OTJR_OWN1(a);
  NodeAttrs at = unary(Op::ScaleShift, a);
  at.alpha = alpha;
  at.beta = beta;
  return push(std::move(at));
}

Var Graph::sigmoid(Var a) { OTJR_OWN1(a); return push(unary(Op::Sigmoid, a)); }
Var Graph::relu_mask(Var g, Var x) { OTJR_OWN2(g, x); return push(binary(Op::ReluMask, g, x)); }
Var Graph::sign_mask(Var g, Var x) { OTJR_OWN2(g, x); return push(binary(Op::SignMask, g, x)); }
Var Graph::reciprocal(Var a) { OTJR_OWN1(a); return push(unary(Op::Reciprocal, a)); }
Var Graph::reduce_last(Var a) { OTJR_OWN1(a); return push(unary(Op::ReduceLast, a)); }

Var Graph::expand_last(Var a, std::size_t n) {
  OTJR_OWN1(a);
  NodeAttrs at = unary(Op::ExpandLast, a);
  at.extent = n;
  return push(std::move(at));
}

Var Graph::reduce_first(Var a) { OTJR_OWN1(a); return push(unary(Op::ReduceFirst, a)); }

Var Graph::expand_first(Var a, std::size_t n) {
  OTJR_OWN1(a);
  NodeAttrs at = unary(Op::ExpandFirst, a);
  at.extent = n;
  return push(std::move(at));
}

Var Graph::expand_scalar(Var a, Shape shape) {
  OTJR_OWN1(a);
  NodeAttrs at = unary(Op::ExpandScalar, a);
  at.target_shape = std::move(shape);
  return push(std::move(at));
}

Var Graph::take(Var a, std::shared_ptr<const std::vector<std::size_t>> index,
                Shape out_shape) {
  OTJR_OWN1(a);
  if (!index) throw ContractError("take: null index");
  NodeAttrs at = unary(Op::Take, a);
  at.index = std::move(index);
  at.target_shape = std::move(out_shape);
  return push(std::move(at));
}

Var Graph::scatter_add(Var g, std::shared_ptr<const std::vector<std::size_t>> index,
                       Shape out_shape) {
  OTJR_OWN1(g);
  if (!index) throw ContractError("scatter_add: null index");
  NodeAttrs at = unary(Op::ScatterAdd, g);
  at.index = std::move(index);
  at.target_shape = std::move(out_shape);
  return push(std::move(at));
}

#undef OTJR_OWN1
#undef OTJR_OWN2

bool Graph::replay_matches() const {
  for (const Node& n : nodes_) {
    if (n.attrs.op == Op::Variable || n.attrs.op == Op::Constant) continue;
    std::array<const Tensor*, 3> parents{};
    for (std::uint8_t i = 0; i < n.attrs.arity; ++i) {
      parents[i] = &nodes_[n.attrs.parents[i]].value;
    }
    Tensor again = evaluate(n.attrs, std::span<const Tensor* const>(parents.data(), n.attrs.arity));
    if (!(again == n.value)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Reverse pass
//
// Each rule below is written once against an "algebra": EagerAlgebra runs the
// adjoint arithmetic on plain tensors, RecordingAlgebra appends it to the
// graph so it can be differentiated again.

namespace {

struct EagerAlgebra {
  using Value = Tensor;
  const Graph& graph;

  const Tensor& parent(const NodeAttrs& at, int k) const {
    return graph.node(at.parents[k]).value;
  }
  const Tensor& self(NodeIndex id) const { return graph.node(id).value; }

  Tensor add(const Tensor& a, const Tensor& b) const { return kernels::add(a, b); }
  Tensor sub(const Tensor& a, const Tensor& b) const { return kernels::sub(a, b); }
  Tensor mul(const Tensor& a, const Tensor& b) const { return kernels::mul(a, b); }
  Tensor scale(const Tensor& a, double c) const { return kernels::scale(a, c); }
  Tensor scale_shift(const Tensor& a, double al, double be) const {
    return kernels::scale_shift(a, al, be);
  }
  Tensor matmul(const Tensor& a, const Tensor& b, bool ta, bool tb) const {
    return kernels::matmul(a, b, ta, tb);
  }
  Tensor square(const Tensor& a) const { return kernels::square(a); }
  Tensor sum(const Tensor& a) const { return kernels::sum(a); }
  Tensor sigmoid(const Tensor& a) const { return kernels::sigmoid(a); }
  Tensor softmax(const Tensor& a) const { return kernels::softmax_last(a); }
  Tensor logsumexp(const Tensor& a) const { return kernels::logsumexp_last(a); }
  Tensor relu_mask(const Tensor& g, const Tensor& x) const { return kernels::relu_mask(g, x); }
  Tensor sign_mask(const Tensor& g, const Tensor& x) const { return kernels::sign_mask(g, x); }
  Tensor reciprocal(const Tensor& a) const { return kernels::reciprocal(a); }
  Tensor reduce_last(const Tensor& a) const { return kernels::reduce_last(a); }
  Tensor expand_last(const Tensor& a, std::size_t n) const { return kernels::expand_last(a, n); }
  Tensor reduce_first(const Tensor& a) const { return kernels::reduce_first(a); }
  Tensor expand_first(const Tensor& a, std::size_t n) const { return kernels::expand_first(a, n); }
  Tensor expand_scalar(const Tensor& a, const Shape& s) const { return kernels::expand_scalar(a, s); }
  Tensor take(const Tensor& a, const std::shared_ptr<const std::vector<std::size_t>>& idx,
              const Shape& s) const {
    return kernels::take(a, *idx, s);
  }
  Tensor scatter_add(const Tensor& a, const std::shared_ptr<const std::vector<std::size_t>>& idx,
                     const Shape& s) const {
    return kernels::scatter_add(a, *idx, s);
  }
};

struct RecordingAlgebra {
  using Value = Var;
  Graph& graph;

  Var parent(const NodeAttrs& at, int k) const { return graph.handle(at.parents[k]); }
  Var self(NodeIndex id) const { return graph.handle(id); }

  Var add(Var a, Var b) const { return graph.add(a, b); }
  Var sub(Var a, Var b) const { return graph.sub(a, b); }
  Var mul(Var a, Var b) const { return graph.mul(a, b); }
  Var scale(Var a, double c) const { return graph.scale(a, c); }
  Var scale_shift(Var a, double al, double be) const { return graph.scale_shift(a, al, be); }
  Var matmul(Var a, Var b, bool ta, bool tb) const { return graph.matmul(a, b, ta, tb); }
  Var square(Var a) const { return graph.square(a); }
  Var sum(Var a) const { return graph.sum(a); }
  Var sigmoid(Var a) const { return graph.sigmoid(a); }
  Var softmax(Var a) const { return graph.softmax(a); }
  Var logsumexp(Var a) const { return graph.logsumexp(a); }
  Var relu_mask(Var g, Var x) const { return graph.relu_mask(g, x); }
  Var sign_mask(Var g, Var x) const { return graph.sign_mask(g, x); }
  Var reciprocal(Var a) const { return graph.reciprocal(a); }
  Var reduce_last(Var a) const { return graph.reduce_last(a); }
  Var expand_last(Var a, std::size_t n) const { return graph.expand_last(a, n); }
  Var reduce_first(Var a) const { return graph.reduce_first(a); }
  Var expand_first(Var a, std::size_t n) const { return graph.expand_first(a, n); }
  Var expand_scalar(Var a, const Shape& s) const { return graph.expand_scalar(a, s); }
  Var take(Var a, const std::shared_ptr<const std::vector<std::size_t>>& idx,
           const Shape& s) const {
    return graph.take(a, idx, s);
  }
  Var scatter_add(Var a, const std::shared_ptr<const std::vector<std::size_t>>& idx,
                  const Shape& s) const {
    return graph.scatter_add(a, idx, s);
  }
};

const Shape& parent_shape(const Graph& g, const NodeAttrs& at, int k) {
  return g.node(at.parents[k]).value.shape();
}

/// Emits the adjoint contribution of node `id` to each wanted parent.
template <class A, class Emit>
void propagate(A& alg, const Graph& graph, NodeIndex id, const NodeAttrs& at,
               const typename A::Value& g, const std::array<bool, 3>& want,
               Emit&& emit) {
  switch (at.op) {
    case Op::Variable:
    case Op::Constant:
      return;
    case Op::Add:
      if (want[0]) emit(0, typename A::Value(g));
      if (want[1]) emit(1, typename A::Value(g));
      return;
    case Op::Sub:
      if (want[0]) emit(0, typename A::Value(g));
      if (want[1]) emit(1, alg.scale(g, -1.0));
      return;
    case Op::Mul:
      if (want[0]) emit(0, alg.mul(g, alg.parent(at, 1)));
      if (want[1]) emit(1, alg.mul(g, alg.parent(at, 0)));
      return;
    case Op::Scale:
    case Op::ScaleShift:
      if (want[0]) emit(0, alg.scale(g, at.alpha));
      return;
    case Op::MatMul: {
      auto&& a = alg.parent(at, 0);
      auto&& b = alg.parent(at, 1);
      const bool ta = at.trans_a;
      const bool tb = at.trans_b;
      if (want[0]) {
        if (!ta) emit(0, alg.matmul(g, b, false, !tb));
        else emit(0, alg.matmul(b, g, tb, true));
      }
      if (want[1]) {
        if (!tb) emit(1, alg.matmul(a, g, !ta, false));
        else emit(1, alg.matmul(g, a, true, ta));
      }
      return;
    }
    case Op::Affine:
      if (want[0]) emit(0, alg.matmul(g, alg.parent(at, 1), false, false));
      if (want[1]) emit(1, alg.matmul(g, alg.parent(at, 0), true, false));
      if (want[2]) emit(2, alg.reduce_first(g));
      return;
    case Op::Relu:
      if (want[0]) emit(0, alg.relu_mask(g, alg.parent(at, 0)));
      return;
    case Op::ReluMask:
      // d/dx of a step mask is zero almost everywhere.
      if (want[0]) emit(0, alg.relu_mask(g, alg.parent(at, 1)));
      return;
    case Op::SignMask:
      if (want[0]) emit(0, alg.sign_mask(g, alg.parent(at, 1)));
      return;
    case Op::Abs:
      if (want[0]) emit(0, alg.sign_mask(g, alg.parent(at, 0)));
      return;
    case Op::Softplus:
      if (want[0]) emit(0, alg.mul(g, alg.sigmoid(alg.parent(at, 0))));
      return;
    case Op::Sigmoid: {
      if (!want[0]) return;
      auto&& s = alg.self(id);
      emit(0, alg.mul(g, alg.mul(s, alg.scale_shift(s, -1.0, 1.0))));
      return;
    }
    case Op::Square:
      if (want[0]) emit(0, alg.mul(g, alg.scale(alg.parent(at, 0), 2.0)));
      return;
    case Op::Sum:
      if (want[0]) emit(0, alg.expand_scalar(g, parent_shape(graph, at, 0)));
      return;
    case Op::Mean: {
      if (!want[0]) return;
      const Shape& s = parent_shape(graph, at, 0);
      emit(0, alg.scale(alg.expand_scalar(g, s), 1.0 / static_cast<double>(numel(s))));
      return;
    }
    case Op::Inner: {
      auto e = alg.expand_scalar(g, parent_shape(graph, at, 0));
      if (want[0]) emit(0, alg.mul(e, alg.parent(at, 1)));
      if (want[1]) emit(1, alg.mul(e, alg.parent(at, 0)));
      return;
    }
    case Op::LogSumExp: {
      if (!want[0]) return;
      const std::size_t n = parent_shape(graph, at, 0).back();
      emit(0, alg.mul(alg.expand_last(g, n), alg.softmax(alg.parent(at, 0))));
      return;
    }
    case Op::Softmax: {
      if (!want[0]) return;
      auto&& y = alg.self(id);
      const std::size_t n = graph.node(id).value.shape().back();
      auto dot = alg.expand_last(alg.reduce_last(alg.mul(g, y)), n);
      emit(0, alg.mul(y, alg.sub(g, dot)));
      return;
    }
    case Op::CrossEntropy: {
      auto&& z = alg.parent(at, 0);
      auto&& t = alg.parent(at, 1);
      const std::size_t n = parent_shape(graph, at, 0).back();
      auto ge = alg.expand_last(g, n);
      if (want[0]) {
        auto mass = alg.expand_last(alg.reduce_last(t), n);
        emit(0, alg.mul(ge, alg.sub(alg.mul(mass, alg.softmax(z)), t)));
      }
      if (want[1]) {
        auto lse = alg.expand_last(alg.logsumexp(z), n);
        emit(1, alg.mul(ge, alg.sub(lse, z)));
      }
      return;
    }
    case Op::L2Norm: {
      if (!want[0]) return;
      const std::size_t n = parent_shape(graph, at, 0).back();
      auto inv = alg.reciprocal(alg.self(id));
      emit(0, alg.mul(alg.parent(at, 0), alg.expand_last(alg.mul(g, inv), n)));
      return;
    }
    case Op::Reciprocal: {
      if (!want[0]) return;
      auto&& r = alg.self(id);
      emit(0, alg.scale(alg.mul(g, alg.square(r)), -1.0));
      return;
    }
    case Op::ReduceLast:
      if (want[0]) emit(0, alg.expand_last(g, parent_shape(graph, at, 0).back()));
      return;
    case Op::ExpandLast:
      if (want[0]) emit(0, alg.reduce_last(g));
      return;
    case Op::ReduceFirst:
      if (want[0]) emit(0, alg.expand_first(g, parent_shape(graph, at, 0).front()));
      return;
    case Op::ExpandFirst:
      if (want[0]) emit(0, alg.reduce_first(g));
      return;
    case Op::ExpandScalar:
      if (want[0]) emit(0, alg.sum(g));
      return;
    case Op::Take:
      if (want[0]) emit(0, alg.scatter_add(g, at.index, parent_shape(graph, at, 0)));
      return;
    case Op::ScatterAdd:
      if (want[0]) emit(0, alg.take(g, at.index, parent_shape(graph, at, 0)));
      return;
  }
}

}  // namespace

GradMap Graph::backward(Var output, std::span<const Var> wrt, bool record) {
  check_owned(output);
  for (Var v : wrt) check_owned(v);
  if (value(output).size() != 1) {
    throw ContractError("backward needs a scalar output, got shape " +
                        to_string(value(output).shape()));
  }
  const NodeIndex out = output.id();

  std::vector<char> is_wrt(out + 1, 0);
  for (Var v : wrt) {
    if (v.id() <= out) is_wrt[v.id()] = 1;
  }
  // reach[i]: some requested variable lies at or below node i.
  std::vector<char> reach(out + 1, 0);
  for (NodeIndex i = 0; i <= out; ++i) {
    if (is_wrt[i]) {
      reach[i] = 1;
      continue;
    }
    const NodeAttrs& at = nodes_[i].attrs;
    for (std::uint8_t k = 0; k < at.arity; ++k) {
      if (reach[at.parents[k]]) {
        reach[i] = 1;
        break;
      }
    }
  }

  GradMap result;
  result.recorded_ = record;

  auto run = [&](auto& alg) {
    using Value = typename std::decay_t<decltype(alg)>::Value;
    std::vector<std::optional<Value>> adj(out + 1);
    const Shape& out_shape = value(output).shape();
    if constexpr (std::is_same_v<Value, Tensor>) {
      adj[out] = Tensor(out_shape, 1.0);
    } else {
      adj[out] = constant(Tensor(out_shape, 1.0));
    }
    for (NodeIndex i = out + 1; i-- > 0;) {
      if (!reach[i] || !adj[i]) continue;
      // Copy: recording appends to nodes_ and may reallocate it.
      const NodeAttrs at = nodes_[i].attrs;
      std::array<bool, 3> want{};
      bool any = false;
      for (std::uint8_t k = 0; k < at.arity; ++k) {
        want[k] = reach[at.parents[k]] != 0;
        any = any || want[k];
      }
      if (any) {
        const Value g = *adj[i];
        propagate(alg, *this, i, at, g, want, [&](int k, Value contrib) {
          auto& slot = adj[at.parents[k]];
          if (!slot) {
            slot = std::move(contrib);
          } else if constexpr (std::is_same_v<Value, Tensor>) {
            kernels::add_inplace(*slot, contrib);
          } else {
            slot = add(*slot, contrib);
          }
        });
      }
      if (!is_wrt[i]) adj[i].reset();
    }
    for (Var v : wrt) {
      const NodeIndex id = v.id();
      if (id <= out && adj[id]) {
        if constexpr (std::is_same_v<Value, Tensor>) {
          result.values_[id] = *adj[id];
        } else {
          result.values_[id] = value(*adj[id]);
          result.nodes_[id] = *adj[id];
        }
      } else {
        Tensor zero(value(v).shape(), 0.0);
        if constexpr (std::is_same_v<Value, Var>) {
          result.nodes_[id] = constant(zero);
        }
        result.values_[id] = std::move(zero);
      }
    }
  };

  if (record) {
    RecordingAlgebra alg{*this};
    run(alg);
  } else {
    EagerAlgebra alg{*this};
    run(alg);
  }
  return result;
}

}  // namespace otjr::ad
