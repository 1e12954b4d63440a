#include "otjr/models.hpp"

#include <cmath>
#include <memory>
#include <numeric>
#include <random>

#include "otjr/errors.hpp"
#include "otjr/kernels.hpp"
#include "otjr/seed.hpp"

namespace otjr {

std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "softplus"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "softplus") return Activation::Softplus;
  throw ValidationError("unknown activation '" + s + "' (expected relu or softplus)");
}

void MLPSpec::validate() const {
  if (widths.size() < 3) {
    throw ValidationError("model needs at least one hidden layer (got " +
                          std::to_string(widths.size()) + " widths)");
  }
  for (std::size_t w : widths) {
    if (w < 1) throw ValidationError("layer widths must be >= 1");
  }
}

std::size_t MLPSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l] * widths[l + 1] + widths[l + 1];
  return n;
}

std::string BlockView::name() const {
  return (bias ? "b" : "W") + std::to_string(layer);
}

Params::Params(MLPSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec_.layers(); ++l) {
    const std::size_t in = spec_.widths[l];
    const std::size_t out = spec_.widths[l + 1];
    views_.push_back({off, {out, in}, l, false});
    off += out * in;
    views_.push_back({off, {out}, l, true});
    off += out;
  }
  flat_.assign(off, 0.0);
}

std::span<double> Params::block(std::size_t i) {
  const BlockView& v = views_.at(i);
  return std::span<double>(flat_).subspan(v.offset, v.size());
}

std::span<const double> Params::block(std::size_t i) const {
  const BlockView& v = views_.at(i);
  return std::span<const double>(flat_).subspan(v.offset, v.size());
}

Tensor Params::block_tensor(std::size_t i) const {
  auto b = block(i);
  return Tensor(views_.at(i).shape, std::vector<double>(b.begin(), b.end()));
}

Params init(const MLPSpec& spec) {
  Params p(spec);
  Rng rng(spec.seed);
  for (std::size_t i = 0; i < p.views().size(); ++i) {
    const BlockView& v = p.views()[i];
    if (v.bias) continue;
    const double fan_out = static_cast<double>(v.shape[0]);
    const double fan_in = static_cast<double>(v.shape[1]);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& w : p.block(i)) w = u(rng);
  }
  return p;
}

BoundParams bind(ad::Graph& g, const Params& p, bool trainable) {
  BoundParams b;
  b.activation = p.spec().activation;
  for (std::size_t i = 0; i < p.views().size(); ++i) {
    Tensor t = p.block_tensor(i);
    b.blocks.push_back(trainable ? g.variable(std::move(t)) : g.constant(std::move(t)));
  }
  return b;
}

BoundParams bind_from_flat(ad::Var flat, const MLPSpec& spec) {
  Params layout(spec);
  if (flat.value().size() != layout.size()) {
    throw ContractError("flat parameter vector has " + std::to_string(flat.value().size()) +
                        " entries, spec needs " + std::to_string(layout.size()));
  }
  BoundParams b;
  b.activation = spec.activation;
  ad::Graph& g = flat.graph();
  for (const BlockView& v : layout.views()) {
    auto idx = std::make_shared<std::vector<std::size_t>>(v.size());
    std::iota(idx->begin(), idx->end(), v.offset);
    b.blocks.push_back(g.take(flat, std::move(idx), v.shape));
  }
  return b;
}

FlatBinding bind_flat(ad::Graph& g, const Params& p) {
  ad::Var flat = g.variable(Tensor::vector(p.flat()));
  return {flat, bind_from_flat(flat, p.spec())};
}

namespace {

void check_input(const Tensor& x, std::size_t inputs) {
  if (x.rank() != 2 || x.cols() != inputs) {
    throw ContractError("model input must be (B, " + std::to_string(inputs) + "), got " +
                        to_string(x.shape()));
  }
}

}  // namespace

ForwardCache forward(const Params& p, const Tensor& x) {
  check_input(x, p.spec().inputs());
  ForwardCache c;
  const std::size_t L = p.spec().layers();
  const Tensor* h = &x;
  for (std::size_t l = 0; l < L; ++l) {
    c.pre.push_back(kernels::affine(*h, p.block_tensor(2 * l), p.block_tensor(2 * l + 1)));
    if (l + 1 == L) {
      c.post.push_back(c.pre.back());
    } else if (p.spec().activation == Activation::Relu) {
      c.post.push_back(kernels::relu(c.pre.back()));
    } else {
      c.post.push_back(kernels::softplus(c.pre.back()));
    }
    h = &c.post.back();
  }
  return c;
}

GraphForward forward(const BoundParams& p, ad::Var x) {
  const std::size_t L = p.blocks.size() / 2;
  const Tensor& w0 = p.blocks.front().value();
  if (x.value().rank() != 2 || x.value().cols() != w0.cols()) {
    throw ContractError("model input must be (B, " + std::to_string(w0.cols()) + "), got " +
                        to_string(x.value().shape()));
  }
  GraphForward c;
  ad::Var h = x;
  for (std::size_t l = 0; l < L; ++l) {
    c.pre.push_back(ad::affine(h, p.blocks[2 * l], p.blocks[2 * l + 1]));
    if (l + 1 == L) {
      c.post.push_back(c.pre.back());
    } else if (p.activation == Activation::Relu) {
      c.post.push_back(ad::relu(c.pre.back()));
    } else {
      c.post.push_back(ad::softplus(c.pre.back()));
    }
    h = c.post.back();
  }
  return c;
}

Tensor logits(const Params& p, const Tensor& x) { return forward(p, x).logits(); }

Tensor penultimate(const Params& p, const Tensor& x) { return forward(p, x).penultimate(); }

std::vector<int> predict(const Params& p, const Tensor& x) {
  return kernels::argmax_rows(logits(p, x));
}

}  // namespace otjr
