#pragma once

// Fully-connected classifiers with a flat parameter vector.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "otjr/autodiff.hpp"
#include "otjr/tensor.hpp"

namespace otjr {

enum class Activation { Relu, Softplus };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct MLPSpec {
  /// [inputs, hidden..., classes]
  std::vector<std::size_t> widths;
  Activation activation = Activation::Relu;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t inputs() const { return widths.front(); }
  std::size_t classes() const { return widths.back(); }
  std::size_t layers() const { return widths.size() - 1; }
  std::size_t param_count() const;

  friend bool operator==(const MLPSpec&, const MLPSpec&) = default;
};

/// One weight matrix (out, in) or bias vector (out) inside the flat vector.
struct BlockView {
  std::size_t offset = 0;
  Shape shape;
  std::size_t layer = 0;
  bool bias = false;

  std::size_t size() const { return numel(shape); }
  std::string name() const;
};

class Params {
 public:
  Params() = default;
  /// Zero-filled parameters laid out for `spec`.
  explicit Params(MLPSpec spec);

  const MLPSpec& spec() const { return spec_; }
  std::size_t size() const { return flat_.size(); }
  std::vector<double>& flat() { return flat_; }
  const std::vector<double>& flat() const { return flat_; }
  const std::vector<BlockView>& views() const { return views_; }

  std::span<double> block(std::size_t i);
  std::span<const double> block(std::size_t i) const;
  Tensor block_tensor(std::size_t i) const;

  friend bool operator==(const Params& a, const Params& b) {
    return a.spec_ == b.spec_ && a.flat_ == b.flat_;
  }

 private:
  MLPSpec spec_;
  std::vector<double> flat_;
  std::vector<BlockView> views_;
};

/// Glorot-uniform weights, zero biases; deterministic per spec.seed.
Params init(const MLPSpec& spec);

/// Parameter blocks placed on a graph, ordered [W0, b0, W1, b1, ...].
struct BoundParams {
  Activation activation = Activation::Relu;
  std::vector<ad::Var> blocks;
};

BoundParams bind(ad::Graph& g, const Params& p, bool trainable);

/// Binds the whole flat vector as one variable and slices the blocks out of
/// it, so a single gradient covers every parameter.
struct FlatBinding {
  ad::Var flat;
  BoundParams params;
};
FlatBinding bind_flat(ad::Graph& g, const Params& p);
/// Same, for a flat vector that is already a node on `g`.
BoundParams bind_from_flat(ad::Var flat, const MLPSpec& spec);

struct ForwardCache {
  std::vector<Tensor> pre;
  std::vector<Tensor> post;

  const Tensor& logits() const { return post.back(); }
  const Tensor& penultimate() const { return post[post.size() - 2]; }
};

struct GraphForward {
  std::vector<ad::Var> pre;
  std::vector<ad::Var> post;

  ad::Var logits() const { return post.back(); }
  ad::Var penultimate() const { return post[post.size() - 2]; }
};

ForwardCache forward(const Params& p, const Tensor& x);
GraphForward forward(const BoundParams& p, ad::Var x);

Tensor logits(const Params& p, const Tensor& x);
Tensor penultimate(const Params& p, const Tensor& x);
std::vector<int> predict(const Params& p, const Tensor& x);

}  // namespace otjr
