#pragma once

// Input-output Jacobian quantities: the exact matrix, the random-projection
// Frobenius estimator and the direction-guided penalty used in training.

#include <cstdint>
#include <functional>
#include <vector>

#include "otjr/autodiff.hpp"
#include "otjr/models.hpp"

namespace otjr {

/// Maps a (B, I) input node to (B, C) outputs on the input's graph.
using Network = std::function<ad::Var(ad::Var x)>;

/// Binds `p` as constants on whichever graph the input lives on.
Network network(const Params& p);
/// Uses parameters already on a graph; inputs must live on that graph.
Network network(const BoundParams& p);

/// (C, I) Jacobian of the network at a single input (shape (I) or (1, I)).
Tensor full_jacobian(const Network& f, const Tensor& x);
double frobenius_sq(const Tensor& m);

struct JacobianEstimate {
  double value = 0.0;
  Tensor projections;         // (n_proj, C)
  std::vector<double> terms;  // C * [d(v_j . z)/dx]^2 per projection
};

/// (C / n_proj) * sum_j |d(v_j . z)/dx|^2 with v_j uniform on the sphere.
JacobianEstimate frob_estimate_random(const Network& f, const Tensor& x, std::size_t n_proj,
                                      std::uint64_t seed, std::size_t chunk = 8192);

/// Batch mean of |d(sigma_i . z_i)/dx_i|^2. `x` must be a variable on the
/// graph and `z` the network output at `x`; the gradient is recorded, so the
/// result can be differentiated again with respect to parameters.
ad::Var jr_penalty(ad::Var x, ad::Var z, const Tensor& sigma);

/// Single-sample penalty for a fixed direction, as a graph node.
ad::Var jr_term(const Network& f, ad::Graph& g, const Tensor& x, const Tensor& sigma);

}  // namespace otjr
