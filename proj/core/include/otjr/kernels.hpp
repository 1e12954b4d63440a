#pragma once

// Value-level numeric kernels. The autodiff graph evaluates every primitive
// through these, and model/attack fast paths call them directly so both
// routes produce bit-identical values.

#include <cstddef>
#include <span>
#include <vector>

#include "otjr/tensor.hpp"

namespace otjr::kernels {

Tensor add(const Tensor& a, const Tensor& b);
void add_inplace(Tensor& acc, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
/// alpha * a + beta, elementwise.
Tensor scale_shift(const Tensor& a, double alpha, double beta);

/// op(a) * op(b) for rank-2 operands, op = transpose when the flag is set.
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false,
              bool trans_b = false);
/// x (B,I), w (O,I), b (O) -> x w^T + b.
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor relu(const Tensor& a);
/// g * 1[x > 0]
Tensor relu_mask(const Tensor& g, const Tensor& x);
/// g * sign(x), sign(0) = 0
Tensor sign_mask(const Tensor& g, const Tensor& x);
Tensor softplus(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor square(const Tensor& a);
Tensor abs(const Tensor& a);
/// 1/x with 1/0 defined as 0.
Tensor reciprocal(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor inner(const Tensor& a, const Tensor& b);

/// Reductions and broadcasts along the last axis: (..., n) <-> (...).
Tensor reduce_last(const Tensor& a);
Tensor expand_last(const Tensor& a, std::size_t n);
/// Reductions and broadcasts along the first axis: (B, ...) <-> (...).
Tensor reduce_first(const Tensor& a);
Tensor expand_first(const Tensor& a, std::size_t n);
Tensor expand_scalar(const Tensor& a, const Shape& shape);

Tensor logsumexp_last(const Tensor& a);
Tensor softmax_last(const Tensor& a);
/// Per-row sum(t) * logsumexp(z) - <t, z>.
Tensor cross_entropy_last(const Tensor& logits, const Tensor& targets);
Tensor l2norm_last(const Tensor& a);

Tensor take(const Tensor& a, std::span<const std::size_t> index,
            const Shape& out_shape);
Tensor scatter_add(const Tensor& g, std::span<const std::size_t> index,
                   const Shape& out_shape);

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Row-wise argmax (first maximum wins).
std::vector<int> argmax_rows(const Tensor& a);

}  // namespace otjr::kernels
