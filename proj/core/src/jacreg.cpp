#include "otjr/jacreg.hpp"

#include <algorithm>

#include "otjr/errors.hpp"
#include "otjr/kernels.hpp"
#include "otjr/transport.hpp"

namespace otjr {

Network network(const Params& p) {
  return [p](ad::Var x) { return forward(bind(x.graph(), p, false), x).logits(); };
}

Network network(const BoundParams& p) {
  return [p](ad::Var x) { return forward(p, x).logits(); };
}

namespace {

Tensor as_row(const Tensor& x) {
  if (x.rank() == 1) return x.reshaped(Shape{1, x.size()});
  if (x.rank() == 2 && x.rows() == 1) return x;
  throw ContractError("expected a single sample, got shape " + to_string(x.shape()));
}

}  // namespace

Tensor full_jacobian(const Network& f, const Tensor& x) {
  ad::Graph g;
  ad::Var xv = g.variable(as_row(x));
  ad::Var z = f(xv);
  const std::size_t C = z.value().cols(), I = xv.value().cols();
  Tensor J(Shape{C, I});
  const ad::Var wrt[] = {xv};
  for (std::size_t c = 0; c < C; ++c) {
    Tensor e(Shape{1, C}, 0.0);
    e[c] = 1.0;
    const Tensor row = g.backward(ad::inner(z, g.constant(std::move(e))), wrt)[xv];
    std::copy(row.values().begin(), row.values().end(), J.row(c).begin());
  }
  if (!J.all_finite()) throw NumericError("full_jacobian: non-finite entry");
  return J;
}

double frobenius_sq(const Tensor& m) {
  double s = 0.0;
  for (double v : m.values()) s += v * v;
  return s;
}

JacobianEstimate frob_estimate_random(const Network& f, const Tensor& x, std::size_t n_proj,
                                      std::uint64_t seed, std::size_t chunk) {
  if (n_proj < 1) throw ContractError("frob_estimate_random needs n_proj >= 1");
  const Tensor row = as_row(x);
  const std::size_t I = row.cols();
  std::size_t C = 0;
  {
    ad::Graph g;
    C = f(g.constant(row)).value().cols();
  }
  JacobianEstimate est;
  est.projections = sample_projections(n_proj, C, seed).directions;
  est.terms.reserve(n_proj);
  double total = 0.0;
  for (std::size_t first = 0; first < n_proj; first += chunk) {
    const std::size_t n = std::min(chunk, n_proj - first);
    Tensor xs(Shape{n, I});
    for (std::size_t r = 0; r < n; ++r) std::copy(row.values().begin(), row.values().end(), xs.row(r).begin());
    ad::Graph g;
    ad::Var xv = g.variable(std::move(xs));
    ad::Var z = f(xv);
    ad::Var s = ad::inner(z, g.constant(slice_rows(est.projections, first, n)));
    const ad::Var wrt[] = {xv};
    const Tensor grad = g.backward(s, wrt)[xv];
    for (std::size_t r = 0; r < n; ++r) {
      double q = 0.0;
      for (double v : grad.row(r)) q += v * v;
      const double term = static_cast<double>(C) * q;
      est.terms.push_back(term);
      total += term;
    }
  }
  est.value = total / static_cast<double>(n_proj);
  return est;
}

ad::Var jr_penalty(ad::Var x, ad::Var z, const Tensor& sigma) {
  ad::Graph& g = x.graph();
  if (sigma.shape() != z.value().shape()) {
    throw ContractError("jr_penalty: direction shape " + to_string(sigma.shape()) +
                        " does not match outputs " + to_string(z.value().shape()));
  }
  ad::Var s = ad::inner(z, g.constant(sigma));
  const ad::Var wrt[] = {x};
  ad::Var gx = g.backward(s, wrt, /*record=*/true).node(x);
  ad::Var per_sample = g.reduce_last(ad::square(gx));
  if (!per_sample.value().all_finite()) throw NumericError("jr_penalty: non-finite gradient");
  return ad::mean(per_sample);
}

ad::Var jr_term(const Network& f, ad::Graph& g, const Tensor& x, const Tensor& sigma) {
  ad::Var xv = g.variable(as_row(x));
  ad::Var z = f(xv);
  return jr_penalty(xv, z, as_row(sigma));
}

}  // namespace otjr
