#include "otjr/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <random>

#include "otjr/errors.hpp"
#include "otjr/kernels.hpp"
#include "otjr/seed.hpp"

namespace otjr {

ProjectionSet sample_projections(std::size_t K, std::size_t C, std::uint64_t seed) {
  if (K < 1 || C < 1) throw ContractError("sample_projections needs K >= 1 and C >= 1");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Tensor v(Shape{K, C});
  for (std::size_t k = 0; k < K; ++k) {
    auto row = v.row(k);
    double n2 = 0.0;
    do {
      n2 = 0.0;
      for (double& x : row) {
        x = gauss(rng);
        n2 += x * x;
      }
    } while (std::sqrt(n2) < 1e-12);
    const double n = std::sqrt(n2);
    for (double& x : row) x /= n;
  }
  return {std::move(v), seed};
}

ProjectionSet make_projections(Tensor directions) {
  if (directions.rank() != 2) throw ContractError("projections must be a (K, C) matrix");
  for (std::size_t k = 0; k < directions.rows(); ++k) {
    double n2 = 0.0;
    for (double x : directions.row(k)) n2 += x * x;
    if (std::abs(std::sqrt(n2) - 1.0) > 1e-12) throw ContractError("projection is not a unit vector");
  }
  return {std::move(directions), 0};
}

std::vector<std::size_t> sort_permutation(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  return idx;
}

namespace {

void check_pair(const Tensor& mu, const Tensor& nu) {
  if (mu.rank() != 2 || nu.rank() != 2 || mu.shape() != nu.shape() || mu.rows() == 0) {
    throw ContractError("transport needs two non-empty batches of equal shape, got " +
                        to_string(mu.shape()) + " and " + to_string(nu.shape()));
  }
}

void check_projections(const Tensor& mu, const ProjectionSet& P) {
  if (P.dim() != mu.cols()) {
    throw ContractError("projection dimension " + std::to_string(P.dim()) +
                        " does not match batch dimension " + std::to_string(mu.cols()));
  }
}

}  // namespace

SlicedPlan sliced_plan(const Tensor& mu, const Tensor& nu, const ProjectionSet& P) {
  check_pair(mu, nu);
  check_projections(mu, P);
  SlicedPlan s;
  s.proj_mu = kernels::matmul(P.directions, mu, false, true);
  s.proj_nu = kernels::matmul(P.directions, nu, false, true);
  const std::size_t K = P.count(), B = mu.rows();
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    auto a = s.proj_mu.row(k);
    auto b = s.proj_nu.row(k);
    s.order_mu.push_back(sort_permutation(a));
    s.order_nu.push_back(sort_permutation(b));
    double w = 0.0;
    for (std::size_t i = 0; i < B; ++i) w += std::abs(a[s.order_mu[k][i]] - b[s.order_nu[k][i]]);
    w /= static_cast<double>(B);
    s.per_projection.push_back(w);
    total += w;
  }
  s.value = total / static_cast<double>(K);
  return s;
}

double sliced_w1(const Tensor& mu, const Tensor& nu, const ProjectionSet& P) {
  return sliced_plan(mu, nu, P).value;
}

ad::Var sliced_w1(ad::Var mu, ad::Var nu, const ProjectionSet& P) {
  const SlicedPlan plan = sliced_plan(mu.value(), nu.value(), P);
  const std::size_t K = P.count(), B = mu.value().rows();
  ad::Graph& g = mu.graph();
  ad::Var v = g.constant(P.directions);
  // (B, K) projections; entry (i, k) sits at i*K + k.
  ad::Var pm = g.matmul(mu, v, false, true);
  ad::Var pn = g.matmul(nu, v, false, true);
  auto im = std::make_shared<std::vector<std::size_t>>(K * B);
  auto in = std::make_shared<std::vector<std::size_t>>(K * B);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < B; ++i) {
      (*im)[k * B + i] = plan.order_mu[k][i] * K + k;
      (*in)[k * B + i] = plan.order_nu[k][i] * K + k;
    }
  }
  ad::Var sm = g.take(pm, im, Shape{K, B});
  ad::Var sn = g.take(pn, in, Shape{K, B});
  return ad::mean(ad::abs(sm - sn));
}

Movements movements(const Tensor& mu, const Tensor& nu, const ProjectionSet& P) {
  const SlicedPlan plan = sliced_plan(mu, nu, P);
  const std::size_t K = P.count(), B = mu.rows(), C = mu.cols();
  Movements m;
  m.sums = Tensor(Shape{B, C}, 0.0);
  std::vector<std::size_t> rank(B);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t r = 0; r < B; ++r) rank[plan.order_mu[k][r]] = r;
    Tensor mk(Shape{B, C}, 0.0);
    auto dir = P.directions.row(k);
    for (std::size_t i = 0; i < B; ++i) {
      const std::size_t partner = plan.order_nu[k][rank[i]];
      const double shift = plan.proj_nu.at(k, partner) - plan.proj_mu.at(k, i);
      for (std::size_t c = 0; c < C; ++c) mk.at(i, c) = shift * dir[c];
    }
    kernels::add_inplace(m.sums, mk);
    m.per_projection.push_back(std::move(mk));
  }
  return m;
}

TrajectorySet trajectories(const Tensor& sums, double floor) {
  TrajectorySet t;
  t.sums = sums;
  t.sigma = Tensor(sums.shape(), 0.0);
  t.degenerate.assign(sums.rows(), 0);
  for (std::size_t i = 0; i < sums.rows(); ++i) {
    auto s = sums.row(i);
    double n2 = 0.0;
    for (double x : s) n2 += x * x;
    const double n = std::sqrt(n2);
    if (n < floor) {
      t.degenerate[i] = 1;
      continue;
    }
    auto out = t.sigma.row(i);
    for (std::size_t c = 0; c < s.size(); ++c) out[c] = s[c] / n;
  }
  return t;
}

double exact_w1_1d(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw ContractError("exact_w1_1d needs equal, non-empty inputs");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double w = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) w += std::abs(x[i] - y[i]);
  return w / static_cast<double>(x.size());
}

namespace {

Tensor euclidean_costs(const Tensor& mu, const Tensor& nu) {
  const std::size_t B = mu.rows();
  Tensor c(Shape{B, B});
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t j = 0; j < B; ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < mu.cols(); ++k) {
        const double d = mu.at(i, k) - nu.at(j, k);
        d2 += d * d;
      }
      c.at(i, j) = std::sqrt(d2);
    }
  }
  return c;
}

}  // namespace

double brute_force_ot(const Tensor& mu, const Tensor& nu) {
  check_pair(mu, nu);
  const std::size_t B = mu.rows();
  if (B > kBruteForceMax) {
    throw ContractError("brute_force_ot supports at most " + std::to_string(kBruteForceMax) +
                        " samples, got " + std::to_string(B));
  }
  const Tensor c = euclidean_costs(mu, nu);
  std::vector<std::size_t> perm(B);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < B; ++i) s += c.at(i, perm[i]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(B);
}

SinkhornResult sinkhorn(const Tensor& mu, const Tensor& nu, double lambda,
                        std::size_t max_iterations, double tolerance) {
  check_pair(mu, nu);
  if (!(lambda > 0.0)) throw ContractError("sinkhorn needs a positive entropy weight");
  const std::size_t B = mu.rows();
  const Tensor c = euclidean_costs(mu, nu);
  const double log_w = -std::log(static_cast<double>(B));
  std::vector<double> f(B, 0.0), g(B, 0.0), buf(B);

  auto lse = [&](auto&& term) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < B; ++j) {
      buf[j] = term(j);
      m = std::max(m, buf[j]);
    }
    double s = 0.0;
    for (std::size_t j = 0; j < B; ++j) s += std::exp(buf[j] - m);
    return m + std::log(s);
  };
  auto row_error = [&](double eps) {
    double err = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < B; ++j) row += std::exp((f[i] + g[j] - c.at(i, j)) / eps);
      err += std::abs(row - 1.0 / static_cast<double>(B));
    }
    return err;
  };

  double cmax = 0.0;
  for (double v : c.values()) cmax = std::max(cmax, v);
  double eps = std::max(lambda, cmax);

  SinkhornResult r;
  while (true) {
    const bool last = eps <= lambda;
    for (std::size_t it = 0; it < max_iterations; ++it) {
      for (std::size_t i = 0; i < B; ++i) {
        f[i] = eps * log_w - eps * lse([&](std::size_t j) { return (g[j] - c.at(i, j)) / eps; });
      }
      for (std::size_t j = 0; j < B; ++j) {
        g[j] = eps * log_w - eps * lse([&](std::size_t i) { return (f[i] - c.at(i, j)) / eps; });
      }
      ++r.iterations;
      if ((it % 10 == 9 || last) && row_error(eps) < tolerance) break;
    }
    if (last) break;
    eps = std::max(lambda, eps * 0.5);
  }

  r.marginal_error = row_error(lambda);
  r.converged = r.marginal_error < tolerance;
  r.plan = Tensor(Shape{B, B});
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t j = 0; j < B; ++j) {
      const double p = std::exp((f[i] + g[j] - c.at(i, j)) / lambda);
      r.plan.at(i, j) = p;
      r.cost += p * c.at(i, j);
    }
  }
  return r;
}

}  // namespace otjr
