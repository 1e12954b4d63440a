#pragma once

// Sliced 1-Wasserstein distance between two equal-size point batches, the
// per-sample movements it induces, and exact / entropic OT references.

#include <cstdint>
#include <span>
#include <vector>

#include "otjr/autodiff.hpp"
#include "otjr/tensor.hpp"

namespace otjr {

struct ProjectionSet {
  Tensor directions;  // (K, C), unit rows
  std::uint64_t seed = 0;

  std::size_t count() const { return directions.rows(); }
  std::size_t dim() const { return directions.cols(); }
};

/// K directions uniform on the unit sphere of R^C.
ProjectionSet sample_projections(std::size_t K, std::size_t C, std::uint64_t seed);
ProjectionSet make_projections(Tensor directions);

/// Ascending order of `values`, ties broken by index.
std::vector<std::size_t> sort_permutation(std::span<const double> values);

struct SlicedPlan {
  Tensor proj_mu;  // (K, B)
  Tensor proj_nu;  // (K, B)
  std::vector<std::vector<std::size_t>> order_mu;  // per projection
  std::vector<std::vector<std::size_t>> order_nu;
  std::vector<double> per_projection;  // 1-D W1 on each direction
  double value = 0.0;
};

SlicedPlan sliced_plan(const Tensor& mu, const Tensor& nu, const ProjectionSet& P);
double sliced_w1(const Tensor& mu, const Tensor& nu, const ProjectionSet& P);
/// Differentiable form: sorting orders are fixed at the current values and
/// gradients reach both batches.
ad::Var sliced_w1(ad::Var mu, ad::Var nu, const ProjectionSet& P);

struct Movements {
  std::vector<Tensor> per_projection;  // K tensors of shape (B, C)
  Tensor sums;                         // (B, C), summed over projections
};
/// Displacement of every mu sample towards its rank partner in nu, lifted
/// back along each projection direction.
Movements movements(const Tensor& mu, const Tensor& nu, const ProjectionSet& P);

struct TrajectorySet {
  Tensor sigma;  // (B, C), unit rows or zero
  Tensor sums;
  std::vector<char> degenerate;
};
inline constexpr double kTrajectoryFloor = 1e-10;
TrajectorySet trajectories(const Tensor& sums, double floor = kTrajectoryFloor);

double exact_w1_1d(std::span<const double> a, std::span<const double> b);
/// Exact W1 between equal-mass empirical measures by enumerating assignments.
double brute_force_ot(const Tensor& mu, const Tensor& nu);
inline constexpr std::size_t kBruteForceMax = 8;

struct SinkhornResult {
  double cost = 0.0;  // <plan, C>, no entropy term
  bool converged = false;
  std::size_t iterations = 0;
  double marginal_error = 0.0;
  Tensor plan;
};

/// Entropic OT with Euclidean ground cost, log-domain updates and a
/// geometric schedule on the regularisation down to `lambda`.
SinkhornResult sinkhorn(const Tensor& mu, const Tensor& nu, double lambda,
                        std::size_t max_iterations = 20000, double tolerance = 1e-9);

}  // namespace otjr
