#include <benchmark/benchmark.h>

#include "otjr/transport.hpp"
#include "support/helpers.hpp"

using namespace otjr;
using otjr::testing::gaussian_tensor;

static void BM_SlicedW1(benchmark::State& state) {
  const auto B = static_cast<std::size_t>(state.range(0));
  const auto K = static_cast<std::size_t>(state.range(1));
  const Tensor mu = gaussian_tensor({B, 10}, 1), nu = gaussian_tensor({B, 10}, 2);
  const ProjectionSet P = sample_projections(K, 10, 3);
  for (auto _ : state) benchmark::DoNotOptimize(sliced_w1(mu, nu, P));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(B * K));
}
BENCHMARK(BM_SlicedW1)->Args({128, 32})->Args({128, 256})->Args({1024, 32});

static void BM_Movements(benchmark::State& state) {
  const auto B = static_cast<std::size_t>(state.range(0));
  const Tensor mu = gaussian_tensor({B, 10}, 1), nu = gaussian_tensor({B, 10}, 2);
  const ProjectionSet P = sample_projections(32, 10, 3);
  for (auto _ : state) {
    Movements m = movements(mu, nu, P);
    benchmark::DoNotOptimize(trajectories(m.sums).sigma);
  }
}
BENCHMARK(BM_Movements)->Arg(128)->Arg(1024);

static void BM_SlicedW1Graph(benchmark::State& state) {
  const Tensor mu = gaussian_tensor({128, 10}, 1), nu = gaussian_tensor({128, 10}, 2);
  const ProjectionSet P = sample_projections(32, 10, 3);
  for (auto _ : state) {
    ad::Graph g;
    ad::Var a = g.variable(mu), b = g.variable(nu);
    const ad::Var wrt[] = {a, b};
    benchmark::DoNotOptimize(g.backward(sliced_w1(a, b, P), wrt)[a]);
  }
}
BENCHMARK(BM_SlicedW1Graph);

static void BM_BruteForceOT(benchmark::State& state) {
  const auto B = static_cast<std::size_t>(state.range(0));
  const Tensor mu = gaussian_tensor({B, 3}, 1), nu = gaussian_tensor({B, 3}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(brute_force_ot(mu, nu));
}
BENCHMARK(BM_BruteForceOT)->DenseRange(4, 8, 2);

static void BM_Sinkhorn(benchmark::State& state) {
  const Tensor mu = gaussian_tensor({6, 3}, 1), nu = gaussian_tensor({6, 3}, 2);
  const double lambda = 1.0 / static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sinkhorn(mu, nu, lambda).cost);
}
BENCHMARK(BM_Sinkhorn)->Arg(10)->Arg(1000);
