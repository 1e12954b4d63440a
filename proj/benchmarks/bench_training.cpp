#include <benchmark/benchmark.h>

#include "otjr/attacks.hpp"
#include "otjr/jacreg.hpp"
#include "otjr/training.hpp"
#include "support/helpers.hpp"

using namespace otjr;
using otjr::testing::random_labels;
using otjr::testing::random_tensor;

namespace {

const Params& mnist_mlp() {
  static const Params p = init(MLPSpec{{784, 256, 128, 10}, Activation::Relu, 0});
  return p;
}

TrainConfig config(LossVariant v) {
  TrainConfig c;
  c.loss.variant = v;
  c.loss.lambda_j = 0.001;
  c.loss.lambda_sw = 0.1;
  c.attack.epsilon = 0.1;
  c.attack.step = 0.025;
  c.attack.iterations = 10;
  return c;
}

}  // namespace

static void BM_Pgd(benchmark::State& state) {
  const auto B = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor({B, 784}, 1, 0.0, 1.0);
  const auto y = random_labels(B, 10, 2);
  AttackConfig cfg;
  cfg.iterations = 10;
  for (auto _ : state) benchmark::DoNotOptimize(pgd(mnist_mlp(), x, y, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(B));
}
BENCHMARK(BM_Pgd)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_JrPenaltyDoubleBackprop(benchmark::State& state) {
  const Tensor x = random_tensor({128, 784}, 1, 0.0, 1.0);
  const Tensor sigma = otjr::testing::gaussian_tensor({128, 10}, 2);
  for (auto _ : state) {
    ad::Graph g;
    FlatBinding fb = bind_flat(g, mnist_mlp());
    ad::Var xv = g.variable(x);
    ad::Var jr = jr_penalty(xv, forward(fb.params, xv).logits(), sigma);
    const ad::Var wrt[] = {fb.flat};
    benchmark::DoNotOptimize(g.backward(jr, wrt)[fb.flat]);
  }
}
BENCHMARK(BM_JrPenaltyDoubleBackprop)->Unit(benchmark::kMillisecond);

static void BM_BatchGradient(benchmark::State& state) {
  const auto v = static_cast<LossVariant>(state.range(0));
  const TrainConfig c = config(v);
  const BatchInputs b = prepare_batch(mnist_mlp(), random_tensor({128, 784}, 1, 0.0, 1.0),
                                      random_labels(128, 10, 2), c, 3);
  state.SetLabel(to_string(v));
  for (auto _ : state) benchmark::DoNotOptimize(batch_gradient(mnist_mlp(), b, c.loss).loss);
}
BENCHMARK(BM_BatchGradient)
    ->Arg(static_cast<int>(LossVariant::XE))
    ->Arg(static_cast<int>(LossVariant::PGD_AT))
    ->Arg(static_cast<int>(LossVariant::SW_ONLY))
    ->Arg(static_cast<int>(LossVariant::OTJR))
    ->Unit(benchmark::kMillisecond);

static void BM_FrobeniusEstimate(benchmark::State& state) {
  const Params p = init(MLPSpec{{8, 32, 5}, Activation::Softplus, 1});
  const Tensor x = random_tensor({8}, 2);
  const Network f = network(p);
  for (auto _ : state) benchmark::DoNotOptimize(frob_estimate_random(f, x, 10000, 3).value);
}
BENCHMARK(BM_FrobeniusEstimate)->Unit(benchmark::kMillisecond);
