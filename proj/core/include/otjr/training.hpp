#pragma once

// Training objectives and the minibatch SGD loop.

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "otjr/attacks.hpp"
#include "otjr/data.hpp"
#include "otjr/models.hpp"
#include "otjr/transport.hpp"

namespace otjr {

enum class LossVariant {
  XE,
  PGD_AT,
  ALP,
  TRADES,
  RANDOM_JR,
  SW_ONLY,
  OTJR,
  OTJR_TRADES,
  OPTIMAL_JR,  // clean cross-entropy plus JR along transport trajectories
};

std::string to_string(LossVariant v);
LossVariant loss_variant_from_string(const std::string& s);

struct LossSpec {
  LossVariant variant = LossVariant::OTJR;
  double trades_lambda = 6.0;
  /// Use KL instead of soft-target cross-entropy for the TRADES term.
  bool trades_kl = false;
  double alp_alpha = 0.5;
  double alp_lambda = 0.5;
  double lambda_j = 0.005;
  double lambda_sw = 1.0;
  std::size_t K = 32;

  void validate() const;
  bool needs_adversarial() const;
  bool needs_projections() const;
};

/// Reference settings reported for the large-image experiments. They assume
/// an unnormalised sum over projections and are kept for the record only.
LossSpec published_preset_cifar10();
LossSpec published_preset_cifar100();

struct OptimizerConfig {
  double lr = 0.05;
  double momentum = 0.9;
  std::vector<std::size_t> decay_epochs;
  double decay_factor = 0.1;
  double weight_decay = 0.0;

  double lr_at(std::size_t epoch) const;
};

struct TrainSeeds {
  std::uint64_t init = 0;
  std::uint64_t shuffle = 1;
  std::uint64_t projection = 2;
  std::uint64_t attack = 3;
};

struct EvalConfig {
  AttackSpec attack;
  /// Evaluate every n-th epoch (the final epoch is always evaluated); 0 = only final.
  std::size_t every = 1;
  /// Number of evaluation rows used (0 = all).
  std::size_t samples = 0;
};

struct TrainConfig {
  LossSpec loss;
  AttackConfig attack;  // training-time generation
  OptimizerConfig optimizer;
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  TrainSeeds seeds;
  EvalConfig eval;

  void validate() const;
};

/// Everything a loss needs for one minibatch that is not a function of the
/// trainable parameters.
struct BatchInputs {
  Tensor x;
  std::vector<int> y;
  Tensor x_adv;                 // empty when the variant has no adversarial term
  ProjectionSet projections;    // transport variants
  Tensor random_directions;     // RANDOM_JR
  std::optional<Tensor> sigma;  // when set, overrides the trajectories computed from logits
};

BatchInputs prepare_batch(const Params& p, Tensor x, std::vector<int> y, const TrainConfig& cfg,
                          std::uint64_t batch_seed);

struct LossTerms {
  ad::Var total;
  /// Weighted components in summation order; they add up to `total`.
  std::vector<std::pair<std::string, ad::Var>> parts;
  Tensor sigma;  // trajectories used by the JR term, if any
};

LossTerms build_loss(ad::Graph& g, const BoundParams& bp, const BatchInputs& batch,
                     const LossSpec& spec);

/// Table-of-objectives form on given logits; JR variants are not expressible
/// here and raise a contract error.
ad::Var loss_baseline(const LossSpec& spec, ad::Var z, ad::Var z_adv, std::span<const int> y,
                      const ProjectionSet* projections = nullptr);

struct MetricsRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::vector<std::pair<std::string, double>> components;
  double clean_accuracy = std::numeric_limits<double>::quiet_NaN();
  double robust_accuracy = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
};

struct TrainResult {
  Params params;
  std::vector<MetricsRecord> history;
};

using EpochCallback = std::function<void(const MetricsRecord&)>;

TrainResult train(MLPSpec spec, const TrainConfig& cfg, const Dataset& train_set,
                  const Dataset* eval_set = nullptr, const EpochCallback& on_epoch = {});

/// Flat gradient of the batch loss with respect to every parameter.
struct BatchGradient {
  double loss = 0.0;
  std::vector<std::pair<std::string, double>> components;
  std::vector<double> grad;
};
BatchGradient batch_gradient(const Params& p, const BatchInputs& batch, const LossSpec& spec);

}  // namespace otjr
