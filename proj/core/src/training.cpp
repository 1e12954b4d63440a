#include "otjr/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "otjr/errors.hpp"
#include "otjr/jacreg.hpp"
#include "otjr/kernels.hpp"
#include "otjr/seed.hpp"

namespace otjr {

namespace {

struct VariantName {
  LossVariant v;
  const char* name;
};

constexpr VariantName kVariantNames[] = {
    {LossVariant::XE, "XE"},           {LossVariant::PGD_AT, "PGD_AT"},
    {LossVariant::ALP, "ALP"},         {LossVariant::TRADES, "TRADES"},
    {LossVariant::RANDOM_JR, "RANDOM_JR"}, {LossVariant::SW_ONLY, "SW_ONLY"},
    {LossVariant::OTJR, "OTJR"},       {LossVariant::OTJR_TRADES, "OTJR_TRADES"},
    {LossVariant::OPTIMAL_JR, "OPTIMAL_JR"},
};

}  // namespace

std::string to_string(LossVariant v) {
  for (const auto& e : kVariantNames) {
    if (e.v == v) return e.name;
  }
  return "unknown";
}

LossVariant loss_variant_from_string(const std::string& s) {
  for (const auto& e : kVariantNames) {
    if (s == e.name) return e.v;
  }
  throw ValidationError("unknown loss variant '" + s + "'");
}

void LossSpec::validate() const {
  for (double w : {trades_lambda, alp_lambda, lambda_j, lambda_sw}) {
    if (!(w >= 0.0)) throw ValidationError("loss weights must be >= 0");
  }
  if (!(alp_alpha >= 0.0 && alp_alpha <= 1.0)) throw ValidationError("ALP alpha must lie in [0,1]");
  if (needs_projections() && K < 1) throw ValidationError("K must be >= 1 for transport losses");
}

bool LossSpec::needs_adversarial() const {
  return variant != LossVariant::XE && variant != LossVariant::RANDOM_JR;
}

bool LossSpec::needs_projections() const {
  return variant == LossVariant::SW_ONLY || variant == LossVariant::OTJR ||
         variant == LossVariant::OTJR_TRADES || variant == LossVariant::OPTIMAL_JR;
}

LossSpec published_preset_cifar10() {
  LossSpec s;
  s.variant = LossVariant::OTJR;
  s.K = 32;
  s.lambda_j = 0.002;
  s.lambda_sw = 64.0;
  return s;
}

LossSpec published_preset_cifar100() {
  LossSpec s;
  s.variant = LossVariant::OTJR;
  s.K = 128;
  s.lambda_j = 0.001;
  s.lambda_sw = 64.0;
  return s;
}

double OptimizerConfig::lr_at(std::size_t epoch) const {
  double lr_e = lr;
  for (std::size_t d : decay_epochs) {
    if (epoch >= d) lr_e *= decay_factor;
  }
  return lr_e;
}

void TrainConfig::validate() const {
  loss.validate();
  if (loss.needs_adversarial()) attack.validate();
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (!(optimizer.lr >= 0.0)) throw ValidationError("learning rate must be >= 0");
  if (!(optimizer.momentum >= 0.0 && optimizer.momentum < 1.0)) {
    throw ValidationError("momentum must lie in [0,1)");
  }
  if (!(optimizer.weight_decay >= 0.0)) throw ValidationError("weight decay must be >= 0");
  for (std::size_t i = 0; i < optimizer.decay_epochs.size(); ++i) {
    if (optimizer.decay_epochs[i] >= epochs ||
        (i > 0 && optimizer.decay_epochs[i] <= optimizer.decay_epochs[i - 1])) {
      throw ValidationError("decay epochs must be strictly increasing and below the epoch count");
    }
  }
}

BatchInputs prepare_batch(const Params& p, Tensor x, std::vector<int> y, const TrainConfig& cfg,
                          std::uint64_t batch_seed) {
  BatchInputs b;
  b.x = std::move(x);
  b.y = std::move(y);
  const LossSpec& s = cfg.loss;
  if (s.needs_adversarial()) {
    AttackConfig a = cfg.attack;
    a.seed = derive_seed(cfg.seeds.attack, {batch_seed});
    b.x_adv = pgd(p, b.x, b.y, a);
  }
  const std::size_t C = p.spec().classes();
  if (s.needs_projections()) {
    b.projections = sample_projections(s.K, C, derive_seed(cfg.seeds.projection, {batch_seed}));
  }
  if (s.variant == LossVariant::RANDOM_JR) {
    b.random_directions =
        sample_projections(b.x.rows(), C, derive_seed(cfg.seeds.projection, {batch_seed, 1})).directions;
  }
  return b;
}

namespace {

ad::Var mean_xe(ad::Var z, ad::Var targets) { return ad::mean(ad::cross_entropy(z, targets)); }

// Soft-target cross-entropy XE(S(z_adv), S(z)), or the KL form.
ad::Var trades_term(ad::Var z, ad::Var z_adv, bool kl) {
  ad::Var p = ad::softmax(z);
  ad::Var ce = ad::cross_entropy(z_adv, p);
  if (kl) ce = ce - ad::cross_entropy(z, p);
  return ad::mean(ce);
}

bool uses_jr(LossVariant v) {
  return v == LossVariant::RANDOM_JR || v == LossVariant::OTJR || v == LossVariant::OTJR_TRADES ||
         v == LossVariant::OPTIMAL_JR;
}

}  // namespace

LossTerms build_loss(ad::Graph& g, const BoundParams& bp, const BatchInputs& batch,
                     const LossSpec& spec) {
  const LossVariant v = spec.variant;
  const bool jr = uses_jr(v) && spec.lambda_j > 0.0;
  if (spec.needs_adversarial() && batch.x_adv.size() != batch.x.size()) {
    throw ContractError(to_string(v) + " needs an adversarial batch");
  }
  ad::Var x = jr ? g.variable(batch.x) : g.constant(batch.x);
  ad::Var z = forward(bp, x).logits();
  const std::size_t C = z.value().cols();
  ad::Var onehot = g.constant(one_hot(batch.y, C));
  ad::Var z_adv;
  if (spec.needs_adversarial()) z_adv = forward(bp, g.constant(batch.x_adv)).logits();

  LossTerms t;
  auto add = [&](std::string name, ad::Var term) { t.parts.emplace_back(std::move(name), term); };

  switch (v) {
    case LossVariant::XE:
    case LossVariant::RANDOM_JR:
    case LossVariant::OPTIMAL_JR:
      add("xe_clean", mean_xe(z, onehot));
      break;
    case LossVariant::PGD_AT:
    case LossVariant::SW_ONLY:
    case LossVariant::OTJR:
      add("xe_adv", mean_xe(z_adv, onehot));
      break;
    case LossVariant::TRADES:
    case LossVariant::OTJR_TRADES:
      add("xe_clean", mean_xe(z, onehot));
      add("trades", ad::scale(trades_term(z, z_adv, spec.trades_kl), spec.trades_lambda));
      break;
    case LossVariant::ALP:
      add("xe_clean", ad::scale(mean_xe(z, onehot), spec.alp_alpha));
      add("xe_adv", ad::scale(mean_xe(z_adv, onehot), 1.0 - spec.alp_alpha));
      add("alp_pair", ad::scale(ad::mean(ad::l2_norm(z_adv - z)), spec.alp_lambda));
      break;
  }

  const bool transport = spec.needs_projections();
  if (jr) {
    Tensor sigma;
    if (v == LossVariant::RANDOM_JR) {
      sigma = batch.random_directions;
    } else if (batch.sigma) {
      sigma = *batch.sigma;
    } else {
      // Trajectories move the adversarial logits towards the clean ones.
      sigma = trajectories(movements(z_adv.value(), z.value(), batch.projections).sums).sigma;
    }
    add("jr", ad::scale(jr_penalty(x, z, sigma), spec.lambda_j));
    t.sigma = std::move(sigma);
  }
  if (transport && v != LossVariant::OPTIMAL_JR && spec.lambda_sw > 0.0) {
    add("sw", ad::scale(sliced_w1(z_adv, z, batch.projections), spec.lambda_sw));
  }

  t.total = t.parts.front().second;
  for (std::size_t i = 1; i < t.parts.size(); ++i) t.total = t.total + t.parts[i].second;
  return t;
}

ad::Var loss_baseline(const LossSpec& spec, ad::Var z, ad::Var z_adv, std::span<const int> y,
                      const ProjectionSet* projections) {
  if (uses_jr(spec.variant)) {
    throw ContractError(to_string(spec.variant) + " needs inputs; use build_loss");
  }
  ad::Graph& g = z.graph();
  ad::Var onehot = g.constant(one_hot(y, z.value().cols()));
  switch (spec.variant) {
    case LossVariant::XE:
      return mean_xe(z, onehot);
    case LossVariant::PGD_AT:
      return mean_xe(z_adv, onehot);
    case LossVariant::TRADES:
      return mean_xe(z, onehot) +
             ad::scale(trades_term(z, z_adv, spec.trades_kl), spec.trades_lambda);
    case LossVariant::ALP:
      return ad::scale(mean_xe(z, onehot), spec.alp_alpha) +
             ad::scale(mean_xe(z_adv, onehot), 1.0 - spec.alp_alpha) +
             ad::scale(ad::mean(ad::l2_norm(z_adv - z)), spec.alp_lambda);
    case LossVariant::SW_ONLY: {
      if (!projections) throw ContractError("SW_ONLY needs projections");
      ad::Var l = mean_xe(z_adv, onehot);
      if (spec.lambda_sw > 0.0) l = l + ad::scale(sliced_w1(z_adv, z, *projections), spec.lambda_sw);
      return l;
    }
    default:
      break;
  }
  throw ContractError("variant not supported by loss_baseline");
}

BatchGradient batch_gradient(const Params& p, const BatchInputs& batch, const LossSpec& spec) {
  ad::Graph g;
  BoundParams bp = bind(g, p, true);
  LossTerms t = build_loss(g, bp, batch, spec);
  BatchGradient out;
  out.loss = t.total.item();
  for (auto& [name, var] : t.parts) out.components.emplace_back(name, var.item());
  const ad::GradMap grads = g.backward(t.total, bp.blocks);
  out.grad.assign(p.size(), 0.0);
  for (std::size_t i = 0; i < bp.blocks.size(); ++i) {
    const Tensor& gi = grads[bp.blocks[i]];
    std::copy(gi.values().begin(), gi.values().end(), out.grad.begin() + p.views()[i].offset);
  }
  return out;
}

namespace {

double elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

TrainResult train(MLPSpec spec, const TrainConfig& cfg, const Dataset& train_set,
                  const Dataset* eval_set, const EpochCallback& on_epoch) {
  cfg.validate();
  spec.seed = cfg.seeds.init;
  spec.validate();
  if (train_set.size() == 0) throw ValidationError("training set is empty");
  if (train_set.inputs() != spec.inputs()) {
    throw ValidationError("dataset has " + std::to_string(train_set.inputs()) +
                          " inputs, model expects " + std::to_string(spec.inputs()));
  }
  TrainResult r{init(spec), {}};
  Params& p = r.params;
  std::vector<double> velocity(p.size(), 0.0);

  Dataset eval_rows;
  if (eval_set) {
    if (cfg.eval.samples > 0 && cfg.eval.samples < eval_set->size()) {
      std::vector<std::size_t> idx(cfg.eval.samples);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      eval_rows = eval_set->rows(idx);
    } else {
      eval_rows = *eval_set;
    }
  }

  const std::size_t N = train_set.size();
  std::vector<std::size_t> order(N);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seeds.shuffle, {epoch}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    MetricsRecord rec;
    rec.epoch = epoch;
    rec.lr = cfg.optimizer.lr_at(epoch);
    std::size_t seen = 0;
    std::size_t batch_index = 0;
    for (std::size_t first = 0; first < N; first += cfg.batch_size, ++batch_index) {
      const std::size_t n = std::min(cfg.batch_size, N - first);
      const std::span<const std::size_t> idx(order.data() + first, n);
      Dataset b = train_set.rows(idx);
      BatchGradient bg;
      try {
        BatchInputs in = prepare_batch(p, std::move(b.x), std::move(b.y), cfg,
                                       derive_seed(epoch, {batch_index}));
        bg = batch_gradient(p, in, cfg.loss);
      } catch (const NumericError& e) {
        throw NumericError("training aborted at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index) + ": " + e.what());
      }
      if (!std::isfinite(bg.loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      }
      const double lr = rec.lr;
      const double mu = cfg.optimizer.momentum;
      const double wd = cfg.optimizer.weight_decay;
      auto& theta = p.flat();
      for (std::size_t k = 0; k < theta.size(); ++k) {
        velocity[k] = mu * velocity[k] + (bg.grad[k] + wd * theta[k]);
        theta[k] -= lr * velocity[k];
      }
      const double w = static_cast<double>(n);
      rec.loss += w * bg.loss;
      if (rec.components.empty()) {
        for (auto& [name, val] : bg.components) rec.components.emplace_back(name, 0.0);
      }
      for (std::size_t c = 0; c < bg.components.size(); ++c) rec.components[c].second += w * bg.components[c].second;
      seen += n;
    }
    rec.loss /= static_cast<double>(seen);
    for (auto& c : rec.components) c.second /= static_cast<double>(seen);

    const bool last = epoch + 1 == cfg.epochs;
    const bool due = last || (cfg.eval.every > 0 && (epoch + 1) % cfg.eval.every == 0);
    if (eval_set && due) {
      rec.clean_accuracy = clean_accuracy(p, eval_rows);
      rec.robust_accuracy = robust_accuracy(p, eval_rows, cfg.eval.attack);
    }
    rec.wall_seconds = elapsed(t0);
    if (on_epoch) on_epoch(rec);
    r.history.push_back(std::move(rec));
  }
  return r;
}

}  // namespace otjr
