#include "otjr/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "otjr/errors.hpp"
#include "otjr/kernels.hpp"
#include "otjr/seed.hpp"

namespace otjr {

std::string to_string(Norm n) { return n == Norm::Linf ? "linf" : "l2"; }

Norm norm_from_string(const std::string& s) {
  if (s == "linf" || s == "Linf") return Norm::Linf;
  if (s == "l2" || s == "L2") return Norm::L2;
  throw ValidationError("unknown norm '" + s + "' (expected linf or l2)");
}

std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::None: return "none";
    case AttackKind::Fgsm: return "fgsm";
    case AttackKind::Pgd: return "pgd";
    case AttackKind::Mim: return "mim";
  }
  return "unknown";
}

AttackKind attack_kind_from_string(const std::string& s) {
  if (s == "none") return AttackKind::None;
  if (s == "fgsm") return AttackKind::Fgsm;
  if (s == "pgd") return AttackKind::Pgd;
  if (s == "mim") return AttackKind::Mim;
  throw ValidationError("unknown attack '" + s + "' (expected fgsm, pgd or mim)");
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0)) throw ValidationError("attack epsilon must be >= 0");
  if (!(step > 0.0)) throw ValidationError("attack step must be > 0");
  if (iterations < 1) throw ValidationError("attack iterations must be >= 1");
  if (!(clamp_lo <= clamp_hi)) throw ValidationError("attack clamp range is empty");
}

InputGradient input_gradient(const Params& p, const Tensor& x, std::span<const int> y,
                             AttackLoss loss, const Tensor* clean_logits) {
  ad::Graph g;
  ad::Var xv = g.variable(x);
  BoundParams bp = bind(g, p, false);
  ad::Var z = forward(bp, xv).logits();
  Tensor target;
  if (loss == AttackLoss::CrossEntropy) {
    target = one_hot(y, p.spec().classes());
  } else {
    if (!clean_logits) throw ContractError("soft-target attack loss needs clean logits");
    target = kernels::softmax_last(*clean_logits);
  }
  ad::Var l = ad::sum(ad::cross_entropy(z, g.constant(std::move(target))));
  const ad::Var wrt[] = {xv};
  InputGradient out{g.backward(l, wrt)[xv], z.value()};
  if (!out.grad.all_finite()) throw NumericError("attack: non-finite input gradient");
  return out;
}

namespace {

double row_norm(std::span<const double> r, Norm n) {
  double acc = 0.0;
  for (double v : r) acc = n == Norm::Linf ? std::max(acc, std::abs(v)) : acc + v * v;
  return n == Norm::Linf ? acc : std::sqrt(acc);
}

double l1(std::span<const double> r) {
  double acc = 0.0;
  for (double v : r) acc += std::abs(v);
  return acc;
}

// Ascent direction for one row: sign for L-inf, unit vector for L2.
void direction(std::span<const double> g, Norm n, std::span<double> out) {
  if (n == Norm::Linf) {
    for (std::size_t j = 0; j < g.size(); ++j) out[j] = kernels::sign(g[j]);
    return;
  }
  const double len = row_norm(g, Norm::L2);
  for (std::size_t j = 0; j < g.size(); ++j) out[j] = len > 0.0 ? g[j] / len : 0.0;
}

// x_adv <- Proj_{x,eps}(x_adv + step * d), then clamp into the valid box.
void step_row(std::span<const double> x, std::span<double> xa, std::span<const double> d,
              const AttackConfig& c) {
  if (c.norm == Norm::Linf) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double lo = std::max(x[j] - c.epsilon, c.clamp_lo);
      const double hi = std::min(x[j] + c.epsilon, c.clamp_hi);
      xa[j] = std::min(std::max(xa[j] + c.step * d[j], lo), hi);
    }
    return;
  }
  double n2 = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    xa[j] += c.step * d[j];
    const double dj = xa[j] - x[j];
    n2 += dj * dj;
  }
  const double n = std::sqrt(n2);
  const double shrink = n > c.epsilon ? c.epsilon / n : 1.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    xa[j] = std::clamp(x[j] + (xa[j] - x[j]) * shrink, c.clamp_lo, c.clamp_hi);
  }
}

Tensor random_start(const Tensor& x, const AttackConfig& c) {
  Tensor xa = x;
  Rng rng(c.seed);
  if (c.norm == Norm::Linf) {
    std::uniform_real_distribution<double> u(-c.epsilon, c.epsilon);
    for (double& v : xa.values()) v = std::clamp(v + u(rng), c.clamp_lo, c.clamp_hi);
    return xa;
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> dir(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (double& v : dir) v = gauss(rng);
    const double len = row_norm(dir, Norm::L2);
    const double radius = c.epsilon * u(rng);
    auto row = xa.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) {
      row[j] = std::clamp(row[j] + (len > 0.0 ? radius * dir[j] / len : 0.0), c.clamp_lo,
                          c.clamp_hi);
    }
  }
  return xa;
}

// Shared iteration for PGD (mu < 0) and MIM (mu >= 0).
Tensor iterate(const Params& p, const Tensor& x, std::span<const int> y, const AttackConfig& c,
               double mu) {
  c.validate();
  if (x.rows() != y.size()) throw ContractError("attack: batch and label counts differ");
  Tensor xa = c.random_start ? random_start(x, c) : x;
  if (c.epsilon == 0.0) return xa;
  Tensor clean;
  if (c.loss == AttackLoss::SoftTarget) clean = logits(p, x);
  std::vector<char> active(x.rows(), 1);
  Tensor velocity(x.shape(), 0.0);
  std::vector<double> d(x.cols());
  for (std::size_t t = 0; t < c.iterations; ++t) {
    InputGradient ig = input_gradient(p, xa, y, c.loss, c.loss == AttackLoss::SoftTarget ? &clean : nullptr);
    std::vector<int> pred;
    if (c.early_stop) pred = kernels::argmax_rows(ig.logits);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      if (c.early_stop && pred[r] != y[r]) active[r] = 0;
      if (!active[r]) continue;
      auto g = ig.grad.row(r);
      if (mu >= 0.0) {
        auto v = velocity.row(r);
        const double n1 = l1(g);
        for (std::size_t j = 0; j < g.size(); ++j) v[j] = mu * v[j] + (n1 > 0.0 ? g[j] / n1 : 0.0);
        direction(v, c.norm, d);
      } else {
        direction(g, c.norm, d);
      }
      step_row(x.row(r), xa.row(r), d, c);
    }
  }
  return xa;
}

}  // namespace

Tensor fgsm(const Params& p, const Tensor& x, std::span<const int> y, double epsilon,
            double clamp_lo, double clamp_hi) {
  if (!(epsilon >= 0.0)) throw ValidationError("fgsm epsilon must be >= 0");
  const Tensor g = input_gradient(p, x, y).grad;
  Tensor xa = x;
  for (std::size_t k = 0; k < xa.size(); ++k) {
    xa[k] = std::min(std::max(x[k] + epsilon * kernels::sign(g[k]), clamp_lo), clamp_hi);
  }
  return xa;
}

Tensor pgd(const Params& p, const Tensor& x, std::span<const int> y, const AttackConfig& cfg) {
  return iterate(p, x, y, cfg, -1.0);
}

Tensor mim(const Params& p, const Tensor& x, std::span<const int> y, const AttackConfig& cfg,
           double mu) {
  if (!(mu >= 0.0)) throw ValidationError("mim decay must be >= 0");
  return iterate(p, x, y, cfg, mu);
}

std::vector<double> perturbation_norms(const Tensor& x, const Tensor& x_adv, Norm norm) {
  std::vector<double> out(x.rows());
  std::vector<double> diff(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t j = 0; j < x.cols(); ++j) diff[j] = x_adv.at(r, j) - x.at(r, j);
    out[r] = row_norm(diff, norm);
  }
  return out;
}

Tensor run_attack(const Params& p, const Tensor& x, std::span<const int> y, const AttackSpec& a) {
  switch (a.kind) {
    case AttackKind::None: return x;
    case AttackKind::Fgsm: return fgsm(p, x, y, a.cfg.epsilon, a.cfg.clamp_lo, a.cfg.clamp_hi);
    case AttackKind::Pgd: return pgd(p, x, y, a.cfg);
    case AttackKind::Mim: return mim(p, x, y, a.cfg, a.decay);
  }
  throw ContractError("unknown attack kind");
}

std::vector<AttackRecord> attack_dataset(const Params& p, const Dataset& d, const AttackSpec& a,
                                         std::size_t batch) {
  if (d.size() == 0) throw ValidationError("attack: empty dataset");
  if (batch == 0) throw ContractError("attack: batch size must be positive");
  std::vector<AttackRecord> out;
  out.reserve(d.size());
  for (std::size_t first = 0; first < d.size(); first += batch) {
    const std::size_t n = std::min(batch, d.size() - first);
    const Tensor x = slice_rows(d.x, first, n);
    const std::span<const int> y(d.y.data() + first, n);
    AttackSpec local = a;
    local.cfg.seed = derive_seed(a.cfg.seed, {first});
    const Tensor xa = run_attack(p, x, y, local);
    const std::vector<int> clean = predict(p, x);
    const std::vector<int> adv = predict(p, xa);
    const std::vector<double> norms = perturbation_norms(x, xa, a.cfg.norm);
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back({first + i, y[i], clean[i], adv[i], norms[i]});
    }
  }
  return out;
}

double robust_accuracy(const std::vector<AttackRecord>& records) {
  if (records.empty()) throw ValidationError("robust accuracy of an empty record set");
  std::size_t ok = 0;
  for (const AttackRecord& r : records) ok += r.adv_pred == r.label;
  return static_cast<double>(ok) / static_cast<double>(records.size());
}

double robust_accuracy(const Params& p, const Dataset& d, const AttackSpec& a, std::size_t batch) {
  return robust_accuracy(attack_dataset(p, d, a, batch));
}

double clean_accuracy(const Params& p, const Dataset& d) {
  AttackSpec none;
  none.kind = AttackKind::None;
  return robust_accuracy(p, d, none, 1000);
}

}  // namespace otjr
