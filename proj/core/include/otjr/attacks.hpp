#pragma once

// White-box input-space attacks against an MLP.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "otjr/data.hpp"
#include "otjr/models.hpp"

namespace otjr {

enum class Norm { Linf, L2 };
enum class AttackLoss {
  CrossEntropy,  // cross-entropy on the true label
  SoftTarget,    // cross-entropy against the clean softmax
};

std::string to_string(Norm n);
Norm norm_from_string(const std::string& s);

struct AttackConfig {
  Norm norm = Norm::Linf;
  double epsilon = 0.1;
  double step = 0.025;
  std::size_t iterations = 10;
  bool random_start = false;
  /// Stop updating a sample once it is misclassified.
  bool early_stop = false;
  AttackLoss loss = AttackLoss::CrossEntropy;
  std::uint64_t seed = 0;
  double clamp_lo = 0.0;
  double clamp_hi = 1.0;

  void validate() const;
};

/// Gradient of the summed attack loss with respect to x, plus the logits at x.
struct InputGradient {
  Tensor grad;
  Tensor logits;
};
InputGradient input_gradient(const Params& p, const Tensor& x, std::span<const int> y,
                             AttackLoss loss = AttackLoss::CrossEntropy,
                             const Tensor* clean_logits = nullptr);

Tensor fgsm(const Params& p, const Tensor& x, std::span<const int> y, double epsilon,
            double clamp_lo = 0.0, double clamp_hi = 1.0);
Tensor pgd(const Params& p, const Tensor& x, std::span<const int> y, const AttackConfig& cfg);
/// Momentum iterative method with decay `mu`.
Tensor mim(const Params& p, const Tensor& x, std::span<const int> y, const AttackConfig& cfg,
           double mu);

/// Per-row perturbation size in the given norm.
std::vector<double> perturbation_norms(const Tensor& x, const Tensor& x_adv, Norm norm);

enum class AttackKind { None, Fgsm, Pgd, Mim };
std::string to_string(AttackKind k);
AttackKind attack_kind_from_string(const std::string& s);

struct AttackSpec {
  AttackKind kind = AttackKind::Pgd;
  AttackConfig cfg;
  double decay = 1.0;
};

Tensor run_attack(const Params& p, const Tensor& x, std::span<const int> y, const AttackSpec& a);

struct AttackRecord {
  std::size_t sample = 0;
  int label = 0;
  int clean_pred = 0;
  int adv_pred = 0;
  double norm = 0.0;
};

std::vector<AttackRecord> attack_dataset(const Params& p, const Dataset& d, const AttackSpec& a,
                                         std::size_t batch = 250);
double robust_accuracy(const Params& p, const Dataset& d, const AttackSpec& a,
                       std::size_t batch = 250);
double robust_accuracy(const std::vector<AttackRecord>& records);
double clean_accuracy(const Params& p, const Dataset& d);

}  // namespace otjr
