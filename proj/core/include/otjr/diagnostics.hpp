#pragma once

// Analysis tables computed from a trained model.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "otjr/attacks.hpp"
#include "otjr/data.hpp"
#include "otjr/io.hpp"
#include "otjr/models.hpp"

namespace otjr {

struct DiagnosticReport {
  std::string kind;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  nlohmann::json metadata = nlohmann::json::object();

  /// Throws ContractError unless every row matches the column count.
  void validate() const;
  std::vector<double> column(const std::string& name) const;
  CsvTable table() const;
  /// Writes `<dir>/<kind>_<checkpoint-id>.csv` and returns the path.
  std::filesystem::path write(const std::filesystem::path& dir, const std::string& checkpoint_id) const;
};

/// Per-channel mean |activation| at the last hidden layer, channels sorted by
/// the clean magnitude (descending). Columns: channel, clean, adversarial.
DiagnosticReport activation_profile(const Params& p, const Tensor& clean, const Tensor& adversarial);

/// Mean over samples of |grad_x XE|_1 / I after each number of PGD steps in
/// `ladder` (0 = clean). Columns: iterations, mean_l1.
DiagnosticReport input_grad_l1(const Params& p, const Dataset& d, std::span<const std::size_t> ladder,
                               const AttackConfig& attack, std::size_t batch = 250);

/// Average over minibatches of |grad_theta_i L(adv)| / |grad_theta_i L(clean)|
/// per parameter block. Columns: block, layer, bias, ratio, flagged.
DiagnosticReport layer_grad_ratio(const Params& p, const Tensor& clean, const Tensor& adversarial,
                                  std::span<const int> y, std::size_t batch = 100);

/// Predicted classes over anchor + a*d1 + b*d2 on an odd grid covering
/// [-w, w]^2. Columns: a, b, class. Metadata carries the anchor class and the
/// mean radius of its connected region.
DiagnosticReport boundary_slice(const Params& p, const Tensor& anchor, const Tensor& d1,
                                const Tensor& d2, double half_width, std::size_t resolution);

/// Mean distance from the centre to the edge of the anchor-class connected
/// region of a boundary slice, over `rays` evenly spaced directions.
double region_radius(const DiagnosticReport& slice, std::size_t rays = 64);

/// Robust accuracy against PGD over step and budget ladders. Columns: axis
/// (0 steps, 1 epsilon, 2 clean), value, accuracy.
DiagnosticReport sanity_suite(const Params& p, const Dataset& d, std::span<const std::size_t> steps,
                              std::span<const double> epsilons, const AttackConfig& base);

bool non_increasing(std::span<const double> v, double slack = 0.0);

}  // namespace otjr
