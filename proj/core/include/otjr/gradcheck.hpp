#pragma once

#include <cstddef>
#include <functional>

#include "otjr/autodiff.hpp"

namespace otjr {

enum class GradcheckStatus { Pass, Fail, Inconclusive };

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  /// Coordinates whose finite-difference probe crossed a non-smooth point.
  std::size_t kink_coordinates = 0;
  GradcheckStatus status = GradcheckStatus::Pass;

  bool pass() const { return status == GradcheckStatus::Pass; }
};

/// Builds a scalar on `graph` from the variable `x`.
using ScalarFn = std::function<ad::Var(ad::Graph& graph, ad::Var x)>;

/// Compares the reverse-mode gradient of `f` at `point` with central finite
/// differences. Relative error per coordinate is |a-b| / max(|a|,|b|,1e-8).
/// A mismatch on a coordinate whose probe changes the sign pattern of a relu,
/// abs or norm input is reported as inconclusive rather than failing.
GradcheckReport gradcheck(const ScalarFn& f, const Tensor& point,
                          double tolerance, double step = 1e-5);

double relative_error(double a, double b);

}  // namespace otjr
