#include "otjr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "otjr/errors.hpp"

namespace otjr {

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

namespace {

// Signs of every input that sits in front of a non-smooth primitive.
std::vector<signed char> kink_pattern(const ad::Graph& g) {
  std::vector<signed char> out;
  auto push_signs = [&](const Tensor& t) {
    for (double v : t.values()) out.push_back(v > 0.0 ? 1 : (v < 0.0 ? -1 : 0));
  };
  for (std::size_t i = 0; i < g.size(); ++i) {
    const ad::Node& n = g.node(static_cast<ad::NodeIndex>(i));
    switch (n.attrs.op) {
      case ad::Op::Relu:
      case ad::Op::Abs:
        push_signs(g.node(n.attrs.parents[0]).value);
        break;
      case ad::Op::ReluMask:
      case ad::Op::SignMask:
        push_signs(g.node(n.attrs.parents[1]).value);
        break;
      case ad::Op::L2Norm:
        push_signs(n.value);
        break;
      default:
        break;
    }
  }
  return out;
}

struct Probe {
  double value;
  std::vector<signed char> pattern;
};

Probe probe(const ScalarFn& f, const Tensor& point) {
  ad::Graph g;
  ad::Var x = g.variable(point);
  ad::Var y = f(g, x);
  if (y.value().size() != 1) throw ContractError("gradcheck: function is not scalar");
  const double v = y.item();
  if (!std::isfinite(v)) throw NumericError("gradcheck: non-finite function value");
  return {v, kink_pattern(g)};
}

}  // namespace

GradcheckReport gradcheck(const ScalarFn& f, const Tensor& point, double tolerance,
                          double step) {
  Tensor analytic;
  std::vector<signed char> base_pattern;
  {
    ad::Graph g;
    ad::Var x = g.variable(point);
    ad::Var y = f(g, x);
    base_pattern = kink_pattern(g);
    const ad::Var wrt[] = {x};
    analytic = g.backward(y, wrt)[x];
  }

  GradcheckReport report;
  bool failed = false;
  bool kink_mismatch = false;
  Tensor probe_point = point;
  for (std::size_t j = 0; j < point.size(); ++j) {
    probe_point[j] = point[j] + step;
    const Probe plus = probe(f, probe_point);
    probe_point[j] = point[j] - step;
    const Probe minus = probe(f, probe_point);
    probe_point[j] = point[j];

    const double numeric = (plus.value - minus.value) / (2.0 * step);
    const double err = relative_error(analytic[j], numeric);
    const bool kink = plus.pattern != base_pattern || minus.pattern != base_pattern;
    if (kink) {
      ++report.kink_coordinates;
      if (err > tolerance) kink_mismatch = true;
      continue;
    }
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_index = j;
    }
    if (err > tolerance) failed = true;
  }
  if (failed) {
    report.status = GradcheckStatus::Fail;
  } else if (kink_mismatch) {
    report.status = GradcheckStatus::Inconclusive;
  }
  return report;
}

}  // namespace otjr
