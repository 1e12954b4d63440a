#include "otjr/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <queue>

#include "otjr/errors.hpp"
#include "otjr/kernels.hpp"
#include "otjr/training.hpp"

namespace otjr {

void DiagnosticReport::validate() const {
  for (const auto& r : rows) {
    if (r.size() != columns.size()) throw ContractError(kind + ": ragged report row");
  }
}

std::vector<double> DiagnosticReport::column(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw ContractError(kind + ": no column '" + name + "'");
  const std::size_t c = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

CsvTable DiagnosticReport::table() const {
  validate();
  CsvTable t;
  t.metadata = metadata;
  t.metadata["kind"] = kind;
  t.header = columns;
  for (const auto& r : rows) {
    std::vector<std::string> cells;
    for (double v : r) cells.push_back(format_double(v));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

std::filesystem::path DiagnosticReport::write(const std::filesystem::path& dir,
                                              const std::string& checkpoint_id) const {
  const auto path = dir / (kind + "_" + checkpoint_id + ".csv");
  table().write(path);
  return path;
}

bool non_increasing(std::span<const double> v, double slack) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1] + slack) return false;
  }
  return true;
}

DiagnosticReport activation_profile(const Params& p, const Tensor& clean, const Tensor& adversarial) {
  if (clean.rows() == 0) throw ValidationError("activation_profile: empty batch");
  if (clean.shape() != adversarial.shape()) throw ContractError("activation_profile: batches differ in shape");
  const Tensor hc = penultimate(p, clean);
  const Tensor ha = penultimate(p, adversarial);
  const std::size_t H = hc.cols();
  std::vector<double> mc(H, 0.0), ma(H, 0.0);
  for (std::size_t r = 0; r < hc.rows(); ++r) {
    for (std::size_t c = 0; c < H; ++c) {
      mc[c] += std::abs(hc.at(r, c));
      ma[c] += std::abs(ha.at(r, c));
    }
  }
  for (std::size_t c = 0; c < H; ++c) {
    mc[c] /= static_cast<double>(hc.rows());
    ma[c] /= static_cast<double>(hc.rows());
  }
  std::vector<std::size_t> order(H);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mc[a] > mc[b]; });
  DiagnosticReport r{"activation", {"channel", "clean", "adversarial"}, {}, {}};
  for (std::size_t c : order) r.rows.push_back({static_cast<double>(c), mc[c], ma[c]});
  return r;
}

DiagnosticReport input_grad_l1(const Params& p, const Dataset& d, std::span<const std::size_t> ladder,
                               const AttackConfig& attack, std::size_t batch) {
  DiagnosticReport r{"inputgrad", {"iterations", "mean_l1"}, {}, {}};
  if (d.size() == 0) throw ValidationError("input_grad_l1: empty dataset");
  const double I = static_cast<double>(d.inputs());
  for (std::size_t steps : ladder) {
    double total = 0.0;
    for (std::size_t first = 0; first < d.size(); first += batch) {
      const std::size_t n = std::min(batch, d.size() - first);
      const Tensor x = slice_rows(d.x, first, n);
      const std::span<const int> y(d.y.data() + first, n);
      Tensor xa = x;
      if (steps > 0) {
        AttackConfig a = attack;
        a.iterations = steps;
        xa = pgd(p, x, y, a);
      }
      const Tensor g = input_gradient(p, xa, y).grad;
      for (double v : g.values()) total += std::abs(v);
    }
    r.rows.push_back({static_cast<double>(steps), total / (static_cast<double>(d.size()) * I)});
  }
  r.metadata["attack"] = {{"epsilon", attack.epsilon}, {"step", attack.step}};
  return r;
}

DiagnosticReport layer_grad_ratio(const Params& p, const Tensor& clean, const Tensor& adversarial,
                                  std::span<const int> y, std::size_t batch) {
  if (clean.shape() != adversarial.shape() || clean.rows() != y.size()) {
    throw ContractError("layer_grad_ratio: misaligned batches");
  }
  if (clean.rows() == 0) throw ValidationError("layer_grad_ratio: empty batch");
  const std::size_t nb = p.views().size();
  std::vector<double> sum(nb, 0.0);
  std::vector<std::size_t> count(nb, 0);
  LossSpec xe;
  xe.variant = LossVariant::XE;
  auto block_norms = [&](const std::vector<double>& g) {
    std::vector<double> out(nb, 0.0);
    for (std::size_t i = 0; i < nb; ++i) {
      const BlockView& v = p.views()[i];
      double s = 0.0;
      for (std::size_t k = v.offset; k < v.offset + v.size(); ++k) s += g[k] * g[k];
      out[i] = std::sqrt(s);
    }
    return out;
  };
  for (std::size_t first = 0; first < clean.rows(); first += batch) {
    const std::size_t n = std::min(batch, clean.rows() - first);
    std::vector<int> yb(y.begin() + first, y.begin() + first + n);
    BatchInputs bc{slice_rows(clean, first, n), yb, {}, {}, {}, {}};
    BatchInputs ba{slice_rows(adversarial, first, n), yb, {}, {}, {}, {}};
    const auto nc = block_norms(batch_gradient(p, bc, xe).grad);
    const auto na = block_norms(batch_gradient(p, ba, xe).grad);
    for (std::size_t i = 0; i < nb; ++i) {
      if (nc[i] < 1e-12) continue;
      sum[i] += na[i] / nc[i];
      ++count[i];
    }
  }
  DiagnosticReport r{"ratio", {"block", "layer", "bias", "ratio", "flagged"}, {}, {}};
  for (std::size_t i = 0; i < nb; ++i) {
    const BlockView& v = p.views()[i];
    const bool flagged = count[i] == 0;
    r.rows.push_back({static_cast<double>(i), static_cast<double>(v.layer), v.bias ? 1.0 : 0.0,
                      flagged ? std::numeric_limits<double>::quiet_NaN() : sum[i] / static_cast<double>(count[i]),
                      flagged ? 1.0 : 0.0});
  }
  return r;
}

namespace {

// Gram-Schmidt on the two slice directions.
std::pair<std::vector<double>, std::vector<double>> orthonormal(const Tensor& d1, const Tensor& d2) {
  std::vector<double> u(d1.values().begin(), d1.values().end());
  std::vector<double> v(d2.values().begin(), d2.values().end());
  auto normalize = [](std::vector<double>& a) {
    double n = 0.0;
    for (double x : a) n += x * x;
    n = std::sqrt(n);
    if (n < 1e-12) throw ContractError("boundary_slice: degenerate direction");
    for (double& x : a) x /= n;
  };
  normalize(u);
  double dot = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
  for (std::size_t i = 0; i < u.size(); ++i) v[i] -= dot * u[i];
  normalize(v);
  return {u, v};
}

}  // namespace

DiagnosticReport boundary_slice(const Params& p, const Tensor& anchor, const Tensor& d1,
                                const Tensor& d2, double half_width, std::size_t resolution) {
  if (resolution < 2) throw ContractError("boundary_slice: resolution must be >= 2");
  const std::size_t I = p.spec().inputs();
  if (anchor.size() != I || d1.size() != I || d2.size() != I) {
    throw ContractError("boundary_slice: anchor and directions must have " + std::to_string(I) + " entries");
  }
  const std::size_t R = resolution % 2 == 0 ? resolution + 1 : resolution;
  const auto [u, v] = orthonormal(d1, d2);
  std::vector<double> coord(R);
  const std::size_t mid = R / 2;
  for (std::size_t i = 0; i < R; ++i) {
    coord[i] = i == mid ? 0.0 : -half_width + 2.0 * half_width * static_cast<double>(i) / static_cast<double>(R - 1);
  }
  DiagnosticReport r{"boundary", {"a", "b", "class"}, {}, {}};
  Tensor row(Shape{R, I});
  for (std::size_t i = 0; i < R; ++i) {
    for (std::size_t j = 0; j < R; ++j) {
      auto out = row.row(j);
      for (std::size_t k = 0; k < I; ++k) out[k] = anchor[k] + coord[i] * u[k] + coord[j] * v[k];
    }
    const std::vector<int> cls = predict(p, row);
    for (std::size_t j = 0; j < R; ++j) r.rows.push_back({coord[i], coord[j], static_cast<double>(cls[j])});
  }
  Tensor a1 = anchor.reshaped(Shape{1, I});
  const int anchor_class = predict(p, a1)[0];
  r.metadata = {{"resolution", R}, {"half_width", half_width}, {"anchor_class", anchor_class}};
  r.metadata["region_radius"] = region_radius(r);
  return r;
}

double region_radius(const DiagnosticReport& slice, std::size_t rays) {
  const std::size_t cells = slice.rows.size();
  const auto R = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(cells))));
  if (R * R != cells || R % 2 == 0) throw ContractError("region_radius: not a square odd grid");
  const double w = slice.rows.back()[0];
  const double h = 2.0 * w / static_cast<double>(R - 1);
  auto cls = [&](std::size_t i, std::size_t j) { return slice.rows[i * R + j][2]; };
  const std::size_t mid = R / 2;
  const double target = cls(mid, mid);

  // 4-connected component of the centre cell.
  std::vector<char> in(cells, 0);
  std::queue<std::pair<std::size_t, std::size_t>> q;
  in[mid * R + mid] = 1;
  q.push({mid, mid});
  while (!q.empty()) {
    auto [i, j] = q.front();
    q.pop();
    const std::pair<long, long> nbr[] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
    for (auto [di, dj] : nbr) {
      const long ni = static_cast<long>(i) + di, nj = static_cast<long>(j) + dj;
      if (ni < 0 || nj < 0 || ni >= static_cast<long>(R) || nj >= static_cast<long>(R)) continue;
      const std::size_t k = static_cast<std::size_t>(ni) * R + static_cast<std::size_t>(nj);
      if (in[k] || cls(ni, nj) != target) continue;
      in[k] = 1;
      q.push({static_cast<std::size_t>(ni), static_cast<std::size_t>(nj)});
    }
  }

  // March each ray in quarter-cell steps until it leaves the component.
  double total = 0.0;
  for (std::size_t k = 0; k < rays; ++k) {
    const double th = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(rays);
    const double ca = std::cos(th), sa = std::sin(th);
    double t = 0.0;
    while (true) {
      const double next = t + h / 4.0;
      const long i = std::lround(static_cast<double>(mid) + next * ca / h);
      const long j = std::lround(static_cast<double>(mid) + next * sa / h);
      if (i < 0 || j < 0 || i >= static_cast<long>(R) || j >= static_cast<long>(R)) break;
      if (!in[static_cast<std::size_t>(i) * R + static_cast<std::size_t>(j)]) break;
      t = next;
    }
    total += t;
  }
  return total / static_cast<double>(rays);
}

DiagnosticReport sanity_suite(const Params& p, const Dataset& d, std::span<const std::size_t> steps,
                              std::span<const double> epsilons, const AttackConfig& base) {
  DiagnosticReport r{"sanity", {"axis", "value", "accuracy"}, {}, {}};
  const double ratio = base.epsilon > 0.0 ? base.step / base.epsilon : 0.25;
  AttackSpec spec;
  spec.kind = AttackKind::Pgd;
  spec.cfg = base;
  spec.cfg.early_stop = true;
  std::vector<double> by_steps, by_eps;
  for (std::size_t s : steps) {
    AttackSpec a = spec;
    a.cfg.iterations = s;
    by_steps.push_back(robust_accuracy(p, d, a));
    r.rows.push_back({0.0, static_cast<double>(s), by_steps.back()});
  }
  for (double e : epsilons) {
    AttackSpec a = spec;
    a.cfg.iterations = 20;
    a.cfg.epsilon = e;
    a.cfg.step = e > 0.0 ? ratio * e : base.step;
    by_eps.push_back(robust_accuracy(p, d, a));
    r.rows.push_back({1.0, e, by_eps.back()});
  }
  const double clean = clean_accuracy(p, d);
  r.rows.push_back({2.0, 0.0, clean});
  r.metadata = {{"steps_monotone", non_increasing(by_steps)},
                {"eps_monotone", non_increasing(by_eps)},
                {"epsilon", base.epsilon},
                {"step_ratio", ratio}};
  return r;
}

}  // namespace otjr
