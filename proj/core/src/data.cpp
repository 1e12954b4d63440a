#include "otjr/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

#include "otjr/seed.hpp"

namespace otjr {

void Dataset::validate() const {
  if (x.rank() != 2) throw ValidationError("dataset inputs must be a matrix");
  if (x.rows() != y.size()) {
    throw ValidationError("dataset has " + std::to_string(x.rows()) + " rows but " +
                          std::to_string(y.size()) + " labels");
  }
  for (int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw ValidationError("label " + std::to_string(label) + " outside [0," +
                            std::to_string(classes) + ")");
    }
  }
  for (double v : x.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("dataset input outside [0,1]");
  }
}

Dataset Dataset::rows(std::span<const std::size_t> index) const {
  Dataset out;
  out.x = gather_rows(x, index);
  out.y.reserve(index.size());
  for (std::size_t i : index) out.y.push_back(y.at(i));
  out.classes = classes;
  out.split = split;
  out.provenance = provenance;
  return out;
}

namespace {

// Min-max scale each column into [0,1]; records the affine map.
nlohmann::json minmax_scale(Tensor& x) {
  nlohmann::json scaling = nlohmann::json::array();
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double lo = x.at(0, c), hi = x.at(0, c);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      lo = std::min(lo, x.at(r, c));
      hi = std::max(hi, x.at(r, c));
    }
    const double span = hi > lo ? hi - lo : 1.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      x.at(r, c) = std::clamp((x.at(r, c) - lo) / span, 0.0, 1.0);
    }
    scaling.push_back({{"min", lo}, {"max", hi}});
  }
  return scaling;
}

}  // namespace

Dataset gen_two_moons(std::size_t n, double noise, std::uint64_t seed) {
  if (n < 2) throw ValidationError("two-moons needs n >= 2");
  if (noise < 0.0) throw ValidationError("two-moons noise must be >= 0");
  const std::size_t n_outer = (n + 1) / 2;
  const std::size_t n_inner = n / 2;
  auto arc_t = [](std::size_t k, std::size_t count) {
    return count > 1 ? std::numbers::pi * static_cast<double>(k) / static_cast<double>(count - 1)
                     : 0.0;
  };
  Dataset d;
  d.x = Tensor(Shape{n, 2});
  d.y.resize(n);
  d.classes = 2;
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const std::size_t k = i / 2;
    double px, py;
    if (label == 0) {
      const double t = arc_t(k, n_outer);
      px = std::cos(t);
      py = std::sin(t);
    } else {
      const double t = arc_t(k, n_inner);
      px = 1.0 - std::cos(t);
      py = 0.5 - std::sin(t);
    }
    d.x.at(i, 0) = px + noise * gauss(rng);
    d.x.at(i, 1) = py + noise * gauss(rng);
    d.y[i] = label;
  }
  d.provenance = {{"kind", "two_moons"}, {"n", n}, {"noise", noise}, {"seed", seed}};
  d.provenance["scaling"] = minmax_scale(d.x);
  return d;
}

Dataset gen_blobs(std::size_t n, std::size_t classes, double spread, std::uint64_t seed) {
  if (n < 2) throw ValidationError("blobs needs n >= 2");
  if (classes < 1) throw ValidationError("blobs needs at least one class");
  if (spread < 0.0) throw ValidationError("blob spread must be >= 0");
  Rng rng(seed);
  std::uniform_real_distribution<double> box(-10.0, 10.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> centers(2 * classes);
  for (double& c : centers) c = box(rng);
  Dataset d;
  d.x = Tensor(Shape{n, 2});
  d.y.resize(n);
  d.classes = classes;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    d.x.at(i, 0) = centers[2 * c] + spread * gauss(rng);
    d.x.at(i, 1) = centers[2 * c + 1] + spread * gauss(rng);
    d.y[i] = static_cast<int>(c);
  }
  d.provenance = {{"kind", "blobs"}, {"n", n}, {"classes", classes}, {"spread", spread},
                  {"seed", seed}};
  d.provenance["scaling"] = minmax_scale(d.x);
  return d;
}

// ---------------------------------------------------------------------------
// IDX

IdxError::IdxError(Kind kind, std::string file, std::size_t offset, const std::string& detail)
    : IoError(file + " @ offset " + std::to_string(offset) + ": " + detail),
      kind_(kind),
      file_(std::move(file)),
      offset_(offset) {}

namespace {

struct IdxFile {
  std::string name;
  std::vector<unsigned char> bytes;

  std::uint32_t be32(std::size_t off) const {
    if (off + 4 > bytes.size()) {
      throw IdxError(IdxError::Kind::Truncated, name, off, "header truncated");
    }
    return (std::uint32_t{bytes[off]} << 24) | (std::uint32_t{bytes[off + 1]} << 16) |
           (std::uint32_t{bytes[off + 2]} << 8) | std::uint32_t{bytes[off + 3]};
  }
};

IdxFile read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IdxError(IdxError::Kind::Unreadable, p.string(), 0, "cannot open file");
  IdxFile f{p.string(), {}};
  f.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return f;
}

void expect_magic(const IdxFile& f, std::uint32_t magic) {
  const std::uint32_t got = f.be32(0);
  if (got != magic) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "bad magic 0x%08x (expected 0x%08x)", got, magic);
    throw IdxError(IdxError::Kind::BadMagic, f.name, 0, buf);
  }
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const IdxFile img = read_all(images);
  const IdxFile lab = read_all(labels);
  expect_magic(img, kIdxImagesMagic);
  expect_magic(lab, kIdxLabelsMagic);

  const std::size_t n_img = img.be32(4);
  const std::size_t rows = img.be32(8);
  const std::size_t cols = img.be32(12);
  const std::size_t n_lab = lab.be32(4);
  if (n_img != n_lab) {
    throw IdxError(IdxError::Kind::CountMismatch, lab.name, 4,
                   "label count " + std::to_string(n_lab) + " != image count " +
                       std::to_string(n_img) + " in " + img.name);
  }
  const std::size_t pixels = rows * cols;
  const std::size_t img_need = 16 + n_img * pixels;
  if (img.bytes.size() < img_need) {
    throw IdxError(IdxError::Kind::Truncated, img.name, img.bytes.size(),
                   "expected " + std::to_string(img_need) + " bytes");
  }
  if (lab.bytes.size() < 8 + n_lab) {
    throw IdxError(IdxError::Kind::Truncated, lab.name, lab.bytes.size(),
                   "expected " + std::to_string(8 + n_lab) + " bytes");
  }

  Dataset d;
  d.x = Tensor(Shape{n_img, pixels});
  d.y.resize(n_img);
  int max_label = 0;
  for (std::size_t i = 0; i < n_img; ++i) {
    d.y[i] = lab.bytes[8 + i];
    max_label = std::max(max_label, d.y[i]);
  }
  for (std::size_t k = 0; k < n_img * pixels; ++k) {
    d.x[k] = static_cast<double>(img.bytes[16 + k]) / 255.0;
  }
  d.classes = static_cast<std::size_t>(max_label) + 1;
  d.provenance = {{"kind", "idx"}, {"images", images.string()}, {"labels", labels.string()},
                  {"rows", rows}, {"cols", cols}};
  return d;
}

Dataset subset(const Dataset& d, std::size_t n_per_class, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_class(d.classes);
  for (std::size_t i = 0; i < d.size(); ++i) by_class[d.y[i]].push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> picked;
  for (std::size_t c = 0; c < d.classes; ++c) {
    auto& idx = by_class[c];
    if (idx.size() < n_per_class) {
      throw ValidationError("class " + std::to_string(c) + " has only " +
                            std::to_string(idx.size()) + " samples, " +
                            std::to_string(n_per_class) + " requested");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    picked.insert(picked.end(), idx.begin(), idx.begin() + n_per_class);
  }
  std::sort(picked.begin(), picked.end());
  Dataset out = d.rows(picked);
  out.provenance["subset"] = {{"n_per_class", n_per_class}, {"seed", seed}};
  return out;
}

}  // namespace otjr
