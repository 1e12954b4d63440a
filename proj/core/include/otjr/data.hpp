#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "otjr/errors.hpp"
#include "otjr/tensor.hpp"

namespace otjr {

struct Dataset {
  Tensor x;  // (N, I), entries in [0, 1]
  std::vector<int> y;
  std::size_t classes = 0;
  std::string split = "train";
  nlohmann::json provenance = nlohmann::json::object();

  std::size_t size() const { return y.size(); }
  std::size_t inputs() const { return x.cols(); }
  /// Throws ValidationError when rows, labels or value ranges disagree.
  void validate() const;
  Dataset rows(std::span<const std::size_t> index) const;
};

/// Two interleaved half circles, labels alternating 0/1, scaled into [0,1]^2.
Dataset gen_two_moons(std::size_t n, double noise, std::uint64_t seed);
/// Isotropic Gaussian blobs around centers drawn in [-10,10]^2, scaled into [0,1]^2.
Dataset gen_blobs(std::size_t n, std::size_t classes, double spread, std::uint64_t seed);

class IdxError : public IoError {
 public:
  enum class Kind { BadMagic, Truncated, CountMismatch, Unreadable };

  IdxError(Kind kind, std::string file, std::size_t offset, const std::string& detail);
  Kind kind() const { return kind_; }
  const std::string& file() const { return file_; }
  std::size_t offset() const { return offset_; }

 private:
  Kind kind_;
  std::string file_;
  std::size_t offset_;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Reads an MNIST-format image/label pair; pixels are scaled by 1/255.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Exactly `n_per_class` rows of every class, picked by a seeded shuffle and
/// kept in their original order.
Dataset subset(const Dataset& d, std::size_t n_per_class, std::uint64_t seed);

}  // namespace otjr
