#pragma once

// A checkpoint is a directory holding manifest.json and params.bin, the flat
// parameter vector as little-endian 64-bit floats.

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "otjr/models.hpp"

namespace otjr {

struct Manifest {
  MLPSpec spec;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::string loss;
  nlohmann::json metrics = nlohmann::json::object();
  std::string config_hash;
  nlohmann::json dataset = nlohmann::json::object();
};

struct Checkpoint {
  Params params;
  Manifest manifest;
  std::string id;  // directory name
};

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kParamsFile = "params.bin";

void checkpoint_save(const Params& p, const Manifest& m, const std::filesystem::path& dir);
Checkpoint checkpoint_load(const std::filesystem::path& dir);

std::string encode_le(const std::vector<double>& values);
std::vector<double> decode_le(const std::string& bytes);

}  // namespace otjr
