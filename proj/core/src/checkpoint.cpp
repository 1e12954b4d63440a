#include "otjr/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "otjr/config.hpp"
#include "otjr/errors.hpp"
#include "otjr/io.hpp"

namespace otjr {

namespace fs = std::filesystem;

std::string encode_le(const std::vector<double>& values) {
  std::string out(values.size() * 8, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) out[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
  return out;
}

std::vector<double> decode_le(const std::string& bytes) {
  if (bytes.size() % 8 != 0) throw IoError("parameter blob length is not a multiple of 8");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= std::uint64_t{static_cast<unsigned char>(bytes[i * 8 + b])} << (8 * b);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

void checkpoint_save(const Params& p, const Manifest& m, const fs::path& dir) {
  if (!(p.spec().widths == m.spec.widths)) {
    throw ContractError("manifest spec does not describe the saved parameters");
  }
  nlohmann::json j = {{"format", "otjr-checkpoint-1"},
                      {"spec", to_json(m.spec)},
                      {"seed", m.seed},
                      {"epoch", m.epoch},
                      {"loss", m.loss},
                      {"metrics", m.metrics},
                      {"config_hash", m.config_hash},
                      {"dataset", m.dataset},
                      {"param_count", p.size()}};
  fs::create_directories(dir);
  write_file_atomic(dir / kParamsFile, encode_le(p.flat()));
  write_file_atomic(dir / kManifestFile, j.dump(2) + "\n");
}

Checkpoint checkpoint_load(const fs::path& dir) {
  const fs::path mpath = dir / kManifestFile;
  const fs::path bpath = dir / kParamsFile;
  if (!fs::exists(mpath)) throw IoError("missing " + mpath.string());
  if (!fs::exists(bpath)) throw IoError("missing " + bpath.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(mpath));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(mpath.string() + ": " + e.what());
  }
  Checkpoint c;
  try {
    c.manifest.spec = parse_model(j.at("spec"));
    c.manifest.seed = j.value("seed", std::uint64_t{0});
    c.manifest.epoch = j.value("epoch", std::size_t{0});
    c.manifest.loss = j.value("loss", std::string{});
    c.manifest.metrics = j.value("metrics", nlohmann::json::object());
    c.manifest.config_hash = j.value("config_hash", std::string{});
    c.manifest.dataset = j.value("dataset", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(mpath.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw IoError(mpath.string() + ": " + e.what());
  }
  Params p(c.manifest.spec);
  const std::uintmax_t expected = p.size() * 8;
  const std::uintmax_t actual = fs::file_size(bpath);
  if (actual != expected) {
    throw IoError(bpath.string() + ": expected " + std::to_string(p.size()) + " values (" +
                  std::to_string(expected) + " bytes), found " + std::to_string(actual) + " bytes");
  }
  p.flat() = decode_le(read_file(bpath));
  c.params = std::move(p);
  c.id = fs::absolute(dir).lexically_normal().filename().string();
  if (c.id.empty()) c.id = fs::absolute(dir).lexically_normal().parent_path().filename().string();
  return c;
}

}  // namespace otjr
