#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace otjr {

/// Writes `content` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);
/// 16 hex digits of FNV-1a over the canonical (sorted-key) JSON dump.
std::string json_hash(const nlohmann::json& j);

/// Shortest text that round-trips the double; NaN becomes an empty field.
std::string format_double(double v);

struct CsvTable {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// "# <metadata json>", header line, rows.
  std::string render() const;
  void write(const std::filesystem::path& path) const;
};

}  // namespace otjr
