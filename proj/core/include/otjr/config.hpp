#pragma once

// JSON run configuration. Every object is checked against its known keys
// before any work starts.

#include <filesystem>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "otjr/attacks.hpp"
#include "otjr/data.hpp"
#include "otjr/models.hpp"
#include "otjr/training.hpp"

namespace otjr {

struct DatasetSpec {
  nlohmann::json block;  // validated copy of the "dataset" object

  /// Train and test splits described by the block.
  std::pair<Dataset, Dataset> load() const;
  Dataset load_test() const;
};

struct RunConfig {
  DatasetSpec dataset;
  MLPSpec model;
  TrainConfig train;
  std::filesystem::path output;
  nlohmann::json source;  // normalized document used for hashing

  std::string hash() const;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

DatasetSpec parse_dataset(const nlohmann::json& j);
MLPSpec parse_model(const nlohmann::json& j);
AttackConfig parse_attack_config(const nlohmann::json& j, AttackConfig defaults = {});
AttackSpec parse_attack_spec(const nlohmann::json& j);
LossSpec parse_loss(const nlohmann::json& j);
TrainConfig parse_train(const nlohmann::json& j);

nlohmann::json to_json(const MLPSpec& s);
nlohmann::json to_json(const AttackConfig& c);
nlohmann::json to_json(const AttackSpec& a);
nlohmann::json to_json(const LossSpec& s);
nlohmann::json to_json(const TrainConfig& c);

}  // namespace otjr
