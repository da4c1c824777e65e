#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "bvgae/model.hpp"
#include "bvgae/simulate.hpp"

namespace bvgae {

using Json = nlohmann::ordered_json;

Json to_json(const ModelConfig& c);
// Starts from `base` and overrides the keys present in `j`. Unknown keys
// are rejected.
ModelConfig model_config_from_json(const Json& j, ModelConfig base = {});

Json to_json(const SimSetting& s);
SimSetting sim_setting_from_json(const Json& j, SimSetting base = {});

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

// Weight values are stored as their IEEE-754 bit patterns, so a reload is
// bit-exact.
Json checkpoint_json(const TrainedModel& model);
TrainedModel checkpoint_from_json(const Json& j);
void save_checkpoint(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_checkpoint(const std::filesystem::path& path);

Json read_json(const std::filesystem::path& path);

// FNV-1a over the compact dump.
std::uint64_t config_hash(const Json& j);
std::string hex64(std::uint64_t v);

}  // namespace bvgae
