/*
 * Copyright 2026 The Corticast Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "corticast/dataio.hpp"
#include "corticast/model.hpp"

namespace corticast::autonet {

struct Checkpoint {
  MlpModel model;
  std::optional<dataio::StandardizationStats> stats;
  // Names of the model's input channels, in order.
  std::vector<std::string> channel_names;
  std::string task;
};

// ".mlpc": "MLPC", u32 version 1, u32 header_length, UTF-8 JSON header
// (config, channel names, task, standardization stats, array manifest),
// then every array of MlpModel::all_arrays() as little-endian f64.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
// Validates the whole file before returning; throws FormatError otherwise.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const dataio::StandardizationStats& stats);
dataio::StandardizationStats stats_from_json(const nlohmann::json& j);

}  // namespace corticast::autonet
