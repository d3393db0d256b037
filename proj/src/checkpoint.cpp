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

#include "corticast/checkpoint.hpp"

#include "corticast/binary_io.hpp"
#include "corticast/error.hpp"

namespace corticast::autonet {

using nlohmann::json;

namespace {

constexpr std::uint32_t kVersion = 1;

json scalar_stats(const dataio::ScalarStats& s) { return json{{"mean", s.mean}, {"std", s.std}}; }

dataio::ScalarStats scalar_stats_from(const json& j) {
  return {j.at("mean").get<double>(), j.at("std").get<double>()};
}

}  // namespace

json to_json(const ModelConfig& c) {
  return json{{"in_channels", c.in_channels},
              {"hidden_units", c.hidden_units},
              {"n_blocks", c.n_blocks},
              {"out_units", c.out_units},
              {"batchnorm_epsilon", c.batchnorm_epsilon},
              {"batchnorm_momentum", c.batchnorm_momentum},
              {"activation", c.activation == Activation::tanh ? "tanh" : "identity"}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.in_channels = j.at("in_channels").get<std::size_t>();
  c.hidden_units = j.at("hidden_units").get<std::size_t>();
  c.n_blocks = j.at("n_blocks").get<std::size_t>();
  c.out_units = j.at("out_units").get<std::size_t>();
  c.batchnorm_epsilon = j.at("batchnorm_epsilon").get<double>();
  c.batchnorm_momentum = j.at("batchnorm_momentum").get<double>();
  const auto act = j.at("activation").get<std::string>();
  if (act == "tanh") {
    c.activation = Activation::tanh;
  } else if (act == "identity") {
    c.activation = Activation::identity;
  } else {
    throw FormatError("unknown activation '" + act + "'");
  }
  c.validate();
  return c;
}

json to_json(const dataio::StandardizationStats& stats) {
  json channels = json::array();
  for (std::size_t c = 0; c < stats.channels.size(); ++c) {
    channels.push_back(json{{"name", stats.channel_names[c]},
                            {"mean", stats.channels[c].mean},
                            {"std", stats.channels[c].std}});
  }
  json targets = json::object();
  for (auto t : {dataio::Target::ga_birth, dataio::Target::pma_scan, dataio::Target::birthweight}) {
    if (const auto& s = stats.target(t)) targets[dataio::to_string(t)] = scalar_stats(*s);
  }
  return json{{"channels", channels}, {"targets", targets}};
}

dataio::StandardizationStats stats_from_json(const json& j) {
  dataio::StandardizationStats stats;
  for (const auto& c : j.at("channels")) {
    stats.channel_names.push_back(c.at("name").get<std::string>());
    stats.channels.push_back(scalar_stats_from(c));
  }
  const auto& targets = j.at("targets");
  if (targets.contains("ga_birth")) stats.ga_birth = scalar_stats_from(targets["ga_birth"]);
  if (targets.contains("pma_scan")) stats.pma_scan = scalar_stats_from(targets["pma_scan"]);
  if (targets.contains("birthweight")) {
    stats.birthweight = scalar_stats_from(targets["birthweight"]);
  }
  return stats;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint) {
  const auto& model = checkpoint.model;
  json manifest = json::array();
  for (const auto& a : model.all_arrays()) {
    manifest.push_back(json{{"name", a.name}, {"shape", {a.rows, a.cols}}});
  }
  json header{{"config", to_json(model.config())},
              {"channel_names", checkpoint.channel_names},
              {"task", checkpoint.task},
              {"stats", checkpoint.stats ? to_json(*checkpoint.stats) : json(nullptr)},
              {"arrays", manifest}};
  const std::string text = header.dump();

  ByteWriter out;
  out.text("MLPC");
  out.u32(kVersion);
  out.u32(static_cast<std::uint32_t>(text.size()));
  out.text(text);
  for (const auto& a : model.all_arrays()) {
    for (double v : a.values) out.f64(v);
  }
  return out.release();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes, "mlpc");
  in.expect_magic("MLPC");
  const auto version = in.u32();
  if (version != kVersion) {
    throw FormatError("mlpc: unsupported version " + std::to_string(version));
  }
  const auto header_length = in.u32();
  const std::string text = in.text(header_length);
  Checkpoint checkpoint;
  try {
    const json header = json::parse(text);
    checkpoint.model = MlpModel(model_config_from_json(header.at("config")));
    checkpoint.channel_names = header.at("channel_names").get<std::vector<std::string>>();
    checkpoint.task = header.at("task").get<std::string>();
    if (!header.at("stats").is_null()) checkpoint.stats = stats_from_json(header["stats"]);

    const auto& manifest = header.at("arrays");
    auto arrays = checkpoint.model.all_arrays();
    if (manifest.size() != arrays.size()) throw FormatError("mlpc: array manifest size mismatch");
    for (std::size_t i = 0; i < arrays.size(); ++i) {
      const auto shape = manifest[i].at("shape").get<std::vector<std::size_t>>();
      if (manifest[i].at("name").get<std::string>() != arrays[i].name || shape.size() != 2 ||
          shape[0] != arrays[i].rows || shape[1] != arrays[i].cols) {
        throw FormatError("mlpc: array '" + arrays[i].name + "' does not match the config");
      }
    }
    for (auto& a : arrays) {
      for (double& v : a.values) v = in.f64();
    }
    in.expect_end();
  } catch (const json::exception& e) {
    throw FormatError(std::string("mlpc: bad header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("mlpc: bad config: ") + e.what());
  }
  for (const auto& b : checkpoint.model.blocks()) {
    for (double v : b.bn_running_var) {
      if (!(v > 0.0)) throw FormatError("mlpc: non-positive running variance");
    }
  }
  checkpoint.model.mode = Mode::eval;
  return checkpoint;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace corticast::autonet
