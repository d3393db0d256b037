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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "corticast/checkpoint.hpp"
#include "corticast/dataio.hpp"
#include "corticast/matrix.hpp"
#include "corticast/mesh.hpp"
#include "corticast/model.hpp"

namespace corticast::attribution {

enum class Method { deeplift_rescale, integrated_gradients, exact_shapley };
std::string to_string(Method method);

// Which output is explained, and the factor mapping it to natural units
// (the target std, so attributions are in weeks).
struct OutputSpec {
  std::size_t index = 0;
  double scale = 1.0;
};

// One subject's attributions: vertices x input channels.
struct Attribution {
  Method method = Method::deeplift_rescale;
  Matrix values;
  std::size_t background_n = 0;
  std::size_t output_index = 0;
  double output = 0.0;            // scaled f(x)
  double reference_output = 0.0;  // scaled mean over references of f(r)
  double completeness_residual = 0.0;
};

// Multipliers propagated with the rescale rule, averaged over `backgrounds`
// (each vertices x channels, same standardization as `input`). The residual
// is the largest per-background |sum - (f(x) - f(r))|. Throws
// ContractViolation for a model not in eval mode.
Attribution deeplift_rescale(const autonet::MlpModel& model, const Matrix& input,
                             std::span<const Matrix> backgrounds, OutputSpec output = {});

// Gradient of the explained output with respect to each subject of `points`,
// same layout as the input values.
using GradientFn = std::function<Matrix(const VertexTensor& points)>;
using OutputFn = std::function<double(const Matrix& input)>;

GradientFn model_gradient(const autonet::MlpModel& model, OutputSpec output = {});
OutputFn model_output(const autonet::MlpModel& model, OutputSpec output = {});

// Midpoint-rule path integral. Throws std::invalid_argument for steps < 1.
Matrix integrated_gradients(const GradientFn& gradient, const Matrix& input,
                            const Matrix& baseline, std::size_t steps = 256);
Attribution integrated_gradients(const autonet::MlpModel& model, const Matrix& input,
                                 const Matrix& baseline, std::size_t steps = 256,
                                 OutputSpec output = {});

constexpr std::size_t kMaxShapleyCells = 16;

// Exact Shapley values of the n-player game `value`, where bit i of the
// coalition mask marks player i present. Throws std::invalid_argument for
// n > kMaxShapleyCells.
std::vector<double> shapley_values(std::size_t n,
                                   const std::function<double(std::uint32_t)>& value);
// Players are input cells in row-major order; absent cells take baseline
// values.
Attribution exact_shapley(const autonet::MlpModel& model, const Matrix& input,
                          const Matrix& baseline, OutputSpec output = {});

// `count` training subjects drawn without replacement with `seed`, sorted.
std::vector<std::size_t> choose_backgrounds(std::span<const std::size_t> train, std::size_t count,
                                            std::uint64_t seed);

// Model-ready inputs of each subject as vertices x channels matrices.
std::vector<Matrix> subject_inputs(const autonet::Checkpoint& checkpoint,
                                   const dataio::Dataset& dataset,
                                   std::span<const std::size_t> subjects);

// Output spec for a checkpoint's output, scaled by its target std.
OutputSpec output_spec(const autonet::Checkpoint& checkpoint, std::size_t output_index = 0);

enum class Group { preterm, term };
std::string to_string(Group group);
constexpr double kPretermThreshold = 37.0;

// Per-vertex means over one group. `features` has channels mean_<c> of the
// raw (unstandardized) dataset channels; `attributions` has signed_attr_<c>
// (signed mean) and attr_<c> (mean magnitude) per model input channel.
struct GroupMap {
  Group group = Group::preterm;
  std::size_t n_subjects = 0;
  std::vector<std::string> subject_ids;
  mesh::FeatureField features;
  mesh::FeatureField attributions;
};

struct GroupMaps {
  std::optional<GroupMap> preterm;
  std::optional<GroupMap> term;
};

// Preterm is ga_birth < 37, term ga_birth > 37; others are left out. A group
// without subjects is absent.
GroupMaps group_maps(const dataio::Dataset& dataset, std::span<const std::size_t> subjects,
                     std::span<const Attribution> attributions,
                     const std::vector<std::string>& input_channels);

// Mean over vertices of a group's attr_<c> magnitude maps, per input channel.
std::vector<double> channel_importance(const GroupMap& map,
                                       const std::vector<std::string>& input_channels);

// Validation and test subjects, the set group maps are drawn from.
std::vector<std::size_t> evaluation_subjects(const dataio::Dataset& dataset);

nlohmann::json sidecar_json(const Attribution& attribution);
// attr_<c> channels of one attribution, ready for save_sfeat.
mesh::FeatureField to_field(const Attribution& attribution,
                            const std::vector<std::string>& input_channels);

}  // namespace corticast::attribution
