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
#include <span>
#include <string>
#include <vector>

#include "corticast/dataio.hpp"
#include "corticast/matrix.hpp"

namespace corticast::optim {

// scan_age: 4 channels -> pma_scan. birth_age: 4 channels plus pma_scan as a
// constant fifth channel -> ga_birth. challenge: 4 channels -> (ga_birth,
// pma_scan, birthweight).
enum class Task { scan_age, birth_age, challenge };

std::string to_string(Task task);
// Throws std::invalid_argument for unknown names.
Task parse_task(const std::string& text);

std::vector<dataio::Target> task_targets(Task task);
std::size_t task_in_channels(Task task, std::size_t n_feature_channels);
// Model input channel names: the dataset channels, plus "pma_scan" for
// birth_age.
std::vector<std::string> task_channel_names(Task task,
                                            const std::vector<std::string>& feature_channels);

// Model-ready tensors for a list of subjects.
struct TaskData {
  VertexTensor inputs;
  Matrix targets;          // standardized, subjects x K
  Matrix natural_targets;  // weeks / kg, subjects x K
  std::vector<std::size_t> subjects;  // dataset indices, in row order
  std::vector<std::string> subject_ids;

  std::size_t size() const { return subjects.size(); }
};

enum class MissingPolicy {
  error,    // MetadataError listing every subject lacking required values
  exclude,  // silently drop those subjects
};

// Standardizes features channel-by-channel and targets with their own stats.
// `require_targets = false` builds inputs for prediction only (targets
// are then NaN where absent). challenge uses MissingPolicy::exclude for
// missing targets; missing input confounds always follow `policy`.
TaskData build_inputs(const dataio::Dataset& dataset, Task task,
                      const dataio::StandardizationStats& stats,
                      std::span<const std::size_t> subjects, MissingPolicy policy,
                      bool require_targets = true);

// Default policy per task: error for scan_age / birth_age, exclude for
// challenge.
TaskData build_inputs(const dataio::Dataset& dataset, Task task,
                      const dataio::StandardizationStats& stats,
                      std::span<const std::size_t> subjects);

// Rows `rows` of `data` gathered into a batch.
TaskData gather(const TaskData& data, std::span<const std::size_t> rows);

}  // namespace corticast::optim
