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

#include "corticast/task.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "corticast/error.hpp"

namespace corticast::optim {

using dataio::Target;

std::string to_string(Task task) {
  switch (task) {
    case Task::scan_age: return "scan_age";
    case Task::birth_age: return "birth_age";
    case Task::challenge: return "challenge";
  }
  return "scan_age";
}

Task parse_task(const std::string& text) {
  if (text == "scan_age") return Task::scan_age;
  if (text == "birth_age") return Task::birth_age;
  if (text == "challenge") return Task::challenge;
  throw std::invalid_argument("unknown task '" + text +
                              "' (expected scan_age, birth_age or challenge)");
}

std::vector<Target> task_targets(Task task) {
  switch (task) {
    case Task::scan_age: return {Target::pma_scan};
    case Task::birth_age: return {Target::ga_birth};
    case Task::challenge: return {Target::ga_birth, Target::pma_scan, Target::birthweight};
  }
  return {};
}

std::size_t task_in_channels(Task task, std::size_t n_feature_channels) {
  return n_feature_channels + (task == Task::birth_age ? 1 : 0);
}

std::vector<std::string> task_channel_names(Task task,
                                            const std::vector<std::string>& feature_channels) {
  auto names = feature_channels;
  if (task == Task::birth_age) names.push_back("pma_scan");
  return names;
}

TaskData build_inputs(const dataio::Dataset& dataset, Task task,
                      const dataio::StandardizationStats& stats,
                      std::span<const std::size_t> subjects, MissingPolicy policy,
                      bool require_targets) {
  const auto targets = task_targets(task);
  const bool confound = task == Task::birth_age;

  std::vector<std::size_t> kept;
  std::vector<std::string> missing;
  for (auto s : subjects) {
    const auto& meta = dataset.subjects.at(s).meta;
    bool ok = !confound || meta.pma_scan.has_value();
    if (require_targets) {
      for (auto t : targets) ok = ok && dataio::target_value(meta, t).has_value();
    }
    if (ok) {
      kept.push_back(s);
    } else {
      missing.push_back(meta.subject_id);
    }
  }
  if (!missing.empty() && policy == MissingPolicy::error) {
    throw MetadataError("task " + to_string(task) + ": subjects missing required metadata",
                        missing);
  }

  // Feature channel mapping by name.
  std::vector<const dataio::ScalarStats*> channel_stats;
  for (const auto& name : dataset.channel_names) {
    const auto it = std::find(stats.channel_names.begin(), stats.channel_names.end(), name);
    if (it == stats.channel_names.end()) {
      throw SchemaError("build_inputs: no statistics for channel '" + name + "'");
    }
    channel_stats.push_back(&stats.channels[static_cast<std::size_t>(it - stats.channel_names.begin())]);
  }
  const dataio::ScalarStats* confound_stats = confound ? &stats.require(Target::pma_scan) : nullptr;
  std::vector<const dataio::ScalarStats*> target_stats;
  for (auto t : targets) {
    target_stats.push_back(require_targets ? &stats.require(t) : stats.target(t) ? &*stats.target(t) : nullptr);
  }

  const std::size_t n_vertices = dataset.vertex_count();
  const std::size_t n_features = dataset.channel_names.size();
  TaskData data;
  data.inputs = VertexTensor(kept.size(), n_vertices, task_in_channels(task, n_features));
  data.targets = Matrix(kept.size(), targets.size());
  data.natural_targets = Matrix(kept.size(), targets.size());
  data.subjects = kept;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t row = 0; row < kept.size(); ++row) {
    const auto& subject = dataset.subjects[kept[row]];
    data.subject_ids.push_back(subject.meta.subject_id);
    if (subject.features.vertex_count() != n_vertices) {
      throw SchemaError("subject " + subject.meta.subject_id + ": vertex count mismatch");
    }
    for (std::size_t c = 0; c < n_features; ++c) {
      const auto channel = subject.features.channel(c);
      for (std::size_t v = 0; v < n_vertices; ++v) {
        data.inputs.at(row, v, c) = channel_stats[c]->apply(channel[v]);
      }
    }
    if (confound) {
      const double z = confound_stats->apply(*subject.meta.pma_scan);
      for (std::size_t v = 0; v < n_vertices; ++v) data.inputs.at(row, v, n_features) = z;
    }
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const auto value = dataio::target_value(subject.meta, targets[k]);
      data.natural_targets(row, k) = value.value_or(nan);
      data.targets(row, k) = value && target_stats[k] ? target_stats[k]->apply(*value) : nan;
    }
  }
  return data;
}

TaskData build_inputs(const dataio::Dataset& dataset, Task task,
                      const dataio::StandardizationStats& stats,
                      std::span<const std::size_t> subjects) {
  return build_inputs(dataset, task, stats, subjects,
                      task == Task::challenge ? MissingPolicy::exclude : MissingPolicy::error);
}

TaskData gather(const TaskData& data, std::span<const std::size_t> rows) {
  TaskData out;
  const std::size_t v = data.inputs.vertices;
  const std::size_t c = data.inputs.channels();
  const std::size_t k = data.targets.cols();
  out.inputs = VertexTensor(rows.size(), v, c);
  out.targets = Matrix(rows.size(), k);
  out.natural_targets = Matrix(rows.size(), k);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    const auto src = data.inputs.values.values().subspan(r * v * c, v * c);
    std::copy(src.begin(), src.end(), out.inputs.values.values().begin() +
                                          static_cast<std::ptrdiff_t>(i * v * c));
    for (std::size_t j = 0; j < k; ++j) {
      out.targets(i, j) = data.targets(r, j);
      out.natural_targets(i, j) = data.natural_targets(r, j);
    }
    out.subjects.push_back(data.subjects[r]);
    out.subject_ids.push_back(data.subject_ids[r]);
  }
  return out;
}

}  // namespace corticast::optim
