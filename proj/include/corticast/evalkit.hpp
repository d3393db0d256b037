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
#include <span>
#include <string>
#include <vector>

#include "corticast/checkpoint.hpp"
#include "corticast/dataio.hpp"
#include "corticast/optim.hpp"
#include "corticast/task.hpp"

namespace corticast::evalkit {

// Mean absolute error. Throws std::invalid_argument on empty or unequal input.
double mae(std::span<const double> predictions, std::span<const double> targets);

// Residuals and MAE in natural units (weeks) for output `output_index`.
struct EvalReport {
  optim::Task task = optim::Task::scan_age;
  std::string space;
  std::string split;
  std::size_t n_subjects = 0;
  std::size_t output_index = 0;
  double mae = 0.0;
  std::vector<std::string> subject_ids;
  std::vector<double> predictions;
  std::vector<double> residuals;  // prediction - target
};

// Predictions of `model` on `subjects` mapped back to natural units with the
// stats' target statistics. MAE is over output 0; for the challenge head that
// is ga_birth.
EvalReport evaluate(const autonet::MlpModel& model, const dataio::Dataset& dataset,
                    const dataio::StandardizationStats& stats, optim::Task task,
                    std::span<const std::size_t> subjects, const std::string& split_label,
                    const std::string& space = "native");

nlohmann::json to_json(const EvalReport& report);

enum class ProtocolKind { runs, folds };

struct ProtocolReport {
  ProtocolKind kind = ProtocolKind::runs;
  std::vector<double> maes;
  std::vector<std::uint64_t> seeds;
  double best = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population
};

ProtocolReport summarize(ProtocolKind kind, std::vector<double> maes,
                         std::vector<std::uint64_t> seeds = {});

nlohmann::json to_json(const ProtocolReport& report);
// `run_or_fold,mae_weeks`, one row per run or fold.
std::string to_csv(const ProtocolReport& report);

struct RunResult {
  autonet::Checkpoint checkpoint;
  optim::TrainLog log;
  EvalReport test;
};

// Trains on `split.train` (statistics fitted there too), selects on
// `split.val`, evaluates on `split.test`.
using Trainer = std::function<RunResult(const dataio::Dataset&, const dataio::SplitIndices&,
                                        std::uint64_t seed)>;

struct ExperimentConfig {
  optim::Task task = optim::Task::scan_age;
  autonet::ModelConfig model;  // in_channels and out_units are set from the task
  optim::TrainConfig train;    // seed is replaced by the run seed
  std::string space = "native";
};

Trainer make_trainer(const ExperimentConfig& config);

// Run seed `s` initializes weights from derive_seed(s, 0) and shuffles
// batches from the TrainConfig seed s.
RunResult train_and_evaluate(const ExperimentConfig& config, const dataio::Dataset& dataset,
                             const dataio::SplitIndices& split, std::uint64_t seed);

struct ProtocolOutcome {
  ProtocolReport report;
  std::vector<RunResult> runs;
};

// One training per seed on the dataset's fixed split; best and population std
// of the test MAEs. Seeds must be distinct.
ProtocolOutcome run_protocol(const dataio::Dataset& dataset,
                             std::span<const std::uint64_t> seeds, const Trainer& trainer);

// k folds from make_cv_folds(dataset, k, seed), each trained with `seed`.
ProtocolOutcome cross_validate(const dataio::Dataset& dataset, std::size_t k,
                               std::uint64_t seed, const Trainer& trainer);

}  // namespace corticast::evalkit
