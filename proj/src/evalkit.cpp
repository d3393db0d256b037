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

#include "corticast/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "corticast/error.hpp"
#include "corticast/random.hpp"

namespace corticast::evalkit {

using nlohmann::json;

double mae(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.empty()) throw std::invalid_argument("mae: empty input");
  if (predictions.size() != targets.size()) throw std::invalid_argument("mae: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    sum += std::abs(predictions[i] - targets[i]);
  }
  return sum / static_cast<double>(predictions.size());
}

EvalReport evaluate(const autonet::MlpModel& model, const dataio::Dataset& dataset,
                    const dataio::StandardizationStats& stats, optim::Task task,
                    std::span<const std::size_t> subjects, const std::string& split_label,
                    const std::string& space) {
  const auto data = optim::build_inputs(dataset, task, stats, subjects);
  EvalReport report;
  report.task = task;
  report.space = space;
  report.split = split_label;
  report.n_subjects = data.size();
  report.subject_ids = data.subject_ids;
  if (data.size() == 0) throw std::invalid_argument("evaluate: no subjects to evaluate");
  const Matrix pred = autonet::predict(model, data.inputs);
  const auto& target_stats = stats.require(optim::task_targets(task)[0]);
  std::vector<double> targets;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double natural = target_stats.invert(pred(i, 0));
    report.predictions.push_back(natural);
    report.residuals.push_back(natural - data.natural_targets(i, 0));
    targets.push_back(data.natural_targets(i, 0));
  }
  report.mae = mae(report.predictions, targets);
  return report;
}

json to_json(const EvalReport& r) {
  json rows = json::array();
  for (std::size_t i = 0; i < r.subject_ids.size(); ++i) {
    rows.push_back(json{{"subject_id", r.subject_ids[i]},
                        {"prediction_weeks", r.predictions[i]},
                        {"residual_weeks", r.residuals[i]}});
  }
  return json{{"task", optim::to_string(r.task)}, {"space", r.space},
              {"split", r.split},                 {"n_subjects", r.n_subjects},
              {"output_index", r.output_index},   {"mae_weeks", r.mae},
              {"subjects", rows}};
}

ProtocolReport summarize(ProtocolKind kind, std::vector<double> maes,
                         std::vector<std::uint64_t> seeds) {
  if (maes.empty()) throw std::invalid_argument("summarize: no runs");
  ProtocolReport report;
  report.kind = kind;
  report.best = *std::min_element(maes.begin(), maes.end());
  double sum = 0.0;
  for (double m : maes) sum += m;
  report.mean = sum / static_cast<double>(maes.size());
  double sq = 0.0;
  for (double m : maes) sq += (m - report.mean) * (m - report.mean);
  report.std = std::sqrt(sq / static_cast<double>(maes.size()));
  report.maes = std::move(maes);
  report.seeds = std::move(seeds);
  return report;
}

json to_json(const ProtocolReport& r) {
  return json{{"kind", r.kind == ProtocolKind::runs ? "runs" : "folds"},
              {"mae_weeks", r.maes},
              {"seeds", r.seeds},
              {"best_mae_weeks", r.best},
              {"mean_mae_weeks", r.mean},
              {"std_mae_weeks", r.std}};
}

std::string to_csv(const ProtocolReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "run_or_fold,mae_weeks\n";
  for (std::size_t i = 0; i < r.maes.size(); ++i) out << i << ',' << r.maes[i] << '\n';
  return out.str();
}

RunResult train_and_evaluate(const ExperimentConfig& config, const dataio::Dataset& dataset,
                             const dataio::SplitIndices& split, std::uint64_t seed) {
  if (split.train.empty() || split.val.empty()) {
    throw std::invalid_argument("train_and_evaluate: train and validation splits must be non-empty");
  }
  const auto stats = dataio::fit_standardization(dataset, split.train);
  const auto train_data = optim::build_inputs(dataset, config.task, stats, split.train);
  const auto val_data = optim::build_inputs(dataset, config.task, stats, split.val);

  autonet::ModelConfig model_config = config.model;
  model_config.in_channels = optim::task_in_channels(config.task, dataset.channel_names.size());
  model_config.out_units = optim::task_targets(config.task).size();
  optim::TrainConfig train_config = config.train;
  train_config.seed = seed;

  auto trained = optim::train(autonet::init_model(model_config, derive_seed(seed, 0)),
                              train_data, val_data, train_config);
  RunResult result;
  result.log = std::move(trained.log);
  result.checkpoint.model = std::move(trained.model);
  result.checkpoint.stats = stats;
  result.checkpoint.channel_names = optim::task_channel_names(config.task, dataset.channel_names);
  result.checkpoint.task = optim::to_string(config.task);
  if (!split.test.empty()) {
    result.test = evaluate(result.checkpoint.model, dataset, stats, config.task, split.test,
                           "test", config.space);
  }
  return result;
}

Trainer make_trainer(const ExperimentConfig& config) {
  return [config](const dataio::Dataset& dataset, const dataio::SplitIndices& split,
                  std::uint64_t seed) { return train_and_evaluate(config, dataset, split, seed); };
}

ProtocolOutcome run_protocol(const dataio::Dataset& dataset,
                             std::span<const std::uint64_t> seeds, const Trainer& trainer) {
  if (seeds.empty()) throw std::invalid_argument("run_protocol: at least one run required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw std::invalid_argument("run_protocol: seeds must be distinct");
  }
  const auto split = dataio::split_indices(dataset);
  ProtocolOutcome outcome;
  std::vector<double> maes;
  for (std::size_t r = 0; r < seeds.size(); ++r) {
    try {
      outcome.runs.push_back(trainer(dataset, split, seeds[r]));
    } catch (const Error& e) {
      throw Error("run " + std::to_string(r) + ": " + e.what());
    }
    maes.push_back(outcome.runs.back().test.mae);
  }
  outcome.report = summarize(ProtocolKind::runs, std::move(maes),
                             std::vector<std::uint64_t>(seeds.begin(), seeds.end()));
  return outcome;
}

ProtocolOutcome cross_validate(const dataio::Dataset& dataset, std::size_t k,
                               std::uint64_t seed, const Trainer& trainer) {
  const auto folds = dataio::make_cv_folds(dataset, k, seed);
  ProtocolOutcome outcome;
  std::vector<double> maes;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    try {
      outcome.runs.push_back(trainer(dataset, folds[f], seed));
    } catch (const Error& e) {
      throw Error("fold " + std::to_string(f) + ": " + e.what());
    }
    maes.push_back(outcome.runs.back().test.mae);
  }
  outcome.report = summarize(ProtocolKind::folds, std::move(maes),
                             std::vector<std::uint64_t>(folds.size(), seed));
  return outcome;
}

}  // namespace corticast::evalkit
