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
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "corticast/matrix.hpp"
#include "corticast/model.hpp"
#include "corticast/task.hpp"

namespace corticast::optim {

struct LossResult {
  double loss = 0.0;
  Matrix gradient;  // d loss / d predictions
};

// sum_k w_k * mean_n (pred_nk - target_nk)^2.
LossResult mse_loss(const Matrix& predictions, const Matrix& targets,
                    std::span<const double> target_weights);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;

  static AdamState zeros_like(std::span<const std::vector<double>> shapes);
  static AdamState zeros_like(const autonet::MlpModel& model);
};

// Bias-corrected Adam; the step counter is incremented before the update.
// Throws NumericError on a non-finite gradient, leaving params untouched.
void adam_step(std::span<const std::span<double>> params, const autonet::ParamGrads& grads,
               AdamState& state, const AdamConfig& config);
void adam_step(autonet::MlpModel& model, const autonet::ParamGrads& grads, AdamState& state,
               const AdamConfig& config);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t patience = 200;
  std::size_t max_epochs = 20000;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // One weight per output; empty means all ones.
  std::vector<double> target_weights;
  // When false, wall_ms is logged as 0 so logs are byte-reproducible.
  bool record_wall_time = true;

  void validate() const;
  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_epsilon}; }
  std::vector<double> weights_for(std::size_t outputs) const;
};

// Patience rule on the running strict minimum of the validation loss.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

  // Records the loss of `epoch`; returns true when it is a new strict minimum.
  bool observe(std::size_t epoch, double loss);
  bool should_stop() const { return since_best_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  std::size_t patience_;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double wall_ms = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t stopped_epoch = 0;
  std::uint64_t seed = 0;
};

std::string train_log_csv(const TrainLog& log);
std::string train_summary_json(const TrainLog& log);

// Consecutive mini-batches over `order`; a trailing singleton joins the
// batch before it.
std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> order,
                                                   std::size_t batch_size);

struct TrainResult {
  autonet::MlpModel model;  // best-validation snapshot, eval mode
  TrainLog log;
};

// Mini-batch Adam with early stopping; returns the best-validation snapshot
// (parameters and running statistics). Throws std::invalid_argument on empty
// splits and NumericError on a non-finite loss.
TrainResult train(autonet::MlpModel model, const TaskData& train_set, const TaskData& val_set,
                  const TrainConfig& config);

// Eval-mode loss on a full set.
double evaluate_loss(const autonet::MlpModel& model, const TaskData& data,
                     std::span<const double> target_weights);

}  // namespace corticast::optim
