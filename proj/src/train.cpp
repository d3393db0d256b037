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

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "corticast/error.hpp"
#include "corticast/optim.hpp"
#include "corticast/random.hpp"

namespace corticast::optim {

TrainResult train(autonet::MlpModel model, const TaskData& train_set, const TaskData& val_set,
                  const TrainConfig& config) {
  config.validate();
  if (train_set.size() == 0) throw std::invalid_argument("train: empty training split");
  if (val_set.size() == 0) throw std::invalid_argument("train: empty validation split");
  const auto& model_config = model.config();
  if (train_set.targets.cols() != model_config.out_units ||
      val_set.targets.cols() != model_config.out_units) {
    throw std::invalid_argument("train: target columns do not match the model's outputs");
  }
  if (!all_finite(train_set.targets.values()) || !all_finite(val_set.targets.values())) {
    throw std::invalid_argument("train: training and validation targets must be finite");
  }
  const auto weights = config.weights_for(model_config.out_units);
  const auto adam = config.adam();

  model.mode = autonet::Mode::train;
  AdamState state = AdamState::zeros_like(model);
  Rng shuffler(derive_seed(config.seed, 1));
  std::vector<std::size_t> order(train_set.size());

  TrainResult result;
  result.log.seed = config.seed;
  EarlyStopper stopper(config.patience);
  autonet::MlpModel best = model;

  using clock = std::chrono::steady_clock;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto started = clock::now();
    std::iota(order.begin(), order.end(), 0);
    shuffler.shuffle(std::span(order));

    double weighted_loss = 0.0;
    for (const auto& rows : make_batches(order, config.batch_size)) {
      const TaskData batch = gather(train_set, rows);
      auto forward = autonet::model_forward(model, batch.inputs, autonet::Mode::train);
      const auto loss = mse_loss(forward.predictions, batch.targets, weights);
      if (!std::isfinite(loss.loss)) throw NumericError(epoch, "non-finite training loss");
      const auto backward = autonet::model_backward(model, forward.cache, loss.gradient);
      try {
        adam_step(model, backward.params, state, adam);
      } catch (const NumericError& e) {
        throw NumericError(epoch, e.what());
      }
      weighted_loss += loss.loss * static_cast<double>(rows.size());
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = weighted_loss / static_cast<double>(train_set.size());
    record.val_loss = evaluate_loss(model, val_set, weights);
    if (!std::isfinite(record.val_loss)) throw NumericError(epoch, "non-finite validation loss");
    if (config.record_wall_time) {
      record.wall_ms =
          std::chrono::duration<double, std::milli>(clock::now() - started).count();
    }
    result.log.epochs.push_back(record);
    result.log.stopped_epoch = epoch;

    if (stopper.observe(epoch, record.val_loss)) best = model;
    if (stopper.should_stop()) break;
  }
  result.log.best_epoch = stopper.best_epoch();
  result.log.best_val_loss = stopper.best_loss();
  best.mode = autonet::Mode::eval;
  result.model = std::move(best);
  return result;
}

}  // namespace corticast::optim
