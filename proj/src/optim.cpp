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

#include "corticast/optim.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "corticast/error.hpp"

namespace corticast::optim {

LossResult mse_loss(const Matrix& predictions, const Matrix& targets,
                    std::span<const double> target_weights) {
  if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols() ||
      target_weights.size() != predictions.cols()) {
    throw std::invalid_argument("mse_loss: shape mismatch");
  }
  if (predictions.rows() == 0) throw std::invalid_argument("mse_loss: empty batch");
  bool any_positive = false;
  for (double w : target_weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("mse_loss: negative target weight");
    any_positive = any_positive || w > 0.0;
  }
  if (!any_positive) throw std::invalid_argument("mse_loss: all target weights are zero");

  const std::size_t n = predictions.rows();
  const std::size_t k = predictions.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossResult result{0.0, Matrix(n, k)};
  for (std::size_t j = 0; j < k; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = predictions(i, j) - targets(i, j);
      sum += d * d;
      result.gradient(i, j) = 2.0 * target_weights[j] * d * inv_n;
    }
    result.loss += target_weights[j] * (sum * inv_n);
  }
  return result;
}

AdamState AdamState::zeros_like(std::span<const std::vector<double>> shapes) {
  AdamState state;
  for (const auto& a : shapes) {
    state.first_moment.emplace_back(a.size(), 0.0);
    state.second_moment.emplace_back(a.size(), 0.0);
  }
  return state;
}

AdamState AdamState::zeros_like(const autonet::MlpModel& model) {
  const auto g = autonet::ParamGrads::zeros_like(model);
  return zeros_like(g.arrays);
}

void adam_step(std::span<const std::span<double>> params, const autonet::ParamGrads& grads,
               AdamState& state, const AdamConfig& config) {
  if (params.size() != grads.arrays.size() || params.size() != state.first_moment.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient/state count mismatch");
  }
  for (std::size_t a = 0; a < params.size(); ++a) {
    if (params[a].size() != grads.arrays[a].size() ||
        params[a].size() != state.first_moment[a].size()) {
      throw std::invalid_argument("adam_step: array " + std::to_string(a) + " shape mismatch");
    }
  }
  if (!grads.all_finite()) throw NumericError(0, "adam_step: non-finite gradient");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t a = 0; a < params.size(); ++a) {
    auto& m = state.first_moment[a];
    auto& v = state.second_moment[a];
    const auto& g = grads.arrays[a];
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      params[a][i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

void adam_step(autonet::MlpModel& model, const autonet::ParamGrads& grads, AdamState& state,
               const AdamConfig& config) {
  std::vector<std::span<double>> params;
  for (auto& view : model.trainable()) params.push_back(view.values);
  adam_step(params, grads, state, config);
  model.touch();
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
}

std::vector<double> TrainConfig::weights_for(std::size_t outputs) const {
  if (target_weights.empty()) return std::vector<double>(outputs, 1.0);
  if (target_weights.size() != outputs) {
    throw std::invalid_argument("TrainConfig: " + std::to_string(target_weights.size()) +
                                " target weights for " + std::to_string(outputs) + " outputs");
  }
  return target_weights;
}

bool EarlyStopper::observe(std::size_t epoch, double loss) {
  if (loss < best_loss_) {
    best_loss_ = loss;
    best_epoch_ = epoch;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

std::string train_log_csv(const TrainLog& log) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,train_loss,val_loss,wall_ms\n";
  for (const auto& e : log.epochs) {
    out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.wall_ms << '\n';
  }
  return out.str();
}

std::string train_summary_json(const TrainLog& log) {
  nlohmann::json j{{"best_epoch", log.best_epoch},
                   {"best_val_loss", log.best_val_loss},
                   {"stopped_epoch", log.stopped_epoch},
                   {"seed", log.seed}};
  return j.dump(2) + "\n";
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> order,
                                                   std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (batches.size() >= 2 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

double evaluate_loss(const autonet::MlpModel& model, const TaskData& data,
                     std::span<const double> target_weights) {
  const Matrix pred = autonet::predict(model, data.inputs);
  return mse_loss(pred, data.targets, target_weights).loss;
}

}  // namespace corticast::optim
