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

#include "corticast/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "corticast/error.hpp"
#include "corticast/random.hpp"

namespace corticast::autonet {

void ModelConfig::validate() const {
  if (in_channels < 1 || hidden_units < 1 || n_blocks < 1 || out_units < 1) {
    throw std::invalid_argument("ModelConfig: sizes must be at least 1");
  }
  if (!(batchnorm_epsilon > 0.0)) {
    throw std::invalid_argument("ModelConfig: batchnorm_epsilon must be positive");
  }
  if (!(batchnorm_momentum >= 0.0 && batchnorm_momentum <= 1.0)) {
    throw std::invalid_argument("ModelConfig: batchnorm_momentum must be in [0, 1]");
  }
}

MlpModel::MlpModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  const std::size_t h = config_.hidden_units;
  for (std::size_t b = 0; b < config_.n_blocks; ++b) {
    const std::size_t fan_in = b == 0 ? config_.in_channels : h;
    blocks_.push_back(Block{Matrix(fan_in, h), std::vector<double>(h, 0.0),
                            std::vector<double>(h, 1.0), std::vector<double>(h, 0.0),
                            std::vector<double>(h, 0.0), std::vector<double>(h, 1.0)});
  }
  head_ = Head{Matrix(h, h), std::vector<double>(h, 0.0), Matrix(h, config_.out_units),
               std::vector<double>(config_.out_units, 0.0)};
}

namespace {

template <typename View, typename Model>
std::vector<View> collect(Model& model, bool with_running) {
  std::vector<View> out;
  auto add_matrix = [&](std::string name, auto& m) {
    out.push_back(View{std::move(name), m.rows(), m.cols(), m.values()});
  };
  auto add_vector = [&](std::string name, auto& v) {
    out.push_back(View{std::move(name), 1, v.size(), std::span(v)});
  };
  auto& blocks = model.blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string prefix = "block" + std::to_string(b) + ".";
    add_matrix(prefix + "weight", blocks[b].weight);
    add_vector(prefix + "bias", blocks[b].bias);
    add_vector(prefix + "bn_gamma", blocks[b].bn_gamma);
    add_vector(prefix + "bn_beta", blocks[b].bn_beta);
    if (with_running) {
      add_vector(prefix + "bn_running_mean", blocks[b].bn_running_mean);
      add_vector(prefix + "bn_running_var", blocks[b].bn_running_var);
    }
  }
  auto& head = model.head();
  add_matrix("head.weight1", head.weight1);
  add_vector("head.bias1", head.bias1);
  add_matrix("head.weight2", head.weight2);
  add_vector("head.bias2", head.bias2);
  return out;
}

}  // namespace

std::vector<ArrayView> MlpModel::trainable() { return collect<ArrayView>(*this, false); }
std::vector<ConstArrayView> MlpModel::trainable() const {
  return collect<ConstArrayView>(*this, false);
}
std::vector<ArrayView> MlpModel::all_arrays() { return collect<ArrayView>(*this, true); }
std::vector<ConstArrayView> MlpModel::all_arrays() const {
  return collect<ConstArrayView>(*this, true);
}

std::size_t param_count(const ModelConfig& config) {
  config.validate();
  const std::size_t in = config.in_channels;
  const std::size_t h = config.hidden_units;
  const std::size_t out = config.out_units;
  return (in * h + h + 2 * h) + (config.n_blocks - 1) * (h * h + h + 2 * h) + (h * h + h) +
         (h * out + out);
}

MlpModel init_model(const ModelConfig& config, std::uint64_t seed) {
  MlpModel model(config);
  Rng rng(seed);
  for (auto& view : model.trainable()) {
    const bool is_weight = view.name.ends_with("weight") || view.name.ends_with("weight1") ||
                           view.name.ends_with("weight2");
    if (!is_weight) continue;
    const double bound = std::sqrt(1.0 / static_cast<double>(view.rows));
    for (double& w : view.values) w = rng.uniform(-bound, bound);
  }
  model.mode = Mode::train;
  return model;
}

namespace {

ForwardResult forward_impl(const MlpModel& model, std::vector<Block>* mutable_blocks,
                           const VertexTensor& inputs, Mode mode) {
  const auto& config = model.config();
  if (inputs.channels() != config.in_channels) {
    throw std::invalid_argument("model_forward: expected " +
                                std::to_string(config.in_channels) + " input channels, got " +
                                std::to_string(inputs.channels()));
  }
  if (inputs.values.rows() != inputs.subjects * inputs.vertices || inputs.vertices == 0) {
    throw std::invalid_argument("model_forward: malformed input tensor");
  }
  ForwardResult result;
  auto& cache = result.cache;
  cache.mode = mode;
  cache.subjects = inputs.subjects;
  cache.vertices = inputs.vertices;
  cache.blocks.resize(config.n_blocks);

  Matrix x = inputs.values;
  for (std::size_t b = 0; b < config.n_blocks; ++b) {
    const Block& block = model.blocks()[b];
    auto& bc = cache.blocks[b];
    Matrix z = linear_forward(x, block.weight, block.bias);
    bc.input = std::move(x);
    bc.activated = activation_forward(config.activation, z);
    if (mode == Mode::train) {
      Block& target = (*mutable_blocks)[b];
      x = batchnorm_forward(bc.activated, block.bn_gamma, block.bn_beta, mode,
                            target.bn_running_mean, target.bn_running_var,
                            config.batchnorm_epsilon, config.batchnorm_momentum, &bc.bn);
    } else {
      // Eval mode only reads the running statistics; copies keep the model const.
      std::vector<double> mean = block.bn_running_mean;
      std::vector<double> var = block.bn_running_var;
      x = batchnorm_forward(bc.activated, block.bn_gamma, block.bn_beta, mode, mean, var,
                            config.batchnorm_epsilon, config.batchnorm_momentum, &bc.bn);
    }
  }
  cache.pooled = meanpool_forward(x, inputs.subjects, inputs.vertices);
  const Head& head = model.head();
  cache.head_hidden =
      activation_forward(config.activation, linear_forward(cache.pooled, head.weight1, head.bias1));
  result.predictions = linear_forward(cache.head_hidden, head.weight2, head.bias2);
  cache.valid = true;
  return result;
}

}  // namespace

ForwardResult model_forward(MlpModel& model, const VertexTensor& inputs, Mode mode) {
  if (mode == Mode::eval) return model_forward(static_cast<const MlpModel&>(model), inputs);
  model.touch();
  auto result = forward_impl(model, &model.blocks(), inputs, Mode::train);
  result.cache.revision = model.revision();
  return result;
}

ForwardResult model_forward(const MlpModel& model, const VertexTensor& inputs) {
  auto result = forward_impl(model, nullptr, inputs, Mode::eval);
  result.cache.revision = model.revision();
  return result;
}

Matrix predict(const MlpModel& model, const VertexTensor& inputs) {
  return model_forward(model, inputs).predictions;
}

ParamGrads ParamGrads::zeros_like(const MlpModel& model) {
  ParamGrads g;
  for (const auto& view : model.trainable()) g.arrays.emplace_back(view.values.size(), 0.0);
  return g;
}

bool ParamGrads::all_finite() const {
  for (const auto& a : arrays) {
    if (!corticast::all_finite(a)) return false;
  }
  return true;
}

BackwardResult model_backward(const MlpModel& model, const ForwardCache& cache,
                              const Matrix& prediction_grad) {
  if (!cache.valid) throw ContractViolation("model_backward: missing forward cache");
  if (cache.revision != model.revision()) {
    throw ContractViolation("model_backward: forward cache is stale (model changed since)");
  }
  const auto& config = model.config();
  if (prediction_grad.rows() != cache.subjects || prediction_grad.cols() != config.out_units) {
    throw std::invalid_argument("model_backward: prediction gradient shape mismatch");
  }
  BackwardResult result;
  result.params = ParamGrads::zeros_like(model);
  auto& arrays = result.params.arrays;
  const std::size_t head_base = 4 * config.n_blocks;

  const Head& head = model.head();
  auto g2 = linear_backward(cache.head_hidden, head.weight2, prediction_grad);
  arrays[head_base + 2].assign(g2.weight.values().begin(), g2.weight.values().end());
  arrays[head_base + 3] = std::move(g2.bias);
  Matrix up = activation_backward(config.activation, cache.head_hidden, g2.input);
  auto g1 = linear_backward(cache.pooled, head.weight1, up);
  arrays[head_base + 0].assign(g1.weight.values().begin(), g1.weight.values().end());
  arrays[head_base + 1] = std::move(g1.bias);

  Matrix grad = meanpool_backward(g1.input, cache.vertices);
  for (std::size_t b = config.n_blocks; b-- > 0;) {
    const Block& block = model.blocks()[b];
    const auto& bc = cache.blocks[b];
    auto gbn = batchnorm_backward(bc.bn, block.bn_gamma, grad);
    Matrix gz = activation_backward(config.activation, bc.activated, gbn.input);
    auto gl = linear_backward(bc.input, block.weight, gz);
    arrays[4 * b + 0].assign(gl.weight.values().begin(), gl.weight.values().end());
    arrays[4 * b + 1] = std::move(gl.bias);
    arrays[4 * b + 2] = std::move(gbn.gamma);
    arrays[4 * b + 3] = std::move(gbn.beta);
    grad = std::move(gl.input);
  }
  result.input = std::move(grad);
  return result;
}

}  // namespace corticast::autonet
