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
#include <span>
#include <string>
#include <vector>

#include "corticast/layers.hpp"
#include "corticast/matrix.hpp"

namespace corticast::autonet {

struct ModelConfig {
  std::size_t in_channels = 4;
  std::size_t hidden_units = 16;
  std::size_t n_blocks = 4;
  std::size_t out_units = 1;
  double batchnorm_epsilon = 1e-5;
  double batchnorm_momentum = 0.1;
  Activation activation = Activation::tanh;

  // Throws std::invalid_argument on zero sizes or non-positive epsilon.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Trainable parameters plus batch-norm running statistics of one
// {linear -> activation -> batchnorm} block.
struct Block {
  Matrix weight;
  std::vector<double> bias;
  std::vector<double> bn_gamma;
  std::vector<double> bn_beta;
  std::vector<double> bn_running_mean;
  std::vector<double> bn_running_var;
};

// linear -> activation -> linear on the pooled features.
struct Head {
  Matrix weight1;
  std::vector<double> bias1;
  Matrix weight2;
  std::vector<double> bias2;
};

// Named view of one stored array, rows x cols (vectors have rows = 1).
struct ArrayView {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<double> values;
};

struct ConstArrayView {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<const double> values;
};

class MlpModel {
 public:
  MlpModel() = default;
  // Zero weights, unit gamma and running variance.
  explicit MlpModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::vector<Block>& blocks() { return blocks_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  Head& head() { return head_; }
  const Head& head() const { return head_; }

  Mode mode = Mode::train;

  // Trainable arrays in canonical order: per block weight, bias, bn_gamma,
  // bn_beta; then head weight1, bias1, weight2, bias2.
  std::vector<ArrayView> trainable();
  std::vector<ConstArrayView> trainable() const;
  // Canonical order of every stored array: trainable arrays with each
  // block's running statistics after its bn_beta.
  std::vector<ArrayView> all_arrays();
  std::vector<ConstArrayView> all_arrays() const;

  // Bumped by every parameter or running-statistic mutation that goes through
  // the library (training forward, optimizer steps), so caches can detect
  // staleness.
  std::uint64_t revision() const { return revision_; }
  void touch() { ++revision_; }

 private:
  ModelConfig config_;
  std::vector<Block> blocks_;
  Head head_;
  std::uint64_t revision_ = 0;
};

// Trainable parameter count from the configuration, excluding running
// statistics.
std::size_t param_count(const ModelConfig& config);

// Weights uniform on [-sqrt(1/fan_in), sqrt(1/fan_in)] drawn in canonical
// array order, biases and beta zero, gamma one, running mean 0, variance 1.
MlpModel init_model(const ModelConfig& config, std::uint64_t seed);

struct BlockCache {
  Matrix input;
  Matrix activated;
  BatchNormCache bn;
};

struct ForwardCache {
  bool valid = false;
  Mode mode = Mode::eval;
  std::uint64_t revision = 0;
  std::size_t subjects = 0;
  std::size_t vertices = 0;
  std::vector<BlockCache> blocks;
  Matrix pooled;
  Matrix head_hidden;
};

struct ForwardResult {
  Matrix predictions;  // subjects x out_units
  ForwardCache cache;
};

// Train mode uses batch statistics and updates the running statistics (the
// model is mutated); eval mode leaves the model untouched.
ForwardResult model_forward(MlpModel& model, const VertexTensor& inputs, Mode mode);
ForwardResult model_forward(const MlpModel& model, const VertexTensor& inputs);
// Eval-mode predictions without retaining a cache.
Matrix predict(const MlpModel& model, const VertexTensor& inputs);

// Gradients in canonical trainable order.
struct ParamGrads {
  std::vector<std::vector<double>> arrays;

  static ParamGrads zeros_like(const MlpModel& model);
  bool all_finite() const;
};

struct BackwardResult {
  ParamGrads params;
  Matrix input;  // same layout as VertexTensor::values
};

// Throws ContractViolation for caches that are missing or were produced
// before the model last changed.
BackwardResult model_backward(const MlpModel& model, const ForwardCache& cache,
                              const Matrix& prediction_grad);

}  // namespace corticast::autonet
