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
#include <vector>

#include "corticast/matrix.hpp"

namespace corticast::autonet {

enum class Mode { train, eval };
enum class Activation { tanh, identity };

// Rows of `x` are samples. weight is d_in x d_out (y = xW + b).
Matrix linear_forward(const Matrix& x, const Matrix& weight, std::span<const double> bias);

struct LinearGrads {
  Matrix input;
  Matrix weight;
  std::vector<double> bias;
};

LinearGrads linear_backward(const Matrix& x, const Matrix& weight, const Matrix& upstream);

Matrix activation_forward(Activation kind, const Matrix& x);
// Uses the forward output: tanh'(x) = 1 - y^2.
Matrix activation_backward(Activation kind, const Matrix& y, const Matrix& upstream);

inline Matrix tanh_forward(const Matrix& x) { return activation_forward(Activation::tanh, x); }
inline Matrix tanh_backward(const Matrix& y, const Matrix& upstream) {
  return activation_backward(Activation::tanh, y, upstream);
}

struct BatchNormCache {
  Mode mode = Mode::eval;
  Matrix normalized;             // x-hat
  std::vector<double> inv_std;   // 1 / sqrt(var + eps), per channel
};

// Statistics span every row (all subjects and vertices). Train mode uses the
// biased batch variance and folds batch statistics into the running ones;
// eval mode is the affine map given by the running statistics.
Matrix batchnorm_forward(const Matrix& x, std::span<const double> gamma,
                         std::span<const double> beta, Mode mode,
                         std::span<double> running_mean, std::span<double> running_var,
                         double epsilon, double momentum, BatchNormCache* cache = nullptr);

struct BatchNormGrads {
  Matrix input;
  std::vector<double> gamma;
  std::vector<double> beta;
};

// Train-mode caches back-propagate through the batch mean and variance.
BatchNormGrads batchnorm_backward(const BatchNormCache& cache, std::span<const double> gamma,
                                  const Matrix& upstream);

// Mean over each subject's `vertices` consecutive rows, summed in row order.
Matrix meanpool_forward(const Matrix& x, std::size_t subjects, std::size_t vertices);
Matrix meanpool_backward(const Matrix& upstream, std::size_t vertices);

}  // namespace corticast::autonet
