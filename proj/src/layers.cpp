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

#include "corticast/layers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace corticast::autonet {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* where) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(where) + ": shape mismatch");
  }
}

}  // namespace

Matrix linear_forward(const Matrix& x, const Matrix& weight, std::span<const double> bias) {
  if (x.cols() != weight.rows() || bias.size() != weight.cols()) {
    throw std::invalid_argument("linear_forward: shape mismatch (x has " +
                                std::to_string(x.cols()) + " columns, weight is " +
                                std::to_string(weight.rows()) + "x" +
                                std::to_string(weight.cols()) + ")");
  }
  const std::size_t d_in = weight.rows();
  const std::size_t d_out = weight.cols();
  Matrix y(x.rows(), d_out);
  const double* w = weight.values().data();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* xr = x.row(r).data();
    double* yr = y.row(r).data();
    for (std::size_t j = 0; j < d_out; ++j) yr[j] = bias[j];
    for (std::size_t i = 0; i < d_in; ++i) {
      const double xi = xr[i];
      const double* wi = w + i * d_out;
      for (std::size_t j = 0; j < d_out; ++j) yr[j] += xi * wi[j];
    }
  }
  return y;
}

LinearGrads linear_backward(const Matrix& x, const Matrix& weight, const Matrix& upstream) {
  if (x.cols() != weight.rows() || upstream.cols() != weight.cols() ||
      upstream.rows() != x.rows()) {
    throw std::invalid_argument("linear_backward: shape mismatch");
  }
  const std::size_t d_in = weight.rows();
  const std::size_t d_out = weight.cols();
  LinearGrads g{Matrix(x.rows(), d_in), Matrix(d_in, d_out), std::vector<double>(d_out, 0.0)};
  const double* w = weight.values().data();
  double* gw = g.weight.values().data();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* xr = x.row(r).data();
    const double* ur = upstream.row(r).data();
    double* gx = g.input.row(r).data();
    for (std::size_t j = 0; j < d_out; ++j) g.bias[j] += ur[j];
    for (std::size_t i = 0; i < d_in; ++i) {
      const double* wi = w + i * d_out;
      double* gwi = gw + i * d_out;
      const double xi = xr[i];
      double acc = 0.0;
      for (std::size_t j = 0; j < d_out; ++j) {
        acc += ur[j] * wi[j];
        gwi[j] += xi * ur[j];
      }
      gx[i] = acc;
    }
  }
  return g;
}

Matrix activation_forward(Activation kind, const Matrix& x) {
  if (kind == Activation::identity) return x;
  Matrix y = x;
  for (double& v : y.values()) v = std::tanh(v);
  return y;
}

Matrix activation_backward(Activation kind, const Matrix& y, const Matrix& upstream) {
  require_same_shape(y, upstream, "activation_backward");
  if (kind == Activation::identity) return upstream;
  Matrix g = upstream;
  auto out = g.values();
  auto yv = y.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= 1.0 - yv[i] * yv[i];
  return g;
}

Matrix batchnorm_forward(const Matrix& x, std::span<const double> gamma,
                         std::span<const double> beta, Mode mode,
                         std::span<double> running_mean, std::span<double> running_var,
                         double epsilon, double momentum, BatchNormCache* cache) {
  const std::size_t rows = x.rows();
  const std::size_t channels = x.cols();
  if (gamma.size() != channels || beta.size() != channels || running_mean.size() != channels ||
      running_var.size() != channels) {
    throw std::invalid_argument("batchnorm_forward: parameter size mismatch");
  }
  std::vector<double> mean(channels, 0.0);
  std::vector<double> var(channels, 0.0);
  if (mode == Mode::train) {
    if (rows < 2) {
      throw std::invalid_argument("batchnorm_forward: train mode needs at least 2 rows");
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = x.row(r).data();
      for (std::size_t c = 0; c < channels; ++c) mean[c] += xr[c];
    }
    for (double& m : mean) m /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = x.row(r).data();
      for (std::size_t c = 0; c < channels; ++c) {
        const double d = xr[c] - mean[c];
        var[c] += d * d;
      }
    }
    for (double& v : var) v /= static_cast<double>(rows);
    for (std::size_t c = 0; c < channels; ++c) {
      running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mean[c];
      running_var[c] = (1.0 - momentum) * running_var[c] + momentum * var[c];
    }
  } else {
    for (std::size_t c = 0; c < channels; ++c) {
      mean[c] = running_mean[c];
      var[c] = running_var[c];
    }
  }

  std::vector<double> inv_std(channels);
  for (std::size_t c = 0; c < channels; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + epsilon);

  Matrix y(rows, channels);
  Matrix normalized;
  if (cache) normalized = Matrix(rows, channels);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.row(r).data();
    double* yr = y.row(r).data();
    for (std::size_t c = 0; c < channels; ++c) {
      const double xhat = (xr[c] - mean[c]) * inv_std[c];
      if (cache) normalized(r, c) = xhat;
      yr[c] = gamma[c] * xhat + beta[c];
    }
  }
  if (cache) {
    cache->mode = mode;
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

BatchNormGrads batchnorm_backward(const BatchNormCache& cache, std::span<const double> gamma,
                                  const Matrix& upstream) {
  const Matrix& xhat = cache.normalized;
  require_same_shape(xhat, upstream, "batchnorm_backward");
  const std::size_t rows = xhat.rows();
  const std::size_t channels = xhat.cols();
  BatchNormGrads g{Matrix(rows, channels), std::vector<double>(channels, 0.0),
                   std::vector<double>(channels, 0.0)};
  for (std::size_t r = 0; r < rows; ++r) {
    const double* ur = upstream.row(r).data();
    const double* hr = xhat.row(r).data();
    for (std::size_t c = 0; c < channels; ++c) {
      g.beta[c] += ur[c];
      g.gamma[c] += ur[c] * hr[c];
    }
  }
  if (cache.mode == Mode::eval) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < channels; ++c) {
        g.input(r, c) = upstream(r, c) * gamma[c] * cache.inv_std[c];
      }
    }
    return g;
  }
  // dx = gamma * inv_std / M * (M * dy - sum(dy) - xhat * sum(dy * xhat))
  const double m = static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* ur = upstream.row(r).data();
    const double* hr = xhat.row(r).data();
    double* gr = g.input.row(r).data();
    for (std::size_t c = 0; c < channels; ++c) {
      gr[c] = gamma[c] * cache.inv_std[c] / m *
              (m * ur[c] - g.beta[c] - hr[c] * g.gamma[c]);
    }
  }
  return g;
}

Matrix meanpool_forward(const Matrix& x, std::size_t subjects, std::size_t vertices) {
  if (vertices == 0 || x.rows() != subjects * vertices) {
    throw std::invalid_argument("meanpool_forward: rows must equal subjects * vertices > 0");
  }
  const std::size_t channels = x.cols();
  Matrix y(subjects, channels);
  for (std::size_t s = 0; s < subjects; ++s) {
    double* yr = y.row(s).data();
    for (std::size_t v = 0; v < vertices; ++v) {
      const double* xr = x.row(s * vertices + v).data();
      for (std::size_t c = 0; c < channels; ++c) yr[c] += xr[c];
    }
    for (std::size_t c = 0; c < channels; ++c) yr[c] /= static_cast<double>(vertices);
  }
  return y;
}

Matrix meanpool_backward(const Matrix& upstream, std::size_t vertices) {
  if (vertices == 0) throw std::invalid_argument("meanpool_backward: vertices must be > 0");
  const std::size_t channels = upstream.cols();
  Matrix g(upstream.rows() * vertices, channels);
  for (std::size_t s = 0; s < upstream.rows(); ++s) {
    for (std::size_t v = 0; v < vertices; ++v) {
      double* gr = g.row(s * vertices + v).data();
      for (std::size_t c = 0; c < channels; ++c) {
        gr[c] = upstream(s, c) / static_cast<double>(vertices);
      }
    }
  }
  return g;
}

}  // namespace corticast::autonet
