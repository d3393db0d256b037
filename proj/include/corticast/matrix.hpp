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

namespace corticast {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Per-vertex activations for a batch of subjects: rows are subject-major
// (subject s, vertex v) -> row s * vertices + v, columns are channels.
struct VertexTensor {
  std::size_t subjects = 0;
  std::size_t vertices = 0;
  Matrix values;

  VertexTensor() = default;
  VertexTensor(std::size_t n_subjects, std::size_t n_vertices, std::size_t channels)
      : subjects(n_subjects), vertices(n_vertices),
        values(n_subjects * n_vertices, channels) {}

  std::size_t channels() const { return values.cols(); }
  double& at(std::size_t s, std::size_t v, std::size_t c) {
    return values(s * vertices + v, c);
  }
  double at(std::size_t s, std::size_t v, std::size_t c) const {
    return values(s * vertices + v, c);
  }
};

bool all_finite(std::span<const double> values);

}  // namespace corticast
