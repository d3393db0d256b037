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

#include "corticast/attribution.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "corticast/error.hpp"
#include "corticast/layers.hpp"
#include "corticast/random.hpp"
#include "corticast/task.hpp"

namespace corticast::attribution {

using autonet::Activation;
using autonet::MlpModel;

std::string to_string(Method method) {
  switch (method) {
    case Method::deeplift_rescale: return "deeplift_rescale";
    case Method::integrated_gradients: return "integrated_gradients";
    case Method::exact_shapley: return "exact_shapley";
  }
  return "unknown";
}

std::string to_string(Group group) { return group == Group::preterm ? "preterm" : "term"; }

namespace {

constexpr double kRescaleGuard = 1e-7;

void require_eval(const MlpModel& model, const char* what) {
  if (model.mode != autonet::Mode::eval) {
    throw ContractViolation(std::string(what) + ": model must be in eval mode");
  }
}

void require_shape(const MlpModel& model, const Matrix& m, const char* what) {
  if (m.cols() != model.config().in_channels || m.rows() == 0) {
    throw std::invalid_argument(std::string(what) + ": input must be vertices x " +
                                std::to_string(model.config().in_channels));
  }
}

void require_index(const MlpModel& model, const OutputSpec& output) {
  if (output.index >= model.config().out_units) {
    throw std::invalid_argument("output index out of range");
  }
}

// Rescale multiplier dy/dx between an input and a reference activation.
double rescale(Activation kind, double x, double r, double yx, double yr) {
  if (kind == Activation::identity) return 1.0;
  const double dx = x - r;
  if (std::abs(dx) < kRescaleGuard) {
    const double t = std::tanh(0.5 * (x + r));
    return 1.0 - t * t;
  }
  return (yx - yr) / dx;
}

// upstream (n x d_out) times weight^T (d_out x d_in).
Matrix times_transpose(const Matrix& upstream, const Matrix& weight) {
  Matrix out(upstream.rows(), weight.rows());
  for (std::size_t i = 0; i < upstream.rows(); ++i) {
    for (std::size_t k = 0; k < weight.rows(); ++k) {
      double sum = 0.0;
      for (std::size_t j = 0; j < weight.cols(); ++j) sum += upstream(i, j) * weight(k, j);
      out(i, k) = sum;
    }
  }
  return out;
}

VertexTensor stack(std::span<const Matrix> items) {
  VertexTensor t(items.size(), items.front().rows(), items.front().cols());
  for (std::size_t s = 0; s < items.size(); ++s) {
    std::copy(items[s].values().begin(), items[s].values().end(),
              t.values.values().begin() + static_cast<std::ptrdiff_t>(s * items[s].size()));
  }
  return t;
}

}  // namespace

Attribution deeplift_rescale(const MlpModel& model, const Matrix& input,
                             std::span<const Matrix> backgrounds, OutputSpec output) {
  require_eval(model, "deeplift_rescale");
  require_shape(model, input, "deeplift_rescale");
  require_index(model, output);
  if (backgrounds.empty()) throw std::invalid_argument("deeplift_rescale: no backgrounds");
  for (const auto& b : backgrounds) {
    if (b.rows() != input.rows() || b.cols() != input.cols()) {
      throw std::invalid_argument("deeplift_rescale: background shape mismatch");
    }
  }
  const auto& cfg = model.config();
  const std::size_t V = input.rows();
  const std::size_t R = backgrounds.size();

  // Subject 0 is the input, subjects 1..R the references.
  std::vector<Matrix> all;
  all.reserve(R + 1);
  all.push_back(input);
  all.insert(all.end(), backgrounds.begin(), backgrounds.end());
  const VertexTensor stacked = stack(all);

  std::vector<Matrix> pre, act;
  Matrix h = stacked.values;
  for (const auto& block : model.blocks()) {
    pre.push_back(autonet::linear_forward(h, block.weight, block.bias));
    act.push_back(autonet::activation_forward(cfg.activation, pre.back()));
    auto mean = block.bn_running_mean;
    auto var = block.bn_running_var;
    h = autonet::batchnorm_forward(act.back(), block.bn_gamma, block.bn_beta, autonet::Mode::eval,
                                   mean, var, cfg.batchnorm_epsilon, cfg.batchnorm_momentum);
  }
  const auto& head = model.head();
  const Matrix pooled = autonet::meanpool_forward(h, R + 1, V);
  const Matrix head_pre = autonet::linear_forward(pooled, head.weight1, head.bias1);
  const Matrix head_act = autonet::activation_forward(cfg.activation, head_pre);
  const Matrix out = autonet::linear_forward(head_act, head.weight2, head.bias2);

  const std::size_t H = head.weight1.cols();
  Matrix m(R, H);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t j = 0; j < H; ++j) {
      m(r, j) = output.scale * head.weight2(j, output.index) *
                rescale(cfg.activation, head_pre(0, j), head_pre(r + 1, j), head_act(0, j),
                        head_act(r + 1, j));
    }
  }
  const Matrix m_pooled = times_transpose(m, head.weight1);
  const std::size_t hidden = m_pooled.cols();
  Matrix mv(R * V, hidden);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t v = 0; v < V; ++v) {
      for (std::size_t c = 0; c < hidden; ++c) {
        mv(r * V + v, c) = m_pooled(r, c) / static_cast<double>(V);
      }
    }
  }
  for (std::size_t b = model.blocks().size(); b-- > 0;) {
    const auto& block = model.blocks()[b];
    const std::size_t width = block.weight.cols();
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t v = 0; v < V; ++v) {
        const std::size_t xr = v, rr = (r + 1) * V + v, mr = r * V + v;
        for (std::size_t c = 0; c < width; ++c) {
          const double affine =
              block.bn_gamma[c] / std::sqrt(block.bn_running_var[c] + cfg.batchnorm_epsilon);
          mv(mr, c) *= affine * rescale(cfg.activation, pre[b](xr, c), pre[b](rr, c),
                                        act[b](xr, c), act[b](rr, c));
        }
      }
    }
    mv = times_transpose(mv, block.weight);
  }

  Attribution result;
  result.method = Method::deeplift_rescale;
  result.values = Matrix(V, input.cols());
  result.background_n = R;
  result.output_index = output.index;
  result.output = output.scale * out(0, output.index);
  double ref_sum = 0.0;
  for (std::size_t r = 0; r < R; ++r) {
    double total = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
      for (std::size_t c = 0; c < input.cols(); ++c) {
        const double a = mv(r * V + v, c) * (input(v, c) - backgrounds[r](v, c));
        result.values(v, c) += a;
        total += a;
      }
    }
    const double ref = output.scale * out(r + 1, output.index);
    ref_sum += ref;
    result.completeness_residual =
        std::max(result.completeness_residual, std::abs(total - (result.output - ref)));
  }
  for (double& a : result.values.values()) a /= static_cast<double>(R);
  result.reference_output = ref_sum / static_cast<double>(R);
  return result;
}

GradientFn model_gradient(const MlpModel& model, OutputSpec output) {
  require_eval(model, "model_gradient");
  require_index(model, output);
  return [&model, output](const VertexTensor& points) {
    auto forward = autonet::model_forward(model, points);
    Matrix upstream(points.subjects, model.config().out_units);
    for (std::size_t s = 0; s < points.subjects; ++s) upstream(s, output.index) = output.scale;
    return autonet::model_backward(model, forward.cache, upstream).input;
  };
}

OutputFn model_output(const MlpModel& model, OutputSpec output) {
  require_eval(model, "model_output");
  require_index(model, output);
  return [&model, output](const Matrix& input) {
    VertexTensor t(1, input.rows(), input.cols());
    t.values = input;
    return output.scale * autonet::predict(model, t)(0, output.index);
  };
}

Matrix integrated_gradients(const GradientFn& gradient, const Matrix& input,
                            const Matrix& baseline, std::size_t steps) {
  if (steps < 1) throw std::invalid_argument("integrated_gradients: steps must be >= 1");
  if (input.rows() != baseline.rows() || input.cols() != baseline.cols()) {
    throw std::invalid_argument("integrated_gradients: baseline shape mismatch");
  }
  constexpr std::size_t kChunk = 16;
  const std::size_t V = input.rows(), C = input.cols();
  Matrix total(V, C);
  for (std::size_t first = 0; first < steps; first += kChunk) {
    const std::size_t n = std::min(kChunk, steps - first);
    VertexTensor points(n, V, C);
    for (std::size_t s = 0; s < n; ++s) {
      const double alpha =
          (static_cast<double>(first + s) + 0.5) / static_cast<double>(steps);
      for (std::size_t v = 0; v < V; ++v) {
        for (std::size_t c = 0; c < C; ++c) {
          points.at(s, v, c) = baseline(v, c) + alpha * (input(v, c) - baseline(v, c));
        }
      }
    }
    const Matrix g = gradient(points);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t v = 0; v < V; ++v) {
        for (std::size_t c = 0; c < C; ++c) total(v, c) += g(s * V + v, c);
      }
    }
  }
  for (std::size_t v = 0; v < V; ++v) {
    for (std::size_t c = 0; c < C; ++c) {
      total(v, c) *= (input(v, c) - baseline(v, c)) / static_cast<double>(steps);
    }
  }
  return total;
}

Attribution integrated_gradients(const MlpModel& model, const Matrix& input,
                                 const Matrix& baseline, std::size_t steps, OutputSpec output) {
  require_eval(model, "integrated_gradients");
  require_shape(model, input, "integrated_gradients");
  Attribution result;
  result.method = Method::integrated_gradients;
  result.values = integrated_gradients(model_gradient(model, output), input, baseline, steps);
  result.background_n = 1;
  result.output_index = output.index;
  const auto f = model_output(model, output);
  result.output = f(input);
  result.reference_output = f(baseline);
  double total = 0.0;
  for (double a : result.values.values()) total += a;
  result.completeness_residual =
      std::abs(total - (result.output - result.reference_output));
  return result;
}

std::vector<double> shapley_values(std::size_t n,
                                   const std::function<double(std::uint32_t)>& value) {
  if (n > kMaxShapleyCells) {
    throw std::invalid_argument("shapley_values: at most " + std::to_string(kMaxShapleyCells) +
                                " players");
  }
  const std::uint32_t count = std::uint32_t{1} << n;
  std::vector<double> v(count);
  for (std::uint32_t mask = 0; mask < count; ++mask) v[mask] = value(mask);
  // weight[s] = s! (n - s - 1)! / n! = 1 / (n * C(n - 1, s))
  std::vector<double> weight(n);
  for (std::size_t s = 0; s < n; ++s) {
    double binom = 1.0;
    for (std::size_t j = 1; j <= s; ++j) {
      binom = binom * static_cast<double>(n - 1 - s + j) / static_cast<double>(j);
    }
    weight[s] = 1.0 / (static_cast<double>(n) * binom);
  }
  std::vector<double> phi(n, 0.0);
  for (std::uint32_t mask = 0; mask < count; ++mask) {
    const auto size = static_cast<std::size_t>(std::popcount(mask));
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t bit = std::uint32_t{1} << i;
      if (mask & bit) continue;
      phi[i] += weight[size] * (v[mask | bit] - v[mask]);
    }
  }
  return phi;
}

Attribution exact_shapley(const MlpModel& model, const Matrix& input, const Matrix& baseline,
                          OutputSpec output) {
  require_eval(model, "exact_shapley");
  require_shape(model, input, "exact_shapley");
  require_index(model, output);
  if (input.rows() != baseline.rows() || input.cols() != baseline.cols()) {
    throw std::invalid_argument("exact_shapley: baseline shape mismatch");
  }
  const std::size_t n = input.size();
  if (n > kMaxShapleyCells) {
    throw std::invalid_argument("exact_shapley: at most " + std::to_string(kMaxShapleyCells) +
                                " input cells");
  }
  const std::uint32_t count = std::uint32_t{1} << n;
  const std::size_t V = input.rows(), C = input.cols();
  std::vector<double> values(count);
  constexpr std::uint32_t kChunk = 4096;
  for (std::uint32_t first = 0; first < count; first += kChunk) {
    const std::uint32_t m = std::min(kChunk, count - first);
    VertexTensor batch(m, V, C);
    for (std::uint32_t s = 0; s < m; ++s) {
      const std::uint32_t mask = first + s;
      for (std::size_t i = 0; i < n; ++i) {
        batch.values.values()[s * n + i] =
            (mask >> i) & 1U ? input.values()[i] : baseline.values()[i];
      }
    }
    const Matrix pred = autonet::predict(model, batch);
    for (std::uint32_t s = 0; s < m; ++s) values[first + s] = output.scale * pred(s, output.index);
  }
  Attribution result;
  result.method = Method::exact_shapley;
  const auto phi = shapley_values(n, [&](std::uint32_t mask) { return values[mask]; });
  result.values = Matrix(V, C, phi);
  result.background_n = 1;
  result.output_index = output.index;
  result.output = values[count - 1];
  result.reference_output = values[0];
  double total = 0.0;
  for (double p : phi) total += p;
  result.completeness_residual = std::abs(total - (result.output - result.reference_output));
  return result;
}

std::vector<std::size_t> choose_backgrounds(std::span<const std::size_t> train, std::size_t count,
                                            std::uint64_t seed) {
  std::vector<std::size_t> pool(train.begin(), train.end());
  std::sort(pool.begin(), pool.end());
  Rng rng(derive_seed(seed, 2));
  rng.shuffle(std::span<std::size_t>(pool));
  pool.resize(std::min(count, pool.size()));
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<Matrix> subject_inputs(const autonet::Checkpoint& checkpoint,
                                   const dataio::Dataset& dataset,
                                   std::span<const std::size_t> subjects) {
  if (!checkpoint.stats) throw FormatError("checkpoint has no standardization statistics");
  const auto task = optim::parse_task(checkpoint.task);
  const auto data = optim::build_inputs(dataset, task, *checkpoint.stats, subjects,
                                        optim::MissingPolicy::error, false);
  const std::size_t V = data.inputs.vertices, C = data.inputs.channels();
  std::vector<Matrix> out;
  out.reserve(data.size());
  for (std::size_t s = 0; s < data.size(); ++s) {
    const auto begin = data.inputs.values.values().begin() + static_cast<std::ptrdiff_t>(s * V * C);
    out.emplace_back(V, C, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(V * C)));
  }
  return out;
}

OutputSpec output_spec(const autonet::Checkpoint& checkpoint, std::size_t output_index) {
  if (!checkpoint.stats) throw FormatError("checkpoint has no standardization statistics");
  const auto targets = optim::task_targets(optim::parse_task(checkpoint.task));
  if (output_index >= targets.size()) throw std::invalid_argument("output index out of range");
  return {output_index, checkpoint.stats->require(targets[output_index]).std};
}

namespace {

std::optional<GroupMap> make_group(Group group, const dataio::Dataset& dataset,
                                   std::span<const std::size_t> subjects,
                                   std::span<const Attribution> attributions,
                                   const std::vector<std::string>& input_channels) {
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const auto& ga = dataset.subjects[subjects[i]].meta.ga_birth;
    if (!ga) continue;
    if ((group == Group::preterm && *ga < kPretermThreshold) ||
        (group == Group::term && *ga > kPretermThreshold)) {
      members.push_back(i);
    }
  }
  if (members.empty()) return std::nullopt;

  const std::size_t V = dataset.vertex_count();
  GroupMap map;
  map.group = group;
  map.n_subjects = members.size();
  std::vector<std::string> feature_names, attr_names;
  for (const auto& c : dataset.channel_names) feature_names.push_back("mean_" + c);
  for (const auto& c : input_channels) attr_names.push_back("signed_attr_" + c);
  for (const auto& c : input_channels) attr_names.push_back("attr_" + c);
  map.features = mesh::FeatureField(V, feature_names);
  map.attributions = mesh::FeatureField(V, attr_names);
  const std::size_t C = input_channels.size();
  const double inv = 1.0 / static_cast<double>(members.size());
  for (std::size_t i : members) {
    const auto& subject = dataset.subjects[subjects[i]];
    map.subject_ids.push_back(subject.meta.subject_id);
    for (std::size_t c = 0; c < dataset.channel_names.size(); ++c) {
      const std::size_t src = subject.features.find_channel(dataset.channel_names[c]);
      if (src == subject.features.channel_count()) {
        throw SchemaError("subject " + subject.meta.subject_id + " lacks channel " +
                          dataset.channel_names[c]);
      }
      for (std::size_t v = 0; v < V; ++v) map.features.at(c, v) += subject.features.at(src, v) * inv;
    }
    const Matrix& a = attributions[i].values;
    if (a.rows() != V || a.cols() != C) {
      throw std::invalid_argument("group_maps: attribution shape mismatch");
    }
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t v = 0; v < V; ++v) {
        map.attributions.at(c, v) += a(v, c) * inv;
        map.attributions.at(C + c, v) += std::abs(a(v, c)) * inv;
      }
    }
  }
  return map;
}

}  // namespace

GroupMaps group_maps(const dataio::Dataset& dataset, std::span<const std::size_t> subjects,
                     std::span<const Attribution> attributions,
                     const std::vector<std::string>& input_channels) {
  if (subjects.size() != attributions.size()) {
    throw std::invalid_argument("group_maps: one attribution per subject required");
  }
  GroupMaps maps;
  maps.preterm = make_group(Group::preterm, dataset, subjects, attributions, input_channels);
  maps.term = make_group(Group::term, dataset, subjects, attributions, input_channels);
  return maps;
}

std::vector<double> channel_importance(const GroupMap& map,
                                       const std::vector<std::string>& input_channels) {
  std::vector<double> out;
  for (const auto& c : input_channels) {
    const std::size_t idx = map.attributions.find_channel("attr_" + c);
    if (idx == map.attributions.channel_count()) {
      throw std::invalid_argument("channel_importance: unknown channel " + c);
    }
    const auto values = map.attributions.channel(idx);
    out.push_back(std::accumulate(values.begin(), values.end(), 0.0) /
                  static_cast<double>(values.size()));
  }
  return out;
}

std::vector<std::size_t> evaluation_subjects(const dataio::Dataset& dataset) {
  auto val = dataset.indices_of(dataio::Split::val);
  const auto test = dataset.indices_of(dataio::Split::test);
  val.insert(val.end(), test.begin(), test.end());
  std::sort(val.begin(), val.end());
  return val;
}

nlohmann::json sidecar_json(const Attribution& a) {
  return nlohmann::json{{"method", to_string(a.method)},
                        {"background_n", a.background_n},
                        {"completeness_residual", a.completeness_residual},
                        {"output_index", a.output_index}};
}

mesh::FeatureField to_field(const Attribution& a, const std::vector<std::string>& input_channels) {
  if (a.values.cols() != input_channels.size()) {
    throw std::invalid_argument("to_field: channel count mismatch");
  }
  std::vector<std::string> names;
  for (const auto& c : input_channels) names.push_back("attr_" + c);
  mesh::FeatureField field(a.values.rows(), names);
  for (std::size_t v = 0; v < a.values.rows(); ++v) {
    for (std::size_t c = 0; c < names.size(); ++c) field.at(c, v) = a.values(v, c);
  }
  return field;
}

}  // namespace corticast::attribution
