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

#include "corticast/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "corticast/mesh.hpp"
#include "corticast/random.hpp"

namespace corticast::dataio {

namespace {

constexpr double kSignalIntercept = 1.0;
constexpr double kSignalSlope = 0.05;
constexpr double kReferenceAge = 38.0;

double clipped_normal(Rng& rng, double mean, double sigma, double lo, double hi) {
  return std::clamp(rng.normal(mean, sigma), lo, hi);
}

void center(std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  for (double& v : values) v -= mean;
}

// Zero-mean smooth patterns over the sphere.
std::vector<double> pattern(const mesh::SphereMesh& sphere, int kind) {
  std::vector<double> out(sphere.vertex_count());
  for (std::size_t v = 0; v < out.size(); ++v) {
    const auto& p = sphere.vertices[v];
    switch (kind) {
      case 0: out[v] = p[2]; break;
      case 1: out[v] = p[0] * p[1] * 3.0; break;
      case 2: out[v] = p[0] * p[0] - p[2] * p[2]; break;
      default: out[v] = std::sin(3.0 * p[0]) * std::cos(2.0 * p[1]); break;
    }
  }
  center(out);
  return out;
}

std::vector<double> centered_noise(Rng& rng, std::size_t n, double sigma) {
  std::vector<double> out(n);
  for (double& v : out) v = rng.normal(0.0, sigma);
  center(out);
  return out;
}

}  // namespace

SplitCounts default_split_counts(std::size_t n_subjects) {
  constexpr std::array<double, 3> ratio{423.0, 53.0, 54.0};
  constexpr double total = 530.0;
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(n_subjects) * ratio[i] / total;
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    remainder[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  while (assigned < n_subjects) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 3; ++i) {
      if (remainder[i] > remainder[best]) best = i;
    }
    ++counts[best];
    remainder[best] = -1.0;
    ++assigned;
  }
  return {counts[0], counts[1], counts[2]};
}

SyntheticData generate_synthetic(std::size_t n_subjects, int order, std::uint64_t seed,
                                 const SyntheticSpec& spec) {
  if (n_subjects < 1) throw std::invalid_argument("generate_synthetic: need at least 1 subject");
  if (spec.latent == Target::birthweight) {
    throw std::invalid_argument("generate_synthetic: latent must be an age");
  }
  if (!(spec.preterm_fraction >= 0.0 && spec.preterm_fraction <= 1.0)) {
    throw std::invalid_argument("generate_synthetic: preterm_fraction must lie in [0, 1]");
  }
  if (!(spec.noise_sigma >= 0.0)) {
    throw std::invalid_argument("generate_synthetic: noise_sigma must be non-negative");
  }
  const auto sphere = mesh::icosphere(order);
  const std::size_t n_vertices = sphere.vertex_count();
  const auto counts = spec.split.value_or(default_split_counts(n_subjects));
  if (counts.train + counts.val + counts.test != n_subjects) {
    throw std::invalid_argument("generate_synthetic: split counts do not sum to n_subjects");
  }

  const auto signal_shape = pattern(sphere, 0);
  const auto signal_nuisance = pattern(sphere, 3);
  const auto depth_shape = pattern(sphere, 1);
  const auto thickness_shape = pattern(sphere, 2);

  Rng rng(seed);
  SyntheticData out;
  auto& ds = out.dataset;
  ds.icosphere_order = order;
  ds.channel_names = kCorticalChannels;
  out.truth.latent = spec.latent;
  out.truth.intercept = kSignalIntercept - kSignalSlope * kReferenceAge;
  out.truth.slope = kSignalSlope;
  out.truth.noise_sigma = spec.noise_sigma;

  // Exactly round(fraction * n) preterm subjects, at shuffled positions.
  std::vector<char> is_preterm(n_subjects, 0);
  {
    std::vector<std::size_t> idx(n_subjects);
    std::iota(idx.begin(), idx.end(), 0);
    Rng group_rng(derive_seed(seed, 1));
    group_rng.shuffle(std::span(idx));
    const auto n_preterm = static_cast<std::size_t>(
        std::llround(spec.preterm_fraction * static_cast<double>(n_subjects)));
    for (std::size_t r = 0; r < std::min(n_preterm, n_subjects); ++r) is_preterm[idx[r]] = 1;
  }

  for (std::size_t i = 0; i < n_subjects; ++i) {
    Subject subject;
    auto& meta = subject.meta;
    char id[32];
    std::snprintf(id, sizeof id, "sub-%04zu", i);
    meta.subject_id = id;

    const bool preterm = is_preterm[i] != 0;
    const double ga = preterm ? clipped_normal(rng, 32.5, 2.5, 24.0, 36.8)
                              : clipped_normal(rng, 39.6, 1.2, 37.2, 42.5);
    const double gap = preterm ? rng.uniform(1.0, 10.0) : rng.uniform(0.3, 3.0);
    const double pma = std::min(ga + gap, 45.0);
    const double latent = spec.latent == Target::pma_scan ? pma : ga;

    // Redraw the target noise until the recorded ages stay ordered.
    double noisy = latent;
    for (int attempt = 0; attempt < 64; ++attempt) {
      noisy = latent + spec.noise_sigma * rng.normal();
      const double ga_rec = spec.latent == Target::ga_birth ? noisy : ga;
      const double pma_rec = spec.latent == Target::pma_scan ? noisy : pma;
      if (ga_rec < pma_rec && ga_rec > 20.5 && pma_rec < 49.5) break;
      noisy = latent;
    }
    meta.ga_birth = spec.latent == Target::ga_birth ? noisy : ga;
    meta.pma_scan = spec.latent == Target::pma_scan ? noisy : pma;
    meta.sex = rng.bernoulli(0.52) ? Sex::male : Sex::female;
    meta.birthweight = std::clamp(3.4 + 0.2 * (ga - 40.0) + rng.normal(0.0, 0.35), 0.4, 5.5);
    meta.head_circumference = 34.5 + 0.6 * (pma - 40.0) + rng.normal(0.0, 1.0);

    auto& f = subject.features;
    f = mesh::FeatureField(n_vertices, kCorticalChannels);
    const double depth_amp = rng.normal(0.0, 1.0);
    const double curv_amp = rng.normal(0.0, 0.1);
    const double thick_base = 2.2 + rng.normal(0.0, 0.3);
    const double nuisance_amp = rng.normal(0.0, 0.05);
    const auto depth_noise = centered_noise(rng, n_vertices, 0.3);
    const auto curv_noise = centered_noise(rng, n_vertices, 0.2);
    const auto thick_noise = centered_noise(rng, n_vertices, 0.1);
    const auto signal_noise = centered_noise(rng, n_vertices, 0.05);
    const double signal_mean = kSignalIntercept + kSignalSlope * (latent - kReferenceAge);
    for (std::size_t v = 0; v < n_vertices; ++v) {
      f.at(0, v) = depth_amp * depth_shape[v] + depth_noise[v];
      f.at(1, v) = curv_amp * signal_shape[v] + curv_noise[v];
      f.at(2, v) = thick_base + 0.2 * thickness_shape[v] + thick_noise[v];
      f.at(3, v) = signal_mean +
                   kSignalSlope * (latent - kReferenceAge) * 0.6 * signal_shape[v] +
                   nuisance_amp * signal_nuisance[v] + signal_noise[v];
    }
    out.truth.latent_age.push_back(latent);
    ds.subjects.push_back(std::move(subject));
  }

  std::vector<std::size_t> order_idx(n_subjects);
  std::iota(order_idx.begin(), order_idx.end(), 0);
  rng.shuffle(std::span(order_idx));
  for (std::size_t r = 0; r < n_subjects; ++r) {
    const Split split = r < counts.train               ? Split::train
                        : r < counts.train + counts.val ? Split::val
                                                        : Split::test;
    ds.subjects[order_idx[r]].meta.split = split;
  }
  return out;
}

}  // namespace corticast::dataio
