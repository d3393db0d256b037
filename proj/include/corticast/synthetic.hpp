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

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "corticast/dataio.hpp"

namespace corticast::dataio {

inline constexpr const char* kSignalChannel = "t1w_t2w_ratio";

// Channel order of generated datasets.
inline const std::vector<std::string> kCorticalChannels = {
    "sulcal_depth", "curvature", "thickness", kSignalChannel};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

// Largest-remainder allocation of n subjects in the ratio 423:53:54, which
// is the reference scan-age split (n = 530) and gives 160/20/20 for n = 200.
SplitCounts default_split_counts(std::size_t n_subjects);

struct SyntheticSpec {
  // Age that the signal channel encodes and that receives target noise.
  Target latent = Target::pma_scan;
  // Standard deviation of the Gaussian noise added to the latent age, weeks.
  double noise_sigma = 0.5;
  // Exactly round(preterm_fraction * n) subjects are born preterm.
  double preterm_fraction = 0.21;
  std::optional<SplitCounts> split;
};

// Per-subject signal-channel vertex mean = intercept + slope * latent age.
struct GroundTruth {
  std::string signal_channel = kSignalChannel;
  Target latent = Target::pma_scan;
  double intercept = 0.0;
  double slope = 0.0;
  double noise_sigma = 0.0;
  std::vector<double> latent_age;
};

struct SyntheticData {
  Dataset dataset;
  GroundTruth truth;
};

// Subjects on icosphere(order) with four channels; only the signal channel
// depends on age. Ages follow a preterm/term mixture, ga_birth < pma_scan.
SyntheticData generate_synthetic(std::size_t n_subjects, int order, std::uint64_t seed,
                                 const SyntheticSpec& spec = {});

}  // namespace corticast::dataio
