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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corticast/mesh.hpp"

namespace corticast::dataio {

enum class Sex { male, female, unknown };
enum class Split { train, val, test, unassigned };

std::string to_string(Split split);
Split parse_split(const std::string& text);

// Gestational age at birth and postmenstrual age at scan in weeks,
// birthweight in kg, head circumference in cm.
struct SubjectMeta {
  std::string subject_id;
  std::optional<double> ga_birth;
  std::optional<double> pma_scan;
  Sex sex = Sex::unknown;
  std::optional<double> birthweight;
  std::optional<double> head_circumference;
  Split split = Split::unassigned;

  bool operator==(const SubjectMeta&) const = default;
};

// Throws SchemaError when an age lies outside (20, 50) weeks or the
// birthweight outside (0, 10) kg.
void validate(const SubjectMeta& meta);

struct Subject {
  SubjectMeta meta;
  mesh::FeatureField features;
};

struct ScalarStats {
  double mean = 0.0;
  double std = 1.0;

  double apply(double x) const { return (x - mean) / std; }
  double invert(double z) const { return z * std + mean; }
  bool operator==(const ScalarStats&) const = default;
};

// Regression targets and confounds that can be standardized.
enum class Target { ga_birth, pma_scan, birthweight };
std::string to_string(Target target);
std::optional<double> target_value(const SubjectMeta& meta, Target target);

struct StandardizationStats {
  std::vector<std::string> channel_names;
  std::vector<ScalarStats> channels;
  std::optional<ScalarStats> ga_birth;
  std::optional<ScalarStats> pma_scan;
  std::optional<ScalarStats> birthweight;

  const std::optional<ScalarStats>& target(Target t) const;
  // Throws SchemaError when the target has no fitted statistics.
  const ScalarStats& require(Target t) const;
  bool operator==(const StandardizationStats&) const = default;
};

struct Dataset {
  int icosphere_order = 0;
  std::vector<std::string> channel_names;
  std::vector<Subject> subjects;
  std::optional<StandardizationStats> stats;

  std::size_t vertex_count() const { return mesh::icosphere_vertex_count(icosphere_order); }
  std::vector<std::size_t> indices_of(Split split) const;
};

// Train/validation/test membership as indices into Dataset::subjects.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

SplitIndices split_indices(const Dataset& dataset);

inline constexpr const char* kManifestHeader =
    "subject_id,split,ga_birth_weeks,pma_scan_weeks,sex,birthweight_kg,"
    "head_circumference_cm,feature_path";

// Reads the manifest CSV and every referenced .sfeat file (paths relative to
// the manifest's directory). The icosphere order is inferred from the first
// feature file unless `expected_order` is given.
Dataset load_manifest(const std::filesystem::path& path,
                      std::optional<int> expected_order = std::nullopt);

// Writes each subject's features to `<feature_dir>/<subject_id>.sfeat` and a
// manifest referencing them. `feature_dir` is relative to the manifest.
void save_manifest(const Dataset& dataset, const std::filesystem::path& path,
                   const std::filesystem::path& feature_dir = "features");

// Manifest text for the given subjects and feature paths, one per subject.
std::string format_manifest(const Dataset& dataset,
                            std::span<const std::string> feature_paths);

// Per-channel mean and population standard deviation over all vertices of
// the selected subjects; target statistics over those with the target
// present. A target with no values is left absent; one without spread is
// only centered (std 1).
StandardizationStats fit_standardization(const Dataset& dataset,
                                         std::span<const std::size_t> subjects);
StandardizationStats fit_standardization(const Dataset& dataset,
                                         Split split = Split::train);

// Standardized copy of `field`, matching channels by name.
mesh::FeatureField apply_standardization(const mesh::FeatureField& field,
                                         const StandardizationStats& stats);
mesh::FeatureField invert_standardization(const mesh::FeatureField& field,
                                          const StandardizationStats& stats);
double apply_standardization(double value, Target target,
                             const StandardizationStats& stats);
double invert_standardization(double value, Target target,
                              const StandardizationStats& stats);

// Deterministically shuffled k-fold layout: fold i tests shard i and
// validates on shard (i + 1) mod k, training on the rest. Shard sizes differ
// by at most one. With k = 2 there is no remainder, so the validation shard
// is halved and its second half trains.
std::vector<SplitIndices> make_cv_folds(std::size_t n_subjects, std::size_t k,
                                        std::uint64_t seed);
std::vector<SplitIndices> make_cv_folds(const Dataset& dataset, std::size_t k,
                                        std::uint64_t seed);

std::size_t count_preterm(const Dataset& dataset, double threshold_weeks = 37.0);

// Participant part of a session-qualified id ("sub-01_ses-2" -> "sub-01").
std::string participant_id(const std::string& subject_id);

enum class ScanPolicy { keep_earliest, keep_latest };

// For preterm participants with several scans, keeps one scan per
// participant (by pma_scan). Scan-age regression keeps the earliest scan,
// birth-age regression the latest.
Dataset filter_repeat_scans(const Dataset& dataset, ScanPolicy policy,
                            double preterm_threshold_weeks = 37.0);

}  // namespace corticast::dataio
