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

#include "corticast/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "corticast/binary_io.hpp"
#include "corticast/error.hpp"
#include "corticast/mesh_io.hpp"
#include "corticast/random.hpp"

namespace corticast::dataio {

namespace {

constexpr double kDegenerateStd = 1e-12;

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::optional<double> parse_optional(const std::string& text, std::size_t line,
                                     const char* column) {
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ParseError(line, std::string("bad ") + column + " '" + text + "'");
  }
  return value;
}

std::string format_optional(const std::optional<double>& value) {
  if (!value) return {};
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, *value);
  return std::string(buffer, ptr);
}

Sex parse_sex(const std::string& text, std::size_t line) {
  if (text == "M") return Sex::male;
  if (text == "F") return Sex::female;
  if (text == "U" || text.empty()) return Sex::unknown;
  throw ParseError(line, "bad sex '" + text + "' (expected M, F or U)");
}

const char* format_sex(Sex sex) {
  switch (sex) {
    case Sex::male: return "M";
    case Sex::female: return "F";
    case Sex::unknown: return "U";
  }
  return "U";
}

// Two-pass mean and population variance in index order.
ScalarStats moments(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

int order_from_vertex_count(std::size_t n) {
  for (int k = 0; k <= mesh::kMaxIcosphereOrder; ++k) {
    if (mesh::icosphere_vertex_count(k) == n) return k;
  }
  return -1;
}

}  // namespace

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::unassigned: return "unassigned";
  }
  return "unassigned";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  if (text == "unassigned" || text.empty()) return Split::unassigned;
  throw std::invalid_argument("unknown split '" + text + "'");
}

std::string to_string(Target target) {
  switch (target) {
    case Target::ga_birth: return "ga_birth";
    case Target::pma_scan: return "pma_scan";
    case Target::birthweight: return "birthweight";
  }
  return "ga_birth";
}

std::optional<double> target_value(const SubjectMeta& meta, Target target) {
  switch (target) {
    case Target::ga_birth: return meta.ga_birth;
    case Target::pma_scan: return meta.pma_scan;
    case Target::birthweight: return meta.birthweight;
  }
  return std::nullopt;
}

void validate(const SubjectMeta& meta) {
  if (meta.subject_id.empty()) throw SchemaError("subject: empty subject_id");
  auto age_ok = [](const std::optional<double>& v) { return !v || (*v > 20.0 && *v < 50.0); };
  if (!age_ok(meta.ga_birth) || !age_ok(meta.pma_scan)) {
    throw SchemaError("subject " + meta.subject_id + ": age outside (20, 50) weeks");
  }
  if (meta.birthweight && !(*meta.birthweight > 0.0 && *meta.birthweight < 10.0)) {
    throw SchemaError("subject " + meta.subject_id + ": birthweight outside (0, 10) kg");
  }
}

const std::optional<ScalarStats>& StandardizationStats::target(Target t) const {
  switch (t) {
    case Target::ga_birth: return ga_birth;
    case Target::pma_scan: return pma_scan;
    case Target::birthweight: return birthweight;
  }
  return ga_birth;
}

const ScalarStats& StandardizationStats::require(Target t) const {
  const auto& s = target(t);
  if (!s) throw SchemaError("no standardization statistics for target " + to_string(t));
  return *s;
}

std::vector<std::size_t> Dataset::indices_of(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    if (subjects[i].meta.split == split) out.push_back(i);
  }
  return out;
}

SplitIndices split_indices(const Dataset& dataset) {
  return {dataset.indices_of(Split::train), dataset.indices_of(Split::val),
          dataset.indices_of(Split::test)};
}

Dataset load_manifest(const std::filesystem::path& path, std::optional<int> expected_order) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest '" + path.string() + "'");
  const auto base = path.parent_path();

  Dataset dataset;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader) {
    throw ParseError(1, "header must be exactly '" + std::string(kManifestHeader) + "'");
  }

  std::set<std::string> seen;
  std::optional<int> order = expected_order;
  std::size_t n_vertices = order ? mesh::icosphere_vertex_count(*order) : 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 8) {
      throw ParseError(line_no, "expected 8 fields, found " + std::to_string(fields.size()));
    }
    Subject subject;
    auto& meta = subject.meta;
    meta.subject_id = fields[0];
    if (meta.subject_id.empty()) throw ParseError(line_no, "empty subject_id");
    if (!seen.insert(meta.subject_id).second) {
      throw ParseError(line_no, "duplicate subject_id '" + meta.subject_id + "'");
    }
    try {
      meta.split = parse_split(fields[1]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, e.what());
    }
    meta.ga_birth = parse_optional(fields[2], line_no, "ga_birth_weeks");
    meta.pma_scan = parse_optional(fields[3], line_no, "pma_scan_weeks");
    meta.sex = parse_sex(fields[4], line_no);
    meta.birthweight = parse_optional(fields[5], line_no, "birthweight_kg");
    meta.head_circumference = parse_optional(fields[6], line_no, "head_circumference_cm");
    if (fields[7].empty()) throw ParseError(line_no, "empty feature_path");
    try {
      validate(meta);
    } catch (const SchemaError& e) {
      throw ParseError(line_no, e.what());
    }

    subject.features = mesh::load_sfeat(base / fields[7]);
    if (!order) {
      const int inferred = order_from_vertex_count(subject.features.vertex_count());
      if (inferred < 0) {
        throw SchemaError("subject " + meta.subject_id + ": " +
                          std::to_string(subject.features.vertex_count()) +
                          " vertices is not an icosphere vertex count");
      }
      order = inferred;
      n_vertices = subject.features.vertex_count();
    }
    if (subject.features.vertex_count() != n_vertices) {
      throw SchemaError("subject " + meta.subject_id + ": " +
                        std::to_string(subject.features.vertex_count()) +
                        " vertices, expected " + std::to_string(n_vertices));
    }
    if (dataset.subjects.empty()) {
      dataset.channel_names = subject.features.channel_names();
    } else if (subject.features.channel_names() != dataset.channel_names) {
      throw SchemaError("subject " + meta.subject_id + ": channel names differ");
    }
    dataset.subjects.push_back(std::move(subject));
  }
  dataset.icosphere_order = order.value_or(0);
  return dataset;
}

std::string format_manifest(const Dataset& dataset, std::span<const std::string> feature_paths) {
  if (feature_paths.size() != dataset.subjects.size()) {
    throw std::invalid_argument("format_manifest: one feature path per subject required");
  }
  std::ostringstream out;
  out << kManifestHeader << '\n';
  for (std::size_t i = 0; i < dataset.subjects.size(); ++i) {
    const auto& m = dataset.subjects[i].meta;
    out << m.subject_id << ',' << to_string(m.split) << ',' << format_optional(m.ga_birth)
        << ',' << format_optional(m.pma_scan) << ',' << format_sex(m.sex) << ','
        << format_optional(m.birthweight) << ',' << format_optional(m.head_circumference)
        << ',' << feature_paths[i] << '\n';
  }
  return out.str();
}

void save_manifest(const Dataset& dataset, const std::filesystem::path& path,
                   const std::filesystem::path& feature_dir) {
  const auto base = path.parent_path();
  std::filesystem::create_directories(base / feature_dir);
  std::vector<std::string> paths;
  paths.reserve(dataset.subjects.size());
  for (const auto& subject : dataset.subjects) {
    const auto relative = feature_dir / (subject.meta.subject_id + ".sfeat");
    mesh::save_sfeat(subject.features, base / relative);
    paths.push_back(relative.generic_string());
  }
  write_text_atomic(path, format_manifest(dataset, paths));
}

StandardizationStats fit_standardization(const Dataset& dataset,
                                         std::span<const std::size_t> subjects) {
  if (subjects.empty()) throw std::invalid_argument("fit_standardization: no subjects");
  StandardizationStats stats;
  stats.channel_names = dataset.channel_names;
  const std::size_t n_vertices = dataset.subjects[subjects[0]].features.vertex_count();
  std::vector<double> pooled;
  pooled.reserve(subjects.size() * n_vertices);
  for (std::size_t c = 0; c < dataset.channel_names.size(); ++c) {
    pooled.clear();
    for (auto s : subjects) {
      const auto channel = dataset.subjects[s].features.channel(c);
      pooled.insert(pooled.end(), channel.begin(), channel.end());
    }
    const auto m = moments(pooled);
    if (!(m.std >= kDegenerateStd)) throw DegenerateChannelError(dataset.channel_names[c]);
    stats.channels.push_back(m);
  }
  for (Target t : {Target::ga_birth, Target::pma_scan, Target::birthweight}) {
    std::vector<double> values;
    for (auto s : subjects) {
      if (auto v = target_value(dataset.subjects[s].meta, t)) values.push_back(*v);
    }
    if (values.empty()) continue;
    auto m = moments(values);
    if (!(m.std >= kDegenerateStd)) m.std = 1.0;  // center only
    switch (t) {
      case Target::ga_birth: stats.ga_birth = m; break;
      case Target::pma_scan: stats.pma_scan = m; break;
      case Target::birthweight: stats.birthweight = m; break;
    }
  }
  return stats;
}

StandardizationStats fit_standardization(const Dataset& dataset, Split split) {
  const auto indices = dataset.indices_of(split);
  if (indices.empty()) {
    throw std::invalid_argument("fit_standardization: split '" + to_string(split) +
                                "' is empty");
  }
  return fit_standardization(dataset, indices);
}

namespace {

mesh::FeatureField transform(const mesh::FeatureField& field, const StandardizationStats& stats,
                             bool forward) {
  mesh::FeatureField out = field;
  for (std::size_t c = 0; c < field.channel_count(); ++c) {
    const auto& name = field.channel_names()[c];
    const auto it = std::find(stats.channel_names.begin(), stats.channel_names.end(), name);
    if (it == stats.channel_names.end()) {
      throw SchemaError("standardization: unknown channel '" + name + "'");
    }
    const auto& s = stats.channels[static_cast<std::size_t>(it - stats.channel_names.begin())];
    for (double& v : out.channel(c)) v = forward ? s.apply(v) : s.invert(v);
  }
  return out;
}

}  // namespace

mesh::FeatureField apply_standardization(const mesh::FeatureField& field,
                                         const StandardizationStats& stats) {
  return transform(field, stats, true);
}

mesh::FeatureField invert_standardization(const mesh::FeatureField& field,
                                          const StandardizationStats& stats) {
  return transform(field, stats, false);
}

double apply_standardization(double value, Target target, const StandardizationStats& stats) {
  return stats.require(target).apply(value);
}

double invert_standardization(double value, Target target, const StandardizationStats& stats) {
  return stats.require(target).invert(value);
}

std::vector<SplitIndices> make_cv_folds(std::size_t n_subjects, std::size_t k,
                                        std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("make_cv_folds: k must be at least 2");
  if (k > n_subjects) {
    throw std::invalid_argument("make_cv_folds: k = " + std::to_string(k) + " exceeds " +
                                std::to_string(n_subjects) + " subjects");
  }
  std::vector<std::size_t> order(n_subjects);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span(order));

  std::vector<std::vector<std::size_t>> shards(k);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t size = n_subjects / k + (i < n_subjects % k ? 1 : 0);
    shards[i].assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                     order.begin() + static_cast<std::ptrdiff_t>(cursor + size));
    cursor += size;
  }

  std::vector<SplitIndices> folds(k);
  for (std::size_t i = 0; i < k; ++i) {
    auto& fold = folds[i];
    const std::size_t val_shard = (i + 1) % k;
    fold.test = shards[i];
    if (k == 2) {
      const auto& v = shards[val_shard];
      const std::size_t half = (v.size() + 1) / 2;
      fold.val.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(half));
      fold.train.assign(v.begin() + static_cast<std::ptrdiff_t>(half), v.end());
    } else {
      fold.val = shards[val_shard];
      for (std::size_t j = 0; j < k; ++j) {
        if (j == i || j == val_shard) continue;
        fold.train.insert(fold.train.end(), shards[j].begin(), shards[j].end());
      }
    }
    std::sort(fold.train.begin(), fold.train.end());
    std::sort(fold.val.begin(), fold.val.end());
    std::sort(fold.test.begin(), fold.test.end());
  }
  return folds;
}

std::vector<SplitIndices> make_cv_folds(const Dataset& dataset, std::size_t k,
                                        std::uint64_t seed) {
  return make_cv_folds(dataset.subjects.size(), k, seed);
}

std::size_t count_preterm(const Dataset& dataset, double threshold_weeks) {
  return static_cast<std::size_t>(
      std::count_if(dataset.subjects.begin(), dataset.subjects.end(), [&](const Subject& s) {
        return s.meta.ga_birth && *s.meta.ga_birth < threshold_weeks;
      }));
}

std::string participant_id(const std::string& subject_id) {
  const auto pos = subject_id.find("_ses-");
  return pos == std::string::npos ? subject_id : subject_id.substr(0, pos);
}

Dataset filter_repeat_scans(const Dataset& dataset, ScanPolicy policy,
                            double preterm_threshold_weeks) {
  // participant -> index of the scan kept so far
  std::map<std::string, std::size_t> keep;
  for (std::size_t i = 0; i < dataset.subjects.size(); ++i) {
    const auto& meta = dataset.subjects[i].meta;
    if (!meta.ga_birth || *meta.ga_birth >= preterm_threshold_weeks || !meta.pma_scan) continue;
    const auto id = participant_id(meta.subject_id);
    auto [it, inserted] = keep.emplace(id, i);
    if (inserted) continue;
    const double current = *dataset.subjects[it->second].meta.pma_scan;
    const bool better = policy == ScanPolicy::keep_earliest ? *meta.pma_scan < current
                                                            : *meta.pma_scan > current;
    if (better) it->second = i;
  }
  Dataset out;
  out.icosphere_order = dataset.icosphere_order;
  out.channel_names = dataset.channel_names;
  out.stats = dataset.stats;
  for (std::size_t i = 0; i < dataset.subjects.size(); ++i) {
    const auto& meta = dataset.subjects[i].meta;
    const bool candidate = meta.ga_birth && *meta.ga_birth < preterm_threshold_weeks &&
                           meta.pma_scan;
    if (candidate && keep.at(participant_id(meta.subject_id)) != i) continue;
    out.subjects.push_back(dataset.subjects[i]);
  }
  return out;
}

}  // namespace corticast::dataio
