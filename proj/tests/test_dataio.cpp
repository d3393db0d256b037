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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "corticast/binary_io.hpp"
#include "corticast/error.hpp"
#include "corticast/mesh_io.hpp"
#include "corticast/synthetic.hpp"
#include "support/oracles.hpp"

using namespace corticast;
using namespace corticast::dataio;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "corticast_dataio_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// Replaces line `index` (0 = header) of a manifest.
void replace_line(const fs::path& p, std::size_t index, const std::string& line) {
  std::istringstream in(read_text(p));
  std::string out, l;
  for (std::size_t i = 0; std::getline(in, l); ++i) out += (i == index ? line : l) + "\n";
  write(p, out);
}

}  // namespace

TEST_CASE("manifest round trip") {
  const auto data = generate_synthetic(12, 1, 3).dataset;
  const auto dir = fresh_dir("roundtrip");
  save_manifest(data, dir / "manifest.csv");
  const auto back = load_manifest(dir / "manifest.csv");
  CHECK(back.icosphere_order == 1);
  CHECK(back.channel_names == data.channel_names);
  REQUIRE(back.subjects.size() == data.subjects.size());
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    CHECK(back.subjects[i].meta == data.subjects[i].meta);
    const auto expect = mesh::decode_sfeat(mesh::encode_sfeat(data.subjects[i].features));
    CHECK(back.subjects[i].features == expect);
  }
  CHECK(read_text(dir / "manifest.csv").rfind(kManifestHeader, 0) == 0);
}

TEST_CASE("empty cells are absent values") {
  const auto data = generate_synthetic(3, 0, 1).dataset;
  const auto dir = fresh_dir("missing");
  save_manifest(data, dir / "m.csv");
  replace_line(dir / "m.csv", 2, "sub-0001,val,,40.5,U,,,features/sub-0001.sfeat");
  const auto back = load_manifest(dir / "m.csv");
  const auto& meta = back.subjects[1].meta;
  CHECK_FALSE(meta.ga_birth.has_value());
  CHECK_FALSE(meta.birthweight.has_value());
  CHECK_FALSE(meta.head_circumference.has_value());
  CHECK(meta.pma_scan == 40.5);
  CHECK(meta.sex == Sex::unknown);
  CHECK(meta.split == Split::val);
}

TEST_CASE("manifest errors carry line numbers") {
  const auto data = generate_synthetic(4, 0, 1).dataset;
  const auto dir = fresh_dir("errors");
  save_manifest(data, dir / "m.csv");
  const auto good = read_text(dir / "m.csv");

  SUBCASE("bad number") {
    replace_line(dir / "m.csv", 3, "sub-0002,train,abc,40,M,3,34,features/sub-0002.sfeat");
    try {
      load_manifest(dir / "m.csv");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 4);
    }
  }
  SUBCASE("wrong column count") {
    replace_line(dir / "m.csv", 1, "sub-0000,train,39");
    CHECK_THROWS_AS(load_manifest(dir / "m.csv"), ParseError);
  }
  SUBCASE("wrong header") {
    replace_line(dir / "m.csv", 0, "id,split");
    CHECK_THROWS_AS(load_manifest(dir / "m.csv"), ParseError);
  }
  SUBCASE("unknown split") {
    replace_line(dir / "m.csv", 2, "sub-0001,holdout,39,40,M,3,34,features/sub-0001.sfeat");
    CHECK_THROWS_AS(load_manifest(dir / "m.csv"), ParseError);
  }
  SUBCASE("duplicate subject") {
    replace_line(dir / "m.csv", 2, "sub-0000,train,39,40,M,3,34,features/sub-0001.sfeat");
    CHECK_THROWS_AS(load_manifest(dir / "m.csv"), ParseError);
  }
  SUBCASE("ages out of range") {
    replace_line(dir / "m.csv", 2, "sub-0001,train,19,40,M,3,34,features/sub-0001.sfeat");
    CHECK_THROWS_AS(load_manifest(dir / "m.csv"), ParseError);
  }
  SUBCASE("vertex count mismatch") {
    mesh::FeatureField f(42, data.channel_names);
    mesh::save_sfeat(f, dir / "features" / "sub-0003.sfeat");
    CHECK_THROWS_AS(load_manifest(dir / "m.csv"), SchemaError);
  }
  SUBCASE("expected order mismatch") {
    CHECK_THROWS_AS(load_manifest(dir / "m.csv", 2), SchemaError);
  }
  SUBCASE("channel mismatch") {
    mesh::FeatureField f(12, {"a", "b", "c", "d"});
    mesh::save_sfeat(f, dir / "features" / "sub-0003.sfeat");
    CHECK_THROWS_AS(load_manifest(dir / "m.csv"), SchemaError);
  }
  SUBCASE("missing feature file") {
    fs::remove(dir / "features" / "sub-0002.sfeat");
    CHECK_THROWS_AS(load_manifest(dir / "m.csv"), Error);
  }
}

TEST_CASE("standardization uses only the selected subjects") {
  const auto data = generate_synthetic(30, 1, 9).dataset;
  const auto train = data.indices_of(Split::train);
  const auto stats = fit_standardization(data, train);
  REQUIRE(stats.channels.size() == 4);
  for (std::size_t c = 0; c < 4; ++c) {
    double sum = 0, sq = 0, n = 0;
    for (std::size_t s : train) {
      const auto z = apply_standardization(data.subjects[s].features, stats);
      for (double x : z.channel(c)) {
        sum += x;
        sq += x * x;
        ++n;
      }
    }
    CHECK(std::abs(sum / n) <= 1e-9);
    CHECK(std::abs(sq / n - 1.0) <= 1e-9);
  }
  std::vector<double> pma;
  for (std::size_t s : train) pma.push_back(*data.subjects[s].meta.pma_scan);
  CHECK(stats.require(Target::pma_scan).std == doctest::Approx(oracle::population_std(pma)).epsilon(1e-12));
  CHECK(stats == fit_standardization(data));

  auto altered = data;
  for (std::size_t s : altered.indices_of(Split::test)) {
    altered.subjects[s].meta.pma_scan = 44.0;
    for (std::size_t c = 0; c < 4; ++c) {
      for (double& x : altered.subjects[s].features.channel(c)) x += 100.0;
    }
  }
  CHECK(fit_standardization(altered, train) == stats);
}

TEST_CASE("standardization inverts") {
  const auto data = generate_synthetic(10, 1, 2).dataset;
  const auto stats = fit_standardization(data);
  const auto& f = data.subjects[4].features;
  const auto back = invert_standardization(apply_standardization(f, stats), stats);
  for (std::size_t i = 0; i < f.values().size(); ++i) {
    CHECK(std::abs(back.values()[i] - f.values()[i]) <= 1e-12);
  }
  const double z = apply_standardization(38.0, Target::ga_birth, stats);
  CHECK(invert_standardization(z, Target::ga_birth, stats) == doctest::Approx(38.0).epsilon(1e-14));
}

TEST_CASE("degenerate channels are rejected") {
  auto data = generate_synthetic(6, 0, 2).dataset;
  for (auto& s : data.subjects) {
    for (double& x : s.features.channel(2)) x = 1.5;
  }
  try {
    fit_standardization(data);
    FAIL("expected DegenerateChannelError");
  } catch (const DegenerateChannelError& e) {
    CHECK(e.channel() == "thickness");
  }
}

TEST_CASE("unknown channels cannot be standardized") {
  const auto data = generate_synthetic(6, 0, 2).dataset;
  const auto stats = fit_standardization(data);
  mesh::FeatureField other(12, {"myelin"});
  CHECK_THROWS_AS(apply_standardization(other, stats), SchemaError);
}

TEST_CASE("cross-validation folds partition the subjects") {
  const auto folds = make_cv_folds(514, 10, 4);
  REQUIRE(folds.size() == 10);
  std::multiset<std::size_t> tested;
  for (const auto& f : folds) {
    CHECK((f.test.size() == 51 || f.test.size() == 52));
    tested.insert(f.test.begin(), f.test.end());
    std::set<std::size_t> all;
    all.insert(f.train.begin(), f.train.end());
    all.insert(f.val.begin(), f.val.end());
    all.insert(f.test.begin(), f.test.end());
    CHECK(all.size() == 514);
    CHECK(f.train.size() + f.val.size() + f.test.size() == 514);
    CHECK(std::is_sorted(f.test.begin(), f.test.end()));
  }
  CHECK(tested.size() == 514);
  CHECK(std::set<std::size_t>(tested.begin(), tested.end()).size() == 514);
  for (std::size_t i = 0; i < 10; ++i) CHECK(folds[i].val == folds[(i + 1) % 10].test);
}

TEST_CASE("cross-validation folds are seeded") {
  CHECK(make_cv_folds(50, 5, 1)[0].test == make_cv_folds(50, 5, 1)[0].test);
  CHECK(make_cv_folds(50, 5, 1)[0].test != make_cv_folds(50, 5, 2)[0].test);
}

TEST_CASE("two folds still train on something") {
  const auto folds = make_cv_folds(4, 2, 0);
  REQUIRE(folds.size() == 2);
  std::set<std::size_t> tested;
  for (const auto& f : folds) {
    CHECK(f.test.size() == 2);
    CHECK(f.val.size() == 1);
    CHECK(f.train.size() == 1);
    tested.insert(f.test.begin(), f.test.end());
  }
  CHECK(tested.size() == 4);
}

TEST_CASE("fold count must fit the subjects") {
  CHECK_THROWS_AS(make_cv_folds(5, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_cv_folds(5, 6, 0), std::invalid_argument);
}

TEST_CASE("preterm counting") {
  const auto data = generate_synthetic(530, 0, 0).dataset;
  CHECK(count_preterm(data) == 111);
  CHECK(count_preterm(data, 20.0) == 0);
}

TEST_CASE("participant ids strip the session") {
  CHECK(participant_id("sub-CC00060XX03_ses-12501") == "sub-CC00060XX03");
  CHECK(participant_id("sub-7") == "sub-7");
}

TEST_CASE("repeat preterm scans keep one session") {
  auto data = generate_synthetic(4, 0, 5).dataset;
  auto set_meta = [&](std::size_t i, const char* id, double ga, double pma) {
    data.subjects[i].meta.subject_id = id;
    data.subjects[i].meta.ga_birth = ga;
    data.subjects[i].meta.pma_scan = pma;
  };
  set_meta(0, "sub-a_ses-1", 30.0, 34.0);
  set_meta(1, "sub-a_ses-2", 30.0, 41.0);
  set_meta(2, "sub-b_ses-1", 39.0, 40.0);
  set_meta(3, "sub-b_ses-2", 39.0, 42.0);

  auto ids = [](const Dataset& d) {
    std::vector<std::string> out;
    for (const auto& s : d.subjects) out.push_back(s.meta.subject_id);
    return out;
  };
  CHECK(ids(filter_repeat_scans(data, ScanPolicy::keep_earliest)) ==
        std::vector<std::string>{"sub-a_ses-1", "sub-b_ses-1", "sub-b_ses-2"});
  CHECK(ids(filter_repeat_scans(data, ScanPolicy::keep_latest)) ==
        std::vector<std::string>{"sub-a_ses-2", "sub-b_ses-1", "sub-b_ses-2"});
}

TEST_CASE("default split shape") {
  const auto s530 = default_split_counts(530);
  CHECK(s530.train == 423);
  CHECK(s530.val == 53);
  CHECK(s530.test == 54);
  const auto s200 = default_split_counts(200);
  CHECK(s200.train == 160);
  CHECK(s200.val == 20);
  CHECK(s200.test == 20);
  for (std::size_t n = 1; n < 60; ++n) {
    const auto s = default_split_counts(n);
    CHECK(s.train + s.val + s.test == n);
  }
}

TEST_CASE("synthetic subjects obey the generator contract") {
  const auto out = generate_synthetic(80, 2, 17);
  const auto& data = out.dataset;
  CHECK(data.channel_names == kCorticalChannels);
  CHECK(data.vertex_count() == 162);
  CHECK(data.indices_of(Split::train).size() + data.indices_of(Split::val).size() +
            data.indices_of(Split::test).size() ==
        80);
  const std::size_t signal = data.subjects[0].features.find_channel(kSignalChannel);
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    const auto& s = data.subjects[i];
    CHECK(*s.meta.ga_birth < *s.meta.pma_scan);
    CHECK_NOTHROW(validate(s.meta));
    const auto ch = s.features.channel(signal);
    double mean = 0;
    for (double x : ch) mean += x;
    mean /= static_cast<double>(ch.size());
    CHECK(std::abs(mean - (out.truth.intercept + out.truth.slope * out.truth.latent_age[i])) <= 1e-12);
  }
}

TEST_CASE("synthetic data is seeded") {
  const auto a = generate_synthetic(10, 1, 4).dataset;
  const auto b = generate_synthetic(10, 1, 4).dataset;
  const auto c = generate_synthetic(10, 1, 5).dataset;
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(a.subjects[i].meta == b.subjects[i].meta);
    CHECK(a.subjects[i].features == b.subjects[i].features);
  }
  CHECK(a.subjects[0].meta.pma_scan != c.subjects[0].meta.pma_scan);
}

TEST_CASE("explicit synthetic split counts") {
  SyntheticSpec spec;
  spec.split = SplitCounts{6, 2, 2};
  const auto d = generate_synthetic(10, 0, 1, spec).dataset;
  CHECK(d.indices_of(Split::train).size() == 6);
  spec.split = SplitCounts{6, 2, 1};
  CHECK_THROWS_AS(generate_synthetic(10, 0, 1, spec), std::invalid_argument);
}
