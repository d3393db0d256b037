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

#include <cmath>
#include <map>
#include <numbers>

#include "corticast/error.hpp"
#include "corticast/mesh.hpp"
#include "corticast/random.hpp"
#include "support/oracles.hpp"

using namespace corticast;
using namespace corticast::mesh;

namespace {

Vec3 random_direction(Rng& rng) {
  for (;;) {
    Vec3 v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n > 0.1 && n <= 1.0) return {v[0] / n, v[1] / n, v[2] / n};
  }
}

FeatureField smooth_field(const SphereMesh& m) {
  FeatureField f(m.vertices.size(), {"a", "b"});
  for (std::size_t v = 0; v < m.vertices.size(); ++v) {
    const auto& p = m.vertices[v];
    f.at(0, v) = std::sin(3 * p[0]) + p[1] * p[2];
    f.at(1, v) = 2.5 - p[2];
  }
  return f;
}

}  // namespace

TEST_CASE("icosphere counts follow the subdivision recurrences") {
  for (int k = 0; k <= 5; ++k) {
    CAPTURE(k);
    const auto m = icosphere(k);
    const std::size_t p = std::size_t{1} << (2 * k);
    CHECK(m.vertices.size() == 10 * p + 2);
    CHECK(m.triangles.size() == 20 * p);
    const auto e = oracle::edges(m);
    CHECK(e.size() == 30 * p);
    CHECK(static_cast<long>(m.vertices.size()) - static_cast<long>(e.size()) +
              static_cast<long>(m.triangles.size()) ==
          2);
    CHECK(icosphere_vertex_count(k) == m.vertices.size());
    for (const auto& v : m.vertices) {
      CHECK(std::abs(std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) - 1.0) <= 1e-12);
    }
    CHECK_NOTHROW(validate(m));
  }
}

TEST_CASE("order 6 has 40962 vertices") {
  CHECK(icosphere(6).vertices.size() == 40962);
}

TEST_CASE("every edge borders exactly two triangles") {
  const auto m = icosphere(3);
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> uses;
  for (const auto& t : m.triangles) {
    for (int k = 0; k < 3; ++k) {
      const auto a = t[k], b = t[(k + 1) % 3];
      ++uses[{std::min(a, b), std::max(a, b)}];
    }
  }
  for (const auto& [edge, n] : uses) CHECK(n == 2);
}

TEST_CASE("triangles are wound outward") {
  const auto m = icosphere(2);
  for (const auto& t : m.triangles) {
    const auto& a = m.vertices[t[0]];
    const auto& b = m.vertices[t[1]];
    const auto& c = m.vertices[t[2]];
    CHECK(oracle::det3(a, b, c) > 0);
  }
}

TEST_CASE("order 0 is the normalized golden-ratio icosahedron") {
  const auto m = icosphere(0);
  const double phi = std::numbers::phi;
  const double n = std::sqrt(1 + phi * phi);
  for (const auto& v : m.vertices) {
    std::array<double, 3> a{std::abs(v[0]) * n, std::abs(v[1]) * n, std::abs(v[2]) * n};
    std::sort(a.begin(), a.end());
    CHECK(a[0] == doctest::Approx(0).epsilon(1e-12));
    CHECK(a[1] == doctest::Approx(1).epsilon(1e-12));
    CHECK(a[2] == doctest::Approx(phi).epsilon(1e-12));
  }
}

TEST_CASE("subdivision keeps coarser vertices as a prefix") {
  const auto coarse = icosphere(2);
  const auto fine = icosphere(3);
  for (std::size_t i = 0; i < coarse.vertices.size(); ++i) CHECK(coarse.vertices[i] == fine.vertices[i]);
}

TEST_CASE("icosphere is deterministic and rejects bad orders") {
  CHECK(icosphere(3).vertices == icosphere(3).vertices);
  CHECK_THROWS_AS(icosphere(-1), std::invalid_argument);
  CHECK_THROWS_AS(icosphere(kMaxIcosphereOrder + 1), std::invalid_argument);
}

TEST_CASE("validate reports broken meshes") {
  auto m = icosphere(1);
  SUBCASE("index out of range") {
    m.triangles[0][0] = static_cast<std::uint32_t>(m.vertices.size());
    CHECK_THROWS_AS(validate(m), SchemaError);
  }
  SUBCASE("non-unit vertex") {
    m.vertices[3][0] *= 1.01;
    CHECK_THROWS_AS(validate(m), SchemaError);
  }
  SUBCASE("hole") {
    m.triangles.pop_back();
    CHECK_THROWS_AS(validate(m), SchemaError);
  }
}

TEST_CASE("mirror_sagittal is an involution and keeps the mesh valid") {
  const auto m = icosphere(2);
  const auto once = mirror_sagittal(m);
  CHECK_NOTHROW(validate(once));
  for (std::size_t v = 0; v < m.vertices.size(); ++v) CHECK(once.vertices[v][0] == -m.vertices[v][0]);
  const auto twice = mirror_sagittal(once);
  CHECK(twice.vertices == m.vertices);
}

TEST_CASE("locate agrees with the Cramer oracle") {
  Rng rng(11);
  for (int k = 0; k <= 4; ++k) {
    const auto m = icosphere(k);
    const TriangleLocator locator(m);
    for (int q = 0; q < 300; ++q) {
      const auto d = random_direction(rng);
      const auto expected = oracle::cramer_locate(m, d);
      REQUIRE(expected.has_value());
      const auto brute = locate_brute_force(m, d);
      const auto fast = locator.locate(d);
      CHECK(brute.triangle_index == expected->triangle);
      CHECK(fast.triangle_index == brute.triangle_index);
      for (int i = 0; i < 3; ++i) {
        CHECK(std::abs(brute.weights[i] - expected->weights[i]) <= 1e-12);
        CHECK(fast.weights[i] == brute.weights[i]);
      }
    }
  }
}

TEST_CASE("barycentric weights are a convex combination") {
  const auto m = icosphere(3);
  Rng rng(5);
  for (int q = 0; q < 500; ++q) {
    const auto hit = locate(m, random_direction(rng));
    double sum = 0;
    for (double w : hit.weights) {
      CHECK(w >= 0.0);
      CHECK(w <= 1.0);
      sum += w;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("a vertex direction gives a one-hot weight") {
  const auto m = icosphere(2);
  for (std::size_t v = 0; v < m.vertices.size(); v += 7) {
    const auto hit = locate(m, m.vertices[v]);
    const auto& t = m.triangles[hit.triangle_index];
    int hot = 0;
    for (int i = 0; i < 3; ++i) {
      if (t[i] == v) {
        CHECK(hit.weights[i] == 1.0);
        ++hot;
      } else {
        CHECK(hit.weights[i] == 0.0);
      }
    }
    CHECK(hot == 1);
  }
}

TEST_CASE("locate rejects non-unit directions") {
  const auto m = icosphere(1);
  CHECK_THROWS_AS(locate(m, {2.0, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("the accelerated locator scales its grid with the mesh") {
  const auto small = icosphere(1);
  const auto large = icosphere(4);
  const TriangleLocator a(small), b(large);
  CHECK(a.latitude_bands() < b.latitude_bands());
  CHECK(b.longitude_bins() == 2 * b.latitude_bands());
}

TEST_CASE("resampling a constant field is exact") {
  const auto src = icosphere(3);
  FeatureField f(src.vertices.size(), {"c"});
  for (std::size_t v = 0; v < src.vertices.size(); ++v) f.at(0, v) = 0.1 + 0.2;
  for (int k = 0; k <= 4; ++k) {
    const auto out = resample(src, f, icosphere(k));
    for (double x : out.values()) CHECK(x == 0.1 + 0.2);
  }
}

TEST_CASE("identity resampling is bitwise") {
  const auto m = icosphere(3);
  const auto f = smooth_field(m);
  CHECK(resample(m, f, m) == f);
}

TEST_CASE("resampling a smooth field converges with source resolution") {
  // Rotated so no target vertex coincides with a source vertex.
  auto target = icosphere(2);
  const double a = 0.3, b = 0.7;
  for (auto& v : target.vertices) {
    const Vec3 r{std::cos(a) * v[0] - std::sin(a) * v[1], std::sin(a) * v[0] + std::cos(a) * v[1], v[2]};
    v = {r[0], std::cos(b) * r[1] - std::sin(b) * r[2], std::sin(b) * r[1] + std::cos(b) * r[2]};
  }
  auto error_at = [&](int order) {
    const auto src = icosphere(order);
    const auto out = resample(src, smooth_field(src), target);
    const auto exact = smooth_field(target);
    double worst = 0;
    for (std::size_t i = 0; i < out.values().size(); ++i) {
      worst = std::max(worst, std::abs(out.values()[i] - exact.values()[i]));
    }
    return worst;
  };
  const double coarse = error_at(3), fine = error_at(5);
  CHECK(fine < coarse / 4);
}

TEST_CASE("mirroring the source twice recovers the unmirrored resampling") {
  const auto src = icosphere(3);
  const auto f = smooth_field(src);
  const auto target = icosphere(2);
  const auto plain = resample(src, f, target);
  const auto twice = resample(mirror_sagittal(mirror_sagittal(src)), f, target);
  for (std::size_t i = 0; i < plain.values().size(); ++i) {
    CHECK(std::abs(plain.values()[i] - twice.values()[i]) <= 1e-12);
  }
}

TEST_CASE("resample checks the field against the mesh") {
  const auto src = icosphere(2);
  FeatureField f(src.vertices.size() + 1, {"x"});
  CHECK_THROWS_AS(resample(src, f, icosphere(1)), std::invalid_argument);
}

TEST_CASE("interpolate matches the weighted sum") {
  const auto m = icosphere(2);
  const auto f = smooth_field(m);
  Rng rng(3);
  for (int q = 0; q < 200; ++q) {
    const auto hit = locate(m, random_direction(rng));
    const auto& t = m.triangles[hit.triangle_index];
    const auto ch = f.channel(0);
    const double direct =
        hit.weights[0] * ch[t[0]] + hit.weights[1] * ch[t[1]] + hit.weights[2] * ch[t[2]];
    CHECK(std::abs(interpolate(m, hit, ch) - direct) <= 1e-12);
  }
}
