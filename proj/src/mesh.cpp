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

#include "corticast/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>
#include <utility>

#include "corticast/error.hpp"
#include "corticast/parallel.hpp"

namespace corticast::mesh {

namespace {

constexpr double kWeightTolerance = 1e-9;
constexpr double kDirectionTolerance = 1e-9;
constexpr double kCapMargin = 1e-6;

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

void check_direction(const Vec3& d) {
  const double norm = std::sqrt(dot(d, d));
  if (!(std::abs(norm - 1.0) <= kDirectionTolerance)) {
    throw std::invalid_argument("locate: direction is not unit length");
  }
}

// Tests one triangle; on acceptance updates `best` if it has a larger
// minimum weight than the current best.
void consider(const SphereMesh& mesh, std::size_t t, const Vec3& direction,
              double& best_score, BarycentricHit& best) {
  std::array<double, 3> w;
  if (!ray_plane_weights(mesh, mesh.triangles[t], direction, w)) return;
  const double score = std::min({w[0], w[1], w[2]});
  if (score < -kWeightTolerance) return;
  if (score > best_score) {
    best_score = score;
    best.triangle_index = t;
    best.weights = w;
  }
}

BarycentricHit finish(BarycentricHit hit) {
  double sum = 0.0;
  for (double& w : hit.weights) {
    w = std::clamp(w, 0.0, 1.0);
    sum += w;
  }
  for (double& w : hit.weights) w /= sum;
  return hit;
}

constexpr double kNoHit = -std::numeric_limits<double>::infinity();

BarycentricHit scan_all(const SphereMesh& mesh, const Vec3& direction) {
  double best_score = kNoHit;
  BarycentricHit best;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    consider(mesh, t, direction, best_score, best);
  }
  if (best_score == kNoHit) {
    throw SchemaError("locate: no triangle contains the direction (mesh not closed?)");
  }
  return finish(best);
}

double latitude(const Vec3& d) { return std::asin(std::clamp(d[2], -1.0, 1.0)); }
double longitude(const Vec3& d) { return std::atan2(d[1], d[0]); }

}  // namespace

FeatureField::FeatureField(std::size_t n_vertices, std::vector<std::string> channel_names)
    : n_vertices_(n_vertices),
      names_(std::move(channel_names)),
      values_(n_vertices_ * names_.size(), 0.0) {}

std::size_t FeatureField::find_channel(const std::string& name) const {
  return static_cast<std::size_t>(std::find(names_.begin(), names_.end(), name) -
                                  names_.begin());
}

Vec3 normalized(const Vec3& v) {
  const double norm = std::sqrt(dot(v, v));
  return {v[0] / norm, v[1] / norm, v[2] / norm};
}

std::size_t icosphere_vertex_count(int order) {
  std::size_t faces = 20;
  for (int k = 0; k < order; ++k) faces *= 4;
  return faces / 2 + 2;
}

SphereMesh icosphere(int order) {
  if (order < 0 || order > kMaxIcosphereOrder) {
    throw std::invalid_argument("icosphere: order must be in [0, " +
                                std::to_string(kMaxIcosphereOrder) + "]");
  }
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  SphereMesh mesh;
  mesh.vertices = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1},
  };
  for (auto& v : mesh.vertices) v = normalized(v);
  mesh.triangles = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
  };

  for (int level = 0; level < order; ++level) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    edges.reserve(mesh.triangles.size() * 3);
    for (const auto& t : mesh.triangles) {
      for (int i = 0; i < 3; ++i) {
        const auto a = t[i];
        const auto b = t[(i + 1) % 3];
        edges.emplace_back(std::min(a, b), std::max(a, b));
      }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
    mesh.vertices.reserve(mesh.vertices.size() + edges.size());
    for (const auto& [a, b] : edges) {
      mesh.vertices.push_back(normalized(add(mesh.vertices[a], mesh.vertices[b])));
    }
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const std::pair key{std::min(a, b), std::max(a, b)};
      const auto it = std::lower_bound(edges.begin(), edges.end(), key);
      return base + static_cast<std::uint32_t>(it - edges.begin());
    };

    std::vector<Triangle> refined;
    refined.reserve(mesh.triangles.size() * 4);
    for (const auto& t : mesh.triangles) {
      const auto ab = midpoint(t[0], t[1]);
      const auto bc = midpoint(t[1], t[2]);
      const auto ca = midpoint(t[2], t[0]);
      refined.push_back({t[0], ab, ca});
      refined.push_back({t[1], bc, ab});
      refined.push_back({t[2], ca, bc});
      refined.push_back({ab, bc, ca});
    }
    mesh.triangles = std::move(refined);
  }
  return mesh;
}

void validate(const SphereMesh& mesh, double norm_tolerance) {
  const auto n = mesh.vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double norm = std::sqrt(dot(mesh.vertices[i], mesh.vertices[i]));
    if (!(std::abs(norm - 1.0) <= norm_tolerance)) {
      throw SchemaError("mesh: vertex " + std::to_string(i) + " is not unit length");
    }
  }
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> edge_uses;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (auto idx : tri) {
      if (idx >= n) {
        throw SchemaError("mesh: triangle " + std::to_string(t) + " index out of range");
      }
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
      throw SchemaError("mesh: triangle " + std::to_string(t) + " is degenerate");
    }
    for (int i = 0; i < 3; ++i) {
      const auto a = tri[i];
      const auto b = tri[(i + 1) % 3];
      ++edge_uses[{std::min(a, b), std::max(a, b)}];
    }
  }
  for (const auto& [edge, uses] : edge_uses) {
    if (uses != 2) {
      throw SchemaError("mesh: edge (" + std::to_string(edge.first) + ", " +
                        std::to_string(edge.second) + ") is used by " +
                        std::to_string(uses) + " triangles");
    }
  }
  const auto euler = static_cast<long long>(n) - static_cast<long long>(edge_uses.size()) +
                     static_cast<long long>(mesh.triangles.size());
  if (euler != 2) {
    throw SchemaError("mesh: Euler characteristic " + std::to_string(euler) + " != 2");
  }
}

SphereMesh mirror_sagittal(const SphereMesh& mesh) {
  SphereMesh out;
  out.vertices.reserve(mesh.vertices.size());
  for (const auto& v : mesh.vertices) out.vertices.push_back({-v[0], v[1], v[2]});
  out.triangles.reserve(mesh.triangles.size());
  for (const auto& t : mesh.triangles) out.triangles.push_back({t[0], t[2], t[1]});
  return out;
}

// Directions this close to a corner (a few ulps of a unit vector) are that
// corner.
constexpr double kCornerSnap = 1e-14;

bool ray_plane_weights(const SphereMesh& mesh, const Triangle& tri, const Vec3& direction,
                       std::array<double, 3>& weights) {
  const Vec3& a = mesh.vertices[tri[0]];
  const Vec3& b = mesh.vertices[tri[1]];
  const Vec3& c = mesh.vertices[tri[2]];
  const Vec3 normal = cross(sub(b, a), sub(c, a));
  const double facing = dot(normal, direction);
  if (!(facing > 0.0)) return false;
  for (std::size_t k = 0; k < 3; ++k) {
    const Vec3& v = mesh.vertices[tri[k]];
    if (std::abs(direction[0] - v[0]) <= kCornerSnap && std::abs(direction[1] - v[1]) <= kCornerSnap &&
        std::abs(direction[2] - v[2]) <= kCornerSnap) {
      weights = {0.0, 0.0, 0.0};
      weights[k] = 1.0;
      return true;
    }
  }
  const double t = dot(normal, a) / facing;
  if (!(t > 0.0)) return false;
  const Vec3 p{t * direction[0], t * direction[1], t * direction[2]};
  const double area2 = dot(normal, normal);
  weights[0] = dot(cross(sub(b, p), sub(c, p)), normal) / area2;
  weights[1] = dot(cross(sub(c, p), sub(a, p)), normal) / area2;
  weights[2] = dot(cross(sub(a, p), sub(b, p)), normal) / area2;
  return true;
}

BarycentricHit locate_brute_force(const SphereMesh& mesh, const Vec3& direction) {
  if (mesh.triangles.empty()) throw std::invalid_argument("locate: empty mesh");
  check_direction(direction);
  return scan_all(mesh, direction);
}

BarycentricHit locate(const SphereMesh& mesh, const Vec3& direction) {
  return locate_brute_force(mesh, direction);
}

TriangleLocator::TriangleLocator(const SphereMesh& mesh) : mesh_(&mesh) {
  if (mesh.triangles.empty()) throw std::invalid_argument("TriangleLocator: empty mesh");
  const double bands = 2.0 * std::sqrt(static_cast<double>(mesh.triangles.size()));
  n_lat_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(bands)));
  n_lon_ = 2 * n_lat_;

  constexpr double pi = std::numbers::pi;
  const double lat_step = pi / static_cast<double>(n_lat_);
  const double lon_step = 2.0 * pi / static_cast<double>(n_lon_);
  auto lat_band = [&](double lat) {
    const auto b = static_cast<long long>(std::floor((lat + pi / 2) / lat_step));
    return static_cast<std::size_t>(std::clamp<long long>(b, 0, static_cast<long long>(n_lat_) - 1));
  };

  // Two passes over the same cap ranges: count, then fill (CSR layout).
  std::vector<std::uint32_t> counts(n_lat_ * n_lon_, 0);
  auto for_each_bucket = [&](std::size_t t, auto&& visit) {
    const auto& tri = mesh.triangles[t];
    const Vec3 center = normalized(add(add(mesh.vertices[tri[0]], mesh.vertices[tri[1]]),
                                       mesh.vertices[tri[2]]));
    double radius = 0.0;
    for (auto idx : tri) {
      const Vec3 v = normalized(mesh.vertices[idx]);
      radius = std::max(radius, std::acos(std::clamp(dot(center, v), -1.0, 1.0)));
    }
    radius += kCapMargin;
    const double lat_c = latitude(center);
    const double lat_lo = lat_c - radius;
    const double lat_hi = lat_c + radius;
    const std::size_t band_lo = lat_band(std::max(lat_lo, -pi / 2));
    const std::size_t band_hi = lat_band(std::min(lat_hi, pi / 2));
    bool all_lon = lat_hi >= pi / 2 || lat_lo <= -pi / 2;
    long long bin_lo = 0;
    long long bin_hi = static_cast<long long>(n_lon_) - 1;
    if (!all_lon) {
      const double ratio = std::sin(radius) / std::cos(lat_c);
      if (ratio >= 1.0) {
        all_lon = true;
      } else {
        const double half = std::asin(ratio) + kCapMargin;
        const double lon_c = longitude(center);
        bin_lo = static_cast<long long>(std::floor((lon_c - half + pi) / lon_step));
        bin_hi = static_cast<long long>(std::floor((lon_c + half + pi) / lon_step));
        if (bin_hi - bin_lo + 1 >= static_cast<long long>(n_lon_)) all_lon = true;
      }
    }
    if (all_lon) {
      bin_lo = 0;
      bin_hi = static_cast<long long>(n_lon_) - 1;
    }
    const auto n_lon = static_cast<long long>(n_lon_);
    for (std::size_t band = band_lo; band <= band_hi; ++band) {
      for (long long bin = bin_lo; bin <= bin_hi; ++bin) {
        const auto wrapped = static_cast<std::size_t>(((bin % n_lon) + n_lon) % n_lon);
        visit(band * n_lon_ + wrapped);
      }
    }
  };

  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    for_each_bucket(t, [&](std::size_t bucket) { ++counts[bucket]; });
  }
  bucket_offsets_.assign(counts.size() + 1, 0);
  for (std::size_t b = 0; b < counts.size(); ++b) {
    bucket_offsets_[b + 1] = bucket_offsets_[b] + counts[b];
  }
  bucket_triangles_.resize(bucket_offsets_.back());
  std::vector<std::uint32_t> cursor(bucket_offsets_.begin(), bucket_offsets_.end() - 1);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    for_each_bucket(t, [&](std::size_t bucket) {
      bucket_triangles_[cursor[bucket]++] = static_cast<std::uint32_t>(t);
    });
  }
}

std::size_t TriangleLocator::bucket_of(const Vec3& d) const {
  constexpr double pi = std::numbers::pi;
  const auto band = std::clamp<long long>(
      static_cast<long long>(std::floor((latitude(d) + pi / 2) / (pi / static_cast<double>(n_lat_)))),
      0, static_cast<long long>(n_lat_) - 1);
  const auto bin = std::clamp<long long>(
      static_cast<long long>(std::floor((longitude(d) + pi) / (2 * pi / static_cast<double>(n_lon_)))),
      0, static_cast<long long>(n_lon_) - 1);
  return static_cast<std::size_t>(band) * n_lon_ + static_cast<std::size_t>(bin);
}

BarycentricHit TriangleLocator::locate(const Vec3& direction) const {
  check_direction(direction);
  const std::size_t bucket = bucket_of(direction);
  double best_score = kNoHit;
  BarycentricHit best;
  // Candidates are stored in ascending triangle order, so ties resolve as in
  // the full scan.
  for (auto i = bucket_offsets_[bucket]; i < bucket_offsets_[bucket + 1]; ++i) {
    consider(*mesh_, bucket_triangles_[i], direction, best_score, best);
  }
  if (best_score == kNoHit) return scan_all(*mesh_, direction);
  return finish(best);
}

double interpolate(const SphereMesh& mesh, const BarycentricHit& hit,
                   std::span<const double> values) {
  const auto& tri = mesh.triangles[hit.triangle_index];
  std::size_t heavy = 0;
  for (std::size_t i = 1; i < 3; ++i) {
    if (hit.weights[i] > hit.weights[heavy]) heavy = i;
  }
  const double anchor = values[tri[heavy]];
  double out = anchor;
  for (std::size_t i = 0; i < 3; ++i) {
    if (i == heavy) continue;
    out += hit.weights[i] * (values[tri[i]] - anchor);
  }
  return out;
}

FeatureField resample(const SphereMesh& source_mesh, const FeatureField& source_field,
                      const SphereMesh& target_mesh) {
  if (source_field.vertex_count() != source_mesh.vertex_count()) {
    throw std::invalid_argument("resample: field has " +
                                std::to_string(source_field.vertex_count()) +
                                " vertices, mesh has " +
                                std::to_string(source_mesh.vertex_count()));
  }
  const TriangleLocator locator(source_mesh);
  FeatureField out(target_mesh.vertex_count(), source_field.channel_names());
  const std::size_t channels = source_field.channel_count();
  parallel_for(target_mesh.vertex_count(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      const auto hit = locator.locate(normalized(target_mesh.vertices[v]));
      for (std::size_t c = 0; c < channels; ++c) {
        out.at(c, v) = interpolate(source_mesh, hit, source_field.channel(c));
      }
    }
  });
  return out;
}

}  // namespace corticast::mesh
