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
#include <span>
#include <string>
#include <vector>

namespace corticast::mesh {

using Vec3 = std::array<double, 3>;
using Triangle = std::array<std::uint32_t, 3>;

// Triangulated unit sphere. Triangles are counter-clockwise seen from outside.
struct SphereMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t triangle_count() const { return triangles.size(); }
};

// Per-vertex multi-channel field, stored channel-major.
class FeatureField {
 public:
  FeatureField() = default;
  FeatureField(std::size_t n_vertices, std::vector<std::string> channel_names);

  std::size_t vertex_count() const { return n_vertices_; }
  std::size_t channel_count() const { return names_.size(); }
  const std::vector<std::string>& channel_names() const { return names_; }
  // Index of `name`, or channel_count() when absent.
  std::size_t find_channel(const std::string& name) const;

  std::span<double> channel(std::size_t c) {
    return {values_.data() + c * n_vertices_, n_vertices_};
  }
  std::span<const double> channel(std::size_t c) const {
    return {values_.data() + c * n_vertices_, n_vertices_};
  }
  double& at(std::size_t c, std::size_t v) { return values_[c * n_vertices_ + v]; }
  double at(std::size_t c, std::size_t v) const { return values_[c * n_vertices_ + v]; }
  std::span<const double> values() const { return values_; }

  bool operator==(const FeatureField&) const = default;

 private:
  std::size_t n_vertices_ = 0;
  std::vector<std::string> names_;
  std::vector<double> values_;
};

struct BarycentricHit {
  std::size_t triangle_index = 0;
  std::array<double, 3> weights{};
};

constexpr int kMaxIcosphereOrder = 8;

std::size_t icosphere_vertex_count(int order);

// Regular icosahedron refined `order` times by midpoint subdivision. Each
// level appends one midpoint per edge, ordered by the sorted (min, max)
// vertex pair, and projects it onto the unit sphere.
SphereMesh icosphere(int order);

// Throws SchemaError describing the first violated invariant: index range,
// degenerate triangles, vertex norms (within `norm_tolerance`), and the
// closed-manifold edge condition.
void validate(const SphereMesh& mesh, double norm_tolerance = 1e-12);

// Reflection x -> -x with triangle winding flipped to keep outward
// orientation.
SphereMesh mirror_sagittal(const SphereMesh& mesh);

// Barycentric weights of the intersection between the ray along `direction`
// and the plane of `tri`, or false when the plane faces away. A direction
// within 1e-14 of a corner gets that corner's exact one-hot weights.
bool ray_plane_weights(const SphereMesh& mesh, const Triangle& tri,
                       const Vec3& direction, std::array<double, 3>& weights);

// Scans every triangle. Reference semantics for TriangleLocator.
BarycentricHit locate_brute_force(const SphereMesh& mesh, const Vec3& direction);

// Single query without an index; use TriangleLocator for repeated queries.
// `direction` must be unit length within 1e-9.
BarycentricHit locate(const SphereMesh& mesh, const Vec3& direction);

// Latitude-longitude bucket grid over triangle bounding caps, with a
// brute-force fallback when no bucket candidate contains the direction.
class TriangleLocator {
 public:
  explicit TriangleLocator(const SphereMesh& mesh);

  BarycentricHit locate(const Vec3& direction) const;
  const SphereMesh& mesh() const { return *mesh_; }
  std::size_t latitude_bands() const { return n_lat_; }
  std::size_t longitude_bins() const { return n_lon_; }

 private:
  std::size_t bucket_of(const Vec3& direction) const;

  const SphereMesh* mesh_;
  std::size_t n_lat_ = 1;
  std::size_t n_lon_ = 1;
  std::vector<std::uint32_t> bucket_offsets_;
  std::vector<std::uint32_t> bucket_triangles_;
};

// Interpolates `values` (one per mesh vertex) at `hit`. Expressed relative
// to the heaviest corner so constant fields and exact vertex hits reproduce
// the source value bitwise.
double interpolate(const SphereMesh& mesh, const BarycentricHit& hit,
                   std::span<const double> values);

FeatureField resample(const SphereMesh& source_mesh, const FeatureField& source_field,
                      const SphereMesh& target_mesh);

Vec3 normalized(const Vec3& v);

}  // namespace corticast::mesh
