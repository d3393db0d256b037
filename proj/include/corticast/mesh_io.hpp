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

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "corticast/mesh.hpp"

namespace corticast::mesh {

// ".smesh": "SMSH", u32 version 1, u32 n_vertices, u32 n_triangles,
// f32 xyz per vertex, u32 index triple per triangle. All little-endian.
std::vector<std::uint8_t> encode_smesh(const SphereMesh& mesh);
// Vertices are re-projected onto the unit sphere after widening to double,
// so a decoded mesh satisfies the unit-norm invariant at double precision.
SphereMesh decode_smesh(std::span<const std::uint8_t> bytes);

// ".sfeat": "SFTR", u32 version 1, u32 n_vertices, u32 n_channels,
// {u16 length, UTF-8 name} per channel, then channel-major f32 values.
std::vector<std::uint8_t> encode_sfeat(const FeatureField& field);
FeatureField decode_sfeat(std::span<const std::uint8_t> bytes);

void save_smesh(const SphereMesh& mesh, const std::filesystem::path& path);
SphereMesh load_smesh(const std::filesystem::path& path);
void save_sfeat(const FeatureField& field, const std::filesystem::path& path);
FeatureField load_sfeat(const std::filesystem::path& path);

// The mesh as it reads back from a .smesh file (f32 coordinates,
// re-normalized).
SphereMesh at_file_precision(const SphereMesh& mesh);

}  // namespace corticast::mesh
