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

#include "corticast/mesh_io.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "corticast/binary_io.hpp"
#include "corticast/error.hpp"

namespace corticast::mesh {

namespace {

constexpr std::uint32_t kVersion = 1;

std::uint32_t checked_u32(std::size_t n, const char* what) {
  if (n > std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument(std::string(what) + " does not fit in u32");
  }
  return static_cast<std::uint32_t>(n);
}

void expect_version(ByteReader& in, const char* what) {
  const auto version = in.u32();
  if (version != kVersion) {
    throw FormatError(std::string(what) + ": unsupported version " + std::to_string(version));
  }
}

}  // namespace

std::vector<std::uint8_t> encode_smesh(const SphereMesh& mesh) {
  ByteWriter out;
  out.text("SMSH");
  out.u32(kVersion);
  out.u32(checked_u32(mesh.vertices.size(), "vertex count"));
  out.u32(checked_u32(mesh.triangles.size(), "triangle count"));
  for (const auto& v : mesh.vertices) {
    for (double x : v) out.f32(static_cast<float>(x));
  }
  for (const auto& t : mesh.triangles) {
    for (auto i : t) out.u32(i);
  }
  return out.release();
}

SphereMesh decode_smesh(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes, "smesh");
  in.expect_magic("SMSH");
  expect_version(in, "smesh");
  const auto n_vertices = in.u32();
  const auto n_triangles = in.u32();
  // Size check before allocating anything proportional to the header.
  const std::uint64_t needed = 12ULL * n_vertices + 12ULL * n_triangles;
  if (needed != in.remaining()) {
    throw FormatError("smesh: payload is " + std::to_string(in.remaining()) +
                      " bytes, header implies " + std::to_string(needed));
  }
  SphereMesh mesh;
  mesh.vertices.resize(n_vertices);
  for (auto& v : mesh.vertices) {
    for (double& x : v) x = static_cast<double>(in.f32());
    const double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (!std::isfinite(norm) || norm == 0.0) {
      throw FormatError("smesh: zero or non-finite vertex");
    }
    v = normalized(v);
  }
  mesh.triangles.resize(n_triangles);
  for (auto& t : mesh.triangles) {
    for (auto& i : t) {
      i = in.u32();
      if (i >= n_vertices) throw FormatError("smesh: triangle index out of range");
    }
  }
  in.expect_end();
  return mesh;
}

std::vector<std::uint8_t> encode_sfeat(const FeatureField& field) {
  ByteWriter out;
  out.text("SFTR");
  out.u32(kVersion);
  out.u32(checked_u32(field.vertex_count(), "vertex count"));
  out.u32(checked_u32(field.channel_count(), "channel count"));
  for (const auto& name : field.channel_names()) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw std::invalid_argument("sfeat: channel name too long");
    }
    out.u16(static_cast<std::uint16_t>(name.size()));
    out.text(name);
  }
  for (double v : field.values()) out.f32(static_cast<float>(v));
  return out.release();
}

FeatureField decode_sfeat(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes, "sfeat");
  in.expect_magic("SFTR");
  expect_version(in, "sfeat");
  const auto n_vertices = in.u32();
  const auto n_channels = in.u32();
  if (n_channels > in.remaining() / 2) throw FormatError("sfeat: truncated channel table");
  std::vector<std::string> names;
  names.reserve(n_channels);
  for (std::uint32_t c = 0; c < n_channels; ++c) {
    const auto length = in.u16();
    names.push_back(in.text(length));
  }
  const std::uint64_t needed = 4ULL * n_vertices * n_channels;
  if (needed != in.remaining()) {
    throw FormatError("sfeat: payload is " + std::to_string(in.remaining()) +
                      " bytes, header implies " + std::to_string(needed));
  }
  FeatureField field(n_vertices, std::move(names));
  for (std::uint32_t c = 0; c < n_channels; ++c) {
    for (std::uint32_t v = 0; v < n_vertices; ++v) {
      const double x = static_cast<double>(in.f32());
      if (!std::isfinite(x)) throw FormatError("sfeat: non-finite value");
      field.at(c, v) = x;
    }
  }
  return field;
}

void save_smesh(const SphereMesh& mesh, const std::filesystem::path& path) {
  write_file_atomic(path, encode_smesh(mesh));
}

SphereMesh load_smesh(const std::filesystem::path& path) {
  try {
    return decode_smesh(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_sfeat(const FeatureField& field, const std::filesystem::path& path) {
  write_file_atomic(path, encode_sfeat(field));
}

FeatureField load_sfeat(const std::filesystem::path& path) {
  try {
    return decode_sfeat(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

SphereMesh at_file_precision(const SphereMesh& mesh) {
  return decode_smesh(encode_smesh(mesh));
}

}  // namespace corticast::mesh
