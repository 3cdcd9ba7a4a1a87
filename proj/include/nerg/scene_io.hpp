// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0
//
// Scene JSON documents and the NERGVOX1 voxel grid file.
#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "nerg/binary_io.hpp"
#include "nerg/field.hpp"

namespace nerg {

namespace json_util {

using nlohmann::json;

inline Vec3 to_vec3(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(field + ": expected an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ConfigError(field + ": expected numbers");
    v[i] = j[i].get<double>();
  }
  if (!v.finite()) throw ConfigError(field + ": values must be finite");
  return v;
}

inline Rgb to_rgb(const json& j, const std::string& field) {
  const Vec3 v = to_vec3(j, field);
  return {v.x, v.y, v.z};
}

inline json from_vec3(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
inline json from_rgb(const Rgb& c) { return json::array({c.r, c.g, c.b}); }

inline double number(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.contains(key) || !j.at(key).is_number()) throw ConfigError(ctx + ": missing numeric field '" + key + "'");
  return j.at(key).get<double>();
}

inline json parse(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

}  // namespace json_util

inline AnalyticScene scene_from_json(const nlohmann::json& j) {
  using namespace json_util;
  if (!j.is_object()) throw ConfigError("scene: expected a JSON object");
  Rgb background{};
  if (j.contains("background")) background = to_rgb(j.at("background"), "scene.background");
  std::vector<Primitive> prims;
  if (j.contains("primitives")) {
    if (!j.at("primitives").is_array()) throw ConfigError("scene.primitives: expected an array");
    std::size_t idx = 0;
    for (const auto& p : j.at("primitives")) {
      const std::string ctx = "scene.primitives[" + std::to_string(idx++) + "]";
      if (!p.is_object() || !p.contains("kind") || !p.at("kind").is_string())
        throw ConfigError(ctx + ": missing 'kind'");
      const std::string kind = p.at("kind").get<std::string>();
      const double sigma = number(p, "sigma", ctx);
      const Rgb albedo = p.contains("albedo") ? to_rgb(p.at("albedo"), ctx + ".albedo") : Rgb{1, 1, 1};
      if (kind == "sphere") {
        if (!p.contains("center")) throw ConfigError(ctx + ": sphere needs 'center'");
        prims.push_back(Primitive::sphere(to_vec3(p.at("center"), ctx + ".center"), number(p, "radius", ctx), sigma, albedo));
      } else if (kind == "box") {
        if (!p.contains("min") || !p.contains("max")) throw ConfigError(ctx + ": box needs 'min' and 'max'");
        prims.push_back(Primitive::box(to_vec3(p.at("min"), ctx + ".min"), to_vec3(p.at("max"), ctx + ".max"), sigma, albedo));
      } else if (kind == "slab") {
        if (!p.contains("axis") || !p.at("axis").is_string()) throw ConfigError(ctx + ": slab needs 'axis' (x|y|z)");
        const std::string a = p.at("axis").get<std::string>();
        if (a != "x" && a != "y" && a != "z") throw ConfigError(ctx + ": slab axis must be x, y or z");
        const int axis = a[0] - 'x';
        prims.push_back(Primitive::slab(axis, number(p, "min", ctx), number(p, "max", ctx), sigma, albedo));
      } else {
        throw ConfigError(ctx + ": unknown primitive kind '" + kind + "'");
      }
    }
  }
  std::optional<Aabb> bounds;
  if (j.contains("aabb")) {
    const auto& b = j.at("aabb");
    if (!b.is_object() || !b.contains("min") || !b.contains("max")) throw ConfigError("scene.aabb needs 'min' and 'max'");
    bounds = Aabb{to_vec3(b.at("min"), "scene.aabb.min"), to_vec3(b.at("max"), "scene.aabb.max")};
  }
  return AnalyticScene(std::move(prims), background, bounds);
}

inline nlohmann::json scene_to_json(const AnalyticScene& scene) {
  using namespace json_util;
  json j;
  j["background"] = from_rgb(scene.background());
  j["aabb"] = {{"min", from_vec3(scene.bounds().lo)}, {"max", from_vec3(scene.bounds().hi)}};
  json prims = json::array();
  for (const auto& p : scene.primitives()) {
    json o;
    switch (p.kind) {
      case PrimitiveKind::Sphere:
        o = {{"kind", "sphere"}, {"center", from_vec3(p.center)}, {"radius", p.radius}};
        break;
      case PrimitiveKind::Box:
        o = {{"kind", "box"}, {"min", from_vec3(p.lo)}, {"max", from_vec3(p.hi)}};
        break;
      case PrimitiveKind::Slab:
        o = {{"kind", "slab"}, {"axis", std::string(1, static_cast<char>('x' + p.axis))}, {"min", p.lo[p.axis]}, {"max", p.hi[p.axis]}};
        break;
    }
    o["sigma"] = p.sigma;
    o["albedo"] = from_rgb(p.albedo);
    prims.push_back(std::move(o));
  }
  j["primitives"] = std::move(prims);
  return j;
}

inline AnalyticScene load_scene(const std::filesystem::path& path) {
  return scene_from_json(json_util::parse(bin::read_text(path), path.string()));
}

inline void save_scene(const AnalyticScene& scene, const std::filesystem::path& path) {
  bin::write_text(path, scene_to_json(scene).dump(2) + "\n");
}

// NERGVOX1 layout: magic, u32 nx, ny, nz, f32 aabb min xyz, max xyz, then
// nx*ny*nz cells of f32 (sigma, r, g, b), x fastest. All little-endian.
inline constexpr std::string_view kVoxelMagic = "NERGVOX1";

inline bin::Bytes encode_voxel_grid(const VoxelGrid& grid) {
  bin::Bytes out;
  bin::put_magic(out, kVoxelMagic);
  const auto r = grid.resolution();
  bin::put_u32(out, static_cast<std::uint32_t>(r.nx));
  bin::put_u32(out, static_cast<std::uint32_t>(r.ny));
  bin::put_u32(out, static_cast<std::uint32_t>(r.nz));
  for (const Vec3& v : {grid.bounds().lo, grid.bounds().hi})
    for (int a = 0; a < 3; ++a) bin::put_f32(out, static_cast<float>(v[a]));
  for (float v : grid.values()) bin::put_f32(out, v);
  return out;
}

inline VoxelGrid decode_voxel_grid(const bin::Bytes& data, bool trilinear = true) {
  bin::Reader in(data, "voxel grid");
  in.expect_magic(kVoxelMagic);
  GridResolution r;
  r.nx = static_cast<int>(in.u32());
  r.ny = static_cast<int>(in.u32());
  r.nz = static_cast<int>(in.u32());
  if (r.nx < 2 || r.ny < 2 || r.nz < 2 || r.cells() > (std::size_t{1} << 31))
    throw ParseError("voxel grid: bad resolution");
  Aabb b;
  for (int a = 0; a < 3; ++a) b.lo[a] = in.f32();
  for (int a = 0; a < 3; ++a) b.hi[a] = in.f32();
  if (in.remaining() != 16 * r.cells()) throw ParseError("voxel grid: payload size does not match resolution");
  std::vector<float> values(4 * r.cells());
  for (auto& v : values) v = in.f32();
  return VoxelGrid(r, b, std::move(values), trilinear);
}

inline void save_voxel_grid(const VoxelGrid& grid, const std::filesystem::path& path) {
  bin::write_file(path, encode_voxel_grid(grid));
}

inline VoxelGrid load_voxel_grid(const std::filesystem::path& path, bool trilinear = true) {
  return decode_voxel_grid(bin::read_file(path), trilinear);
}

}  // namespace nerg
