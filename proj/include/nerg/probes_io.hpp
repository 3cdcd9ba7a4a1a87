// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0
//
// Gaze-ray CSV files and the NERGPRB1 probe-set file.
#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "nerg/binary_io.hpp"
#include "nerg/probes.hpp"
#include "nerg/scene_io.hpp"

namespace nerg {

inline constexpr std::string_view kGazeCsvHeader = "x,y,z,dx,dy,dz";

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
};

struct GazeLoadResult {
  std::vector<GazeRay> rays;
  std::vector<RejectedRow> rejected;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace detail

/// Parses gaze-ray CSV text. Rows are `x,y,z,dx,dy,dz` in gaze-world
/// coordinates; when `scene_to_gaze` is given, rays are mapped back into
/// scene coordinates with its inverse. Rows whose direction norm is off by
/// more than 1e-3 are rejected and reported; malformed rows throw.
inline GazeLoadResult parse_gaze_csv(std::string_view text, const WorldTransform* scene_to_gaze = nullptr) {
  GazeLoadResult result;
  std::optional<WorldTransform> to_scene;
  if (scene_to_gaze) to_scene = scene_to_gaze->inverse();
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const std::size_t eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    line = detail::trim(line);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kGazeCsvHeader) throw ParseError("gaze csv: expected header '" + std::string(kGazeCsvHeader) + "'", line_no);
      header_seen = true;
      continue;
    }
    double v[6];
    std::size_t field = 0;
    std::string_view rest = line;
    while (true) {
      const std::size_t comma = rest.find(',');
      const std::string_view cell = rest.substr(0, comma);
      if (field >= 6 || !detail::parse_double(cell, v[field]))
        throw ParseError("gaze csv: malformed row", line_no);
      ++field;
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    if (field != 6) throw ParseError("gaze csv: expected 6 columns", line_no);
    const Vec3 pos{v[0], v[1], v[2]};
    const Vec3 dir{v[3], v[4], v[5]};
    if (std::abs(norm(dir) - 1.0) > 1e-3) {
      result.rejected.push_back({line_no, "direction is not unit length"});
      continue;
    }
    GazeRay ray{pos, UnitDir::normalize(dir)};
    if (to_scene) ray = {to_scene->transform_point(ray.position), to_scene->transform_dir(ray.direction)};
    result.rays.push_back(ray);
  }
  if (!header_seen) throw ParseError("gaze csv: missing header", line_no);
  return result;
}

inline GazeLoadResult load_gaze_rays(const std::filesystem::path& path, const WorldTransform* scene_to_gaze = nullptr) {
  return parse_gaze_csv(bin::read_text(path), scene_to_gaze);
}

inline std::string format_gaze_csv(std::span<const GazeRay> rays) {
  std::string out(kGazeCsvHeader);
  out += '\n';
  char buf[256];
  for (const auto& r : rays) {
    const Vec3& d = r.direction.vec();
    const int n = std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.position.x, r.position.y,
                                r.position.z, d.x, d.y, d.z);
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

inline void save_gaze_rays(std::span<const GazeRay> rays, const std::filesystem::path& path) {
  bin::write_text(path, format_gaze_csv(rays));
}

// NERGPRB1 layout: magic, u64 header length, JSON header, then for each
// probe: f32 center xyz, u32 ray count, ray count * f32 xyz. Little-endian.
inline constexpr std::string_view kProbeMagic = "NERGPRB1";

inline nlohmann::json placement_to_json(const PlacementRecord& rec) {
  using json_util::from_vec3;
  const auto& p = rec.placement;
  return {{"placement", p.kind == PlacementKind::Grid ? "grid" : "random"},
          {"volume", {{"min", from_vec3(p.volume.lo)}, {"max", from_vec3(p.volume.hi)}}},
          {"grid", p.grid},
          {"count", p.count},
          {"attempts_per_probe", p.attempts_per_probe},
          {"radius", rec.params.radius},
          {"cap", rec.params.cap},
          {"kappa", rec.params.kappa},
          {"seed", rec.seed}};
}

inline PlacementRecord placement_from_json(const nlohmann::json& j) {
  using json_util::to_vec3;
  PlacementRecord rec;
  try {
    const std::string kind = j.at("placement").get<std::string>();
    if (kind != "grid" && kind != "random") throw ParseError("probe file: unknown placement '" + kind + "'");
    rec.placement.kind = kind == "grid" ? PlacementKind::Grid : PlacementKind::Random;
    rec.placement.volume = {to_vec3(j.at("volume").at("min"), "volume.min"), to_vec3(j.at("volume").at("max"), "volume.max")};
    rec.placement.grid = j.at("grid").get<std::array<int, 3>>();
    rec.placement.count = j.at("count").get<std::size_t>();
    rec.placement.attempts_per_probe = j.at("attempts_per_probe").get<std::size_t>();
    rec.params.radius = j.at("radius").get<double>();
    rec.params.cap = j.at("cap").get<std::size_t>();
    rec.params.kappa = j.at("kappa").get<double>();
    rec.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("probe file header: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("probe file header: ") + e.what());
  }
  return rec;
}

inline bin::Bytes encode_probe_set(const ProbeSet& set) {
  nlohmann::json header = placement_to_json(set.record);
  header["probe_count"] = set.size();
  header["format"] = 1;
  const std::string text = header.dump();
  bin::Bytes out;
  bin::put_magic(out, kProbeMagic);
  bin::put_u64(out, text.size());
  bin::put_bytes(out, text);
  for (const auto& probe : set.probes) {
    for (int a = 0; a < 3; ++a) bin::put_f32(out, static_cast<float>(probe.center()[a]));
    bin::put_u32(out, static_cast<std::uint32_t>(probe.rays().size()));
    for (const auto& r : probe.rays())
      for (int a = 0; a < 3; ++a) bin::put_f32(out, static_cast<float>(r[a]));
  }
  return out;
}

inline ProbeSet decode_probe_set(const bin::Bytes& data) {
  bin::Reader in(data, "probe file");
  in.expect_magic(kProbeMagic);
  const std::uint64_t len = in.u64();
  if (len > in.remaining()) throw ParseError("probe file: header length out of range");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.string(static_cast<std::size_t>(len)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("probe file header: ") + e.what());
  }
  ProbeSet set;
  set.record = placement_from_json(header);
  const auto count = header.value("probe_count", std::size_t{0});
  const VmfKernel kernel(set.record.params.kappa);
  set.probes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Vec3 c;
    for (int a = 0; a < 3; ++a) c[a] = in.f32();
    const std::uint32_t n = in.u32();
    if (n == 0 || static_cast<std::size_t>(n) * 12 > in.remaining()) throw ParseError("probe file: bad ray count");
    std::vector<Vec3> rays(n);
    for (auto& r : rays)
      for (int a = 0; a < 3; ++a) r[a] = in.f32();
    set.probes.emplace_back(c, std::move(rays), kernel);
  }
  if (in.remaining() != 0) throw ParseError("probe file: trailing bytes");
  return set;
}

inline void save_probe_set(const ProbeSet& set, const std::filesystem::path& path) {
  bin::write_file(path, encode_probe_set(set));
}

inline ProbeSet load_probe_set(const std::filesystem::path& path) { return decode_probe_set(bin::read_file(path)); }

}  // namespace nerg
