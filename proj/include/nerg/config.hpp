// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: one JSON document shared by every command. Unknown keys
// are rejected. Relative paths resolve against the config file's directory.
#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "nerg/model.hpp"
#include "nerg/probes.hpp"
#include "nerg/probes_io.hpp"
#include "nerg/render.hpp"
#include "nerg/scene_io.hpp"
#include "nerg/train.hpp"

namespace nerg {

inline constexpr int kConfigSchemaVersion = 1;

struct SynthGroup {
  std::size_t n = 1000;
  Aabb observer_volume;
  std::vector<Attractor> attractors;
};

struct GazeSource {
  std::optional<std::filesystem::path> path;  // CSV in gaze-world coordinates
  double noise_kappa = 200.0;                 // synthetic only
  std::vector<SynthGroup> groups;             // synthetic only
};

struct ProbeConfig {
  PlacementKind placement = PlacementKind::Random;
  Aabb volume{{-1, -1, -1}, {1, 1, 1}};
  std::array<int, 3> grid{4, 4, 4};
  std::size_t train_count = 4096;
  std::size_t test_count = 512;
  std::size_t attempts_per_probe = 64;
  ProbeParams params;
};

enum class SurfaceMode { Depth, Unit };

inline std::string_view to_string(SurfaceMode m) { return m == SurfaceMode::Depth ? "depth" : "unit"; }

struct EvalConfig {
  std::size_t n_dirs = 256;
};

struct CameraSpec {
  Vec3 position{0, -2, 1.6};
  Vec3 look_at{0, 0, 1.2};
  Vec3 up{0, 0, 1};
  double fov_deg = 60.0;
};

struct RenderConfig {
  int width = 640;
  int height = 360;
  CameraSpec camera;
  std::optional<Vec3> observer;  // empty = coupled
  ColorizeConfig colorize;
  unsigned threads = 0;

  Camera make_camera() const {
    return Camera::look_at(camera.position, camera.look_at, camera.up, camera.fov_deg * kPi / 180.0, width, height);
  }
  ObserverState observer_state() const { return observer ? ObserverState::at(*observer) : ObserverState::coupled_to_camera(); }
};

struct BenchSection {
  int width = 1280;
  int height = 720;
  std::size_t n_cams = 32;
  std::vector<Variant> variants{Variant::Emit, Variant::EmitCapture};
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  int max_width = 1024;
  int max_height = 1024;
  std::size_t queue_depth = 4;
  unsigned threads = 0;
};

struct VoxelSection {
  GridResolution resolution{64, 64, 64};
  bool trilinear = true;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  std::filesystem::path scene;
  std::optional<VoxelSection> scene_voxels;
  GazeSource gaze;
  std::optional<WorldTransform> world_transform;  // scene -> gaze coordinates
  ProbeConfig probes;
  ModelConfig model;  // bounds come from the scene at run time
  TrainConfig train;
  SurfaceMode surface = SurfaceMode::Depth;
  EvalConfig eval;
  IntegratorConfig integrator;
  OcclusionConfig occlusion;
  RenderConfig render;
  BenchSection bench;
  ServiceConfig service;
};

namespace detail {

using nlohmann::json;

/// Reads typed fields from one JSON object and rejects keys it never asked
/// about once finish() is called.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config: '" + name_ + "' must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: '" + path(key) + "' has the wrong type");
    }
  }

  void get_vec3(const std::string& key, Vec3& out) {
    if (has(key)) out = json_util::to_vec3(j_.at(key), "config: " + path(key));
  }

  void get_aabb(const std::string& key, Aabb& out) {
    if (!has(key)) return;
    Section s(j_.at(key), path(key));
    s.get_vec3("min", out.lo);
    s.get_vec3("max", out.hi);
    s.finish();
    if (!out.valid()) throw ConfigError("config: '" + path(key) + "' is not a valid box");
  }

  Section child(const std::string& key) { return Section(raw(key), path(key)); }

  std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("config: unknown key '" + path(it.key()) + "'");
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

inline std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (!path.is_absolute() && !base.empty()) path = base / path;
  return std::filesystem::absolute(path).lexically_normal();
}

template <typename E>
E enum_field(Section& s, const std::string& key, E current, E (*parse)(std::string_view)) {
  if (!s.has(key)) return current;
  std::string v;
  s.get(key, v);
  return parse(v);
}

inline PlacementKind placement_from_string(std::string_view v) {
  if (v == "grid") return PlacementKind::Grid;
  if (v == "random") return PlacementKind::Random;
  throw ConfigError("config: probes.placement must be grid or random");
}

inline SurfaceMode surface_from_string(std::string_view v) {
  if (v == "depth") return SurfaceMode::Depth;
  if (v == "unit") return SurfaceMode::Unit;
  throw ConfigError("config: surface must be depth or unit");
}

}  // namespace detail

/// Parses a config document. `base_dir` anchors relative paths.
inline RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  using detail::Section;
  RunConfig c;
  Section top(j, "");
  int version = 0;
  if (!top.has("schema_version")) throw ConfigError("config: missing 'schema_version'");
  top.get("schema_version", version);
  if (version != kConfigSchemaVersion) throw ConfigError("config: unsupported schema_version " + std::to_string(version));
  top.get("seed", c.seed);
  c.output_dir = detail::resolve_path(base_dir, "out");
  if (top.has("output_dir")) {
    std::string s;
    top.get("output_dir", s);
    c.output_dir = detail::resolve_path(base_dir, s);
  }
  if (!top.has("scene")) throw ConfigError("config: missing 'scene'");
  {
    std::string s;
    top.get("scene", s);
    c.scene = detail::resolve_path(base_dir, s);
  }
  if (top.has("scene_voxels")) {
    Section s = top.child("scene_voxels");
    VoxelSection v;
    std::array<int, 3> r{v.resolution.nx, v.resolution.ny, v.resolution.nz};
    s.get("resolution", r);
    v.resolution = {r[0], r[1], r[2]};
    s.get("trilinear", v.trilinear);
    s.finish();
    c.scene_voxels = v;
  }
  if (!top.has("gaze")) throw ConfigError("config: missing 'gaze'");
  {
    Section g = top.child("gaze");
    if (g.has("path") == g.has("synth")) throw ConfigError("config: gaze needs exactly one of 'path' or 'synth'");
    if (g.has("path")) {
      std::string s;
      g.get("path", s);
      c.gaze.path = detail::resolve_path(base_dir, s);
    } else {
      Section sy = g.child("synth");
      sy.get("noise_kappa", c.gaze.noise_kappa);
      if (!sy.has("groups") || !sy.raw("groups").is_array() || sy.raw("groups").empty())
        throw ConfigError("config: gaze.synth.groups must be a non-empty array");
      std::size_t gi = 0;
      for (const auto& gj : sy.raw("groups")) {
        Section gs(gj, "gaze.synth.groups[" + std::to_string(gi++) + "]");
        SynthGroup grp;
        gs.get("n", grp.n);
        if (!gs.has("observer_volume")) throw ConfigError("config: " + gs.path("observer_volume") + " is required");
        gs.get_aabb("observer_volume", grp.observer_volume);
        if (!gs.has("attractors") || !gs.raw("attractors").is_array() || gs.raw("attractors").empty())
          throw ConfigError("config: " + gs.path("attractors") + " must be a non-empty array");
        std::size_t ai = 0;
        for (const auto& aj : gs.raw("attractors")) {
          Section as(aj, gs.path("attractors[" + std::to_string(ai++) + "]"));
          Attractor a;
          if (!as.has("point")) throw ConfigError("config: " + as.path("point") + " is required");
          as.get_vec3("point", a.point);
          as.get("weight", a.weight);
          as.finish();
          grp.attractors.push_back(a);
        }
        gs.finish();
        c.gaze.groups.push_back(std::move(grp));
      }
      sy.finish();
    }
    g.finish();
  }
  if (top.has("world_transform")) {
    std::vector<double> m;
    top.get("world_transform", m);
    if (m.size() != 16) throw ConfigError("config: world_transform must hold 16 numbers (row-major 4x4)");
    c.world_transform = WorldTransform::from_row_major(m);
  }
  if (top.has("probes")) {
    Section p = top.child("probes");
    c.probes.placement = detail::enum_field(p, "placement", c.probes.placement, &detail::placement_from_string);
    p.get_aabb("volume", c.probes.volume);
    p.get("grid", c.probes.grid);
    p.get("train_count", c.probes.train_count);
    p.get("test_count", c.probes.test_count);
    p.get("attempts_per_probe", c.probes.attempts_per_probe);
    p.get("radius", c.probes.params.radius);
    p.get("cap", c.probes.params.cap);
    p.get("kappa", c.probes.params.kappa);
    p.finish();
  }
  if (top.has("model")) {
    Section m = top.child("model");
    c.model.variant = detail::enum_field(m, "variant", c.model.variant, &variant_from_string);
    c.model.activation = detail::enum_field(m, "activation", c.model.activation, &activation_from_string);
    m.get("depth", c.model.depth);
    m.get("width", c.model.width);
    m.get("l_pos", c.model.encoding.l_pos);
    m.get("l_dir", c.model.encoding.l_dir);
    m.get("include_raw", c.model.encoding.include_raw);
    m.finish();
  }
  if (top.has("train")) {
    Section t = top.child("train");
    t.get("epochs", c.train.epochs);
    t.get("lr", c.train.lr);
    t.get("batch_size", c.train.batch_size);
    t.get("beta1", c.train.beta1);
    t.get("beta2", c.train.beta2);
    t.get("epsilon", c.train.adam_eps);
    t.get("samples_per_probe", c.train.samples_per_probe);
    t.finish();
  }
  c.surface = detail::enum_field(top, "surface", c.surface, &detail::surface_from_string);
  if (top.has("eval")) {
    Section e = top.child("eval");
    e.get("n_dirs", c.eval.n_dirs);
    e.finish();
  }
  if (top.has("integrator")) {
    Section i = top.child("integrator");
    i.get("near", c.integrator.near);
    i.get("far", c.integrator.far);
    i.get("steps", c.integrator.steps);
    i.get("min_transmittance", c.integrator.min_transmittance);
    i.get("opacity_threshold", c.integrator.opacity_threshold);
    if (i.has("background_depth")) {
      double d = 0;
      i.get("background_depth", d);
      c.integrator.background_depth = d;
    }
    i.finish();
  }
  if (top.has("occlusion")) {
    Section o = top.child("occlusion");
    o.get("enabled", c.occlusion.enabled);
    o.get("falloff", c.occlusion.falloff);
    if (o.has("epsilon")) {
      double e = 0;
      o.get("epsilon", e);
      c.occlusion.epsilon = e;
    }
    o.finish();
  }
  if (top.has("render")) {
    Section r = top.child("render");
    r.get("width", c.render.width);
    r.get("height", c.render.height);
    if (r.has("camera")) {
      Section cam = r.child("camera");
      cam.get_vec3("position", c.render.camera.position);
      cam.get_vec3("look_at", c.render.camera.look_at);
      cam.get_vec3("up", c.render.camera.up);
      cam.get("fov_deg", c.render.camera.fov_deg);
      cam.finish();
    }
    if (r.has("observer")) {
      const auto& o = r.raw("observer");
      if (o.is_string() && o.get<std::string>() == "coupled") {
        c.render.observer.reset();
      } else {
        c.render.observer = json_util::to_vec3(o, "config: render.observer");
      }
    }
    c.render.colorize.colormap = detail::enum_field(r, "colormap", c.render.colorize.colormap, &colormap_from_string);
    c.render.colorize.normalization =
        detail::enum_field(r, "normalization", c.render.colorize.normalization, &normalization_from_string);
    r.get("alpha", c.render.colorize.alpha);
    r.get("g_max", c.render.colorize.g_max);
    r.get("threads", c.render.threads);
    r.finish();
  }
  if (top.has("bench")) {
    Section b = top.child("bench");
    b.get("width", c.bench.width);
    b.get("height", c.bench.height);
    b.get("n_cams", c.bench.n_cams);
    if (b.has("variants")) {
      std::vector<std::string> vs;
      b.get("variants", vs);
      if (vs.empty()) throw ConfigError("config: bench.variants must not be empty");
      c.bench.variants.clear();
      for (const auto& v : vs) c.bench.variants.push_back(variant_from_string(v));
    }
    b.finish();
  }
  if (top.has("service")) {
    Section s = top.child("service");
    s.get("host", c.service.host);
    s.get("port", c.service.port);
    s.get("max_width", c.service.max_width);
    s.get("max_height", c.service.max_height);
    s.get("queue_depth", c.service.queue_depth);
    s.get("threads", c.service.threads);
    s.finish();
  }
  top.finish();

  c.train.seed = derive_seed(c.seed, 5);
  c.train.train_probes = c.probes.train_count;
  c.train.test_probes = c.probes.test_count;
  c.train.validate();
  c.integrator.validate();
  c.occlusion.validate();
  c.render.colorize.validate();
  if (c.render.width < 1 || c.render.height < 1) throw ConfigError("config: render resolution must be at least 1x1");
  if (c.render.observer && !c.render.observer->finite()) throw ConfigError("config: render.observer must be finite");
  if (!(c.render.camera.fov_deg > 0.0 && c.render.camera.fov_deg < 180.0)) throw ConfigError("config: fov_deg must lie in (0, 180)");
  if (c.probes.train_count < 1 || c.probes.test_count < 1) throw ConfigError("config: probe counts must be >= 1");
  if (c.service.port < 0 || c.service.port > 65535) throw ConfigError("config: service.port out of range");
  if (c.service.max_width < 1 || c.service.max_height < 1) throw ConfigError("config: service max resolution must be >= 1");
  if (c.service.queue_depth < 1) throw ConfigError("config: service.queue_depth must be >= 1");
  if (c.eval.n_dirs < 2) throw ConfigError("config: eval.n_dirs must be >= 2");
  if (c.bench.width < 1 || c.bench.height < 1 || c.bench.n_cams < 1) throw ConfigError("config: bench settings must be >= 1");
  {
    ModelConfig probe = c.model;
    probe.validate();
  }
  return c;
}

/// Fully resolved config, every default spelled out; parses back to the
/// same RunConfig.
inline nlohmann::json config_to_json(const RunConfig& c) {
  using json_util::from_vec3;
  using nlohmann::json;
  auto aabb = [](const Aabb& b) { return json{{"min", from_vec3(b.lo)}, {"max", from_vec3(b.hi)}}; };
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.string();
  j["scene"] = c.scene.string();
  if (c.scene_voxels)
    j["scene_voxels"] = {{"resolution", {c.scene_voxels->resolution.nx, c.scene_voxels->resolution.ny, c.scene_voxels->resolution.nz}},
                         {"trilinear", c.scene_voxels->trilinear}};
  if (c.gaze.path) {
    j["gaze"] = {{"path", c.gaze.path->string()}};
  } else {
    json groups = json::array();
    for (const auto& g : c.gaze.groups) {
      json att = json::array();
      for (const auto& a : g.attractors) att.push_back({{"point", from_vec3(a.point)}, {"weight", a.weight}});
      groups.push_back({{"n", g.n}, {"observer_volume", aabb(g.observer_volume)}, {"attractors", std::move(att)}});
    }
    j["gaze"] = {{"synth", {{"noise_kappa", c.gaze.noise_kappa}, {"groups", std::move(groups)}}}};
  }
  if (c.world_transform) j["world_transform"] = c.world_transform->row_major();
  j["probes"] = {{"placement", c.probes.placement == PlacementKind::Grid ? "grid" : "random"},
                 {"volume", aabb(c.probes.volume)},
                 {"grid", c.probes.grid},
                 {"train_count", c.probes.train_count},
                 {"test_count", c.probes.test_count},
                 {"attempts_per_probe", c.probes.attempts_per_probe},
                 {"radius", c.probes.params.radius},
                 {"cap", c.probes.params.cap},
                 {"kappa", c.probes.params.kappa}};
  j["model"] = {{"variant", to_string(c.model.variant)},
                {"activation", to_string(c.model.activation)},
                {"depth", c.model.depth},
                {"width", c.model.width},
                {"l_pos", c.model.encoding.l_pos},
                {"l_dir", c.model.encoding.l_dir},
                {"include_raw", c.model.encoding.include_raw}};
  j["train"] = {{"epochs", c.train.epochs},         {"lr", c.train.lr},       {"batch_size", c.train.batch_size},
                {"beta1", c.train.beta1},           {"beta2", c.train.beta2}, {"epsilon", c.train.adam_eps},
                {"samples_per_probe", c.train.samples_per_probe}};
  j["surface"] = to_string(c.surface);
  j["eval"] = {{"n_dirs", c.eval.n_dirs}};
  j["integrator"] = {{"near", c.integrator.near},
                     {"far", c.integrator.far},
                     {"steps", c.integrator.steps},
                     {"min_transmittance", c.integrator.min_transmittance},
                     {"opacity_threshold", c.integrator.opacity_threshold}};
  if (c.integrator.background_depth) j["integrator"]["background_depth"] = *c.integrator.background_depth;
  j["occlusion"] = {{"enabled", c.occlusion.enabled}, {"falloff", c.occlusion.falloff}};
  if (c.occlusion.epsilon) j["occlusion"]["epsilon"] = *c.occlusion.epsilon;
  j["render"] = {{"width", c.render.width},
                 {"height", c.render.height},
                 {"camera",
                  {{"position", from_vec3(c.render.camera.position)},
                   {"look_at", from_vec3(c.render.camera.look_at)},
                   {"up", from_vec3(c.render.camera.up)},
                   {"fov_deg", c.render.camera.fov_deg}}},
                 {"observer", c.render.observer ? from_vec3(*c.render.observer) : json("coupled")},
                 {"colormap", to_string(c.render.colorize.colormap)},
                 {"normalization", to_string(c.render.colorize.normalization)},
                 {"alpha", c.render.colorize.alpha},
                 {"g_max", c.render.colorize.g_max},
                 {"threads", c.render.threads}};
  json variants = json::array();
  for (auto v : c.bench.variants) variants.push_back(to_string(v));
  j["bench"] = {{"width", c.bench.width}, {"height", c.bench.height}, {"n_cams", c.bench.n_cams}, {"variants", variants}};
  j["service"] = {{"host", c.service.host},
                  {"port", c.service.port},
                  {"max_width", c.service.max_width},
                  {"max_height", c.service.max_height},
                  {"queue_depth", c.service.queue_depth},
                  {"threads", c.service.threads}};
  return j;
}

/// Loads a config file, or a run manifest (its "config" member).
inline nlohmann::json load_config_document(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingInputError("config file not found: " + path.string());
  nlohmann::json j = json_util::parse(bin::read_text(path), "config " + path.string());
  if (j.is_object() && j.contains("config") && j.contains("command")) return j.at("config");
  return j;
}

// ---------------------------------------------------------------------------
// Command-line overrides

struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> variant;
  std::optional<std::string> resolution;  // WxH
  std::optional<std::string> observer;    // x,y,z | coupled
  std::optional<std::string> camera;      // px,py,pz:lx,ly,lz[:fov]
  std::optional<double> falloff;
  bool no_occlusion = false;
};

namespace detail {

inline std::vector<double> parse_numbers(std::string_view s, const std::string& what) {
  std::vector<double> out;
  while (true) {
    const std::size_t comma = s.find(',');
    double v;
    if (!parse_double(s.substr(0, comma), v)) throw ConfigError(what + ": expected comma-separated numbers");
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

inline nlohmann::json vec3_arg(std::string_view s, const std::string& what) {
  const auto v = parse_numbers(s, what);
  if (v.size() != 3) throw ConfigError(what + ": expected x,y,z");
  return nlohmann::json::array({v[0], v[1], v[2]});
}

}  // namespace detail

/// Writes flag values into the config document; flags win over file values.
inline void apply_overrides(nlohmann::json& j, const ConfigOverrides& o) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  auto section = [&j](const char* key) -> nlohmann::json& {
    if (!j.contains(key)) j[key] = nlohmann::json::object();
    if (!j[key].is_object()) throw ConfigError(std::string("config: '") + key + "' must be an object");
    return j[key];
  };
  if (o.seed) j["seed"] = *o.seed;
  if (o.out) j["output_dir"] = std::filesystem::absolute(*o.out).string();
  if (o.variant) section("model")["variant"] = std::string(to_string(variant_from_string(*o.variant)));
  if (o.resolution) {
    const auto x = o.resolution->find('x');
    double w = 0, h = 0;
    if (x == std::string::npos || !detail::parse_double(std::string_view(*o.resolution).substr(0, x), w) ||
        !detail::parse_double(std::string_view(*o.resolution).substr(x + 1), h) || w < 1 || h < 1 || w != std::floor(w) ||
        h != std::floor(h))
      throw ConfigError("--resolution: expected WxH");
    section("render")["width"] = static_cast<int>(w);
    section("render")["height"] = static_cast<int>(h);
  }
  if (o.observer) {
    if (*o.observer == "coupled")
      section("render")["observer"] = "coupled";
    else
      section("render")["observer"] = detail::vec3_arg(*o.observer, "--observer");
  }
  if (o.camera) {
    std::vector<std::string> parts;
    std::string_view s = *o.camera;
    while (true) {
      const auto colon = s.find(':');
      parts.emplace_back(s.substr(0, colon));
      if (colon == std::string_view::npos) break;
      s.remove_prefix(colon + 1);
    }
    if (parts.size() < 2 || parts.size() > 3) throw ConfigError("--camera: expected px,py,pz:lx,ly,lz[:fov_deg]");
    auto& cam = section("render")["camera"];
    if (!cam.is_object()) cam = nlohmann::json::object();
    cam["position"] = detail::vec3_arg(parts[0], "--camera position");
    cam["look_at"] = detail::vec3_arg(parts[1], "--camera look-at");
    if (parts.size() == 3) {
      double fov;
      if (!detail::parse_double(parts[2], fov)) throw ConfigError("--camera: bad fov");
      cam["fov_deg"] = fov;
    }
  }
  if (o.falloff) section("occlusion")["falloff"] = *o.falloff;
  if (o.no_occlusion) section("occlusion")["enabled"] = false;
}

}  // namespace nerg
