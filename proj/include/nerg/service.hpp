// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0
//
// Frame service. FrameService holds an immutable scene and model and turns
// requests into responses; install_routes() binds it to HTTP routes:
//
//   GET  /info     session info (JSON)
//   GET  /schema   JSON Schema of the frame request
//   POST /frame    colorized PNG; headers X-Render-Ms, X-Gaze-Min, X-Gaze-Max
//   GET  /buffers  NERGFRM1 float planes; the request travels as query
//                  parameters (position=x,y,z&look_at=x,y,z&width=..)
#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "nerg/checkpoint.hpp"
#include "nerg/config.hpp"
#include "nerg/image_io.hpp"
#include "nerg/manifest.hpp"
#include "nerg/render.hpp"

// httplib pulls in <resolv.h>, whose _res macro breaks Eigen if it comes first.
#include "httplib.h"
#include "json.hpp"

namespace nerg {

struct FrameRequest {
  CameraSpec camera;
  std::optional<Vec3> observer;  // empty = coupled
  int width = 640;
  int height = 360;
  OcclusionConfig occlusion;
  ColorizeConfig colorize;
  std::optional<std::array<int, 4>> stats_region;  // x, y, w, h
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;

  std::string header(const std::string& name) const {
    for (const auto& [k, v] : headers)
      if (k == name) return v;
    return {};
  }
};

struct ServiceLimits {
  int max_width = 1024;
  int max_height = 1024;
  std::size_t queue_depth = 4;
  unsigned render_threads = 0;
};

/// Field-level request validation failure (HTTP 400).
class RequestError : public std::runtime_error {
 public:
  RequestError(std::string field, const std::string& msg) : std::runtime_error(msg), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

namespace detail {

inline HttpResponse json_response(int status, const nlohmann::json& j) { return {status, "application/json", j.dump(), {}}; }

inline HttpResponse error_response(int status, const std::string& msg, const std::string& field = {}) {
  nlohmann::json j = {{"error", msg}};
  if (!field.empty()) j["field"] = field;
  return json_response(status, j);
}

inline Vec3 request_vec3(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) throw RequestError(field, field + " must be an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw RequestError(field, field + " must hold numbers");
    v[i] = j[i].get<double>();
  }
  if (!v.finite()) throw RequestError(field, field + " must be finite");
  return v;
}

inline double request_number(const nlohmann::json& j, const std::string& field) {
  if (!j.is_number()) throw RequestError(field, field + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw RequestError(field, field + " must be finite");
  return v;
}

inline int request_int(const nlohmann::json& j, const std::string& field) {
  if (!j.is_number_integer()) throw RequestError(field, field + " must be an integer");
  return j.get<int>();
}

inline std::string request_string(const nlohmann::json& j, const std::string& field) {
  if (!j.is_string()) throw RequestError(field, field + " must be a string");
  return j.get<std::string>();
}

}  // namespace detail

/// Request defaults come from `base` (the service's configured render and
/// occlusion settings).
inline FrameRequest frame_request_from_json(const nlohmann::json& j, const FrameRequest& base) {
  using namespace detail;
  if (!j.is_object()) throw RequestError("", "request body must be a JSON object");
  static const std::set<std::string> known = {"camera", "observer", "resolution", "falloff", "occlusion", "alpha",
                                              "colormap", "normalization", "g_max", "stats_region", "epsilon"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw RequestError(it.key(), "unknown field '" + it.key() + "'");
  FrameRequest r = base;
  if (!j.contains("camera")) throw RequestError("camera", "camera is required");
  const auto& cam = j.at("camera");
  if (!cam.is_object()) throw RequestError("camera", "camera must be an object");
  for (auto it = cam.begin(); it != cam.end(); ++it)
    if (it.key() != "position" && it.key() != "look_at" && it.key() != "up" && it.key() != "fov_deg")
      throw RequestError("camera." + it.key(), "unknown field 'camera." + it.key() + "'");
  if (!cam.contains("position")) throw RequestError("camera.position", "camera.position is required");
  if (!cam.contains("look_at")) throw RequestError("camera.look_at", "camera.look_at is required");
  r.camera.position = request_vec3(cam.at("position"), "camera.position");
  r.camera.look_at = request_vec3(cam.at("look_at"), "camera.look_at");
  if (cam.contains("up")) r.camera.up = request_vec3(cam.at("up"), "camera.up");
  if (cam.contains("fov_deg")) r.camera.fov_deg = request_number(cam.at("fov_deg"), "camera.fov_deg");
  if (!(r.camera.fov_deg > 0.0 && r.camera.fov_deg < 180.0)) throw RequestError("camera.fov_deg", "camera.fov_deg must lie in (0, 180)");
  if (j.contains("observer")) {
    const auto& o = j.at("observer");
    if (o.is_string()) {
      if (o.get<std::string>() != "coupled") throw RequestError("observer", "observer must be \"coupled\" or [x, y, z]");
      r.observer.reset();
    } else {
      r.observer = request_vec3(o, "observer");
    }
  }
  if (j.contains("resolution")) {
    const auto& res = j.at("resolution");
    if (!res.is_array() || res.size() != 2) throw RequestError("resolution", "resolution must be [width, height]");
    r.width = request_int(res[0], "resolution");
    r.height = request_int(res[1], "resolution");
  }
  if (r.width < 1 || r.height < 1) throw RequestError("resolution", "resolution must be at least 1x1");
  if (j.contains("falloff")) r.occlusion.falloff = request_number(j.at("falloff"), "falloff");
  if (!(r.occlusion.falloff > 0.0)) throw RequestError("falloff", "falloff must be > 0");
  if (j.contains("epsilon")) {
    r.occlusion.epsilon = request_number(j.at("epsilon"), "epsilon");
    if (*r.occlusion.epsilon < 0.0) throw RequestError("epsilon", "epsilon must be >= 0");
  }
  if (j.contains("occlusion")) {
    if (!j.at("occlusion").is_boolean()) throw RequestError("occlusion", "occlusion must be a boolean");
    r.occlusion.enabled = j.at("occlusion").get<bool>();
  }
  if (j.contains("alpha")) r.colorize.alpha = request_number(j.at("alpha"), "alpha");
  if (!(r.colorize.alpha >= 0.0 && r.colorize.alpha <= 1.0)) throw RequestError("alpha", "alpha must lie in [0, 1]");
  if (j.contains("g_max")) r.colorize.g_max = request_number(j.at("g_max"), "g_max");
  if (!(r.colorize.g_max > 0.0)) throw RequestError("g_max", "g_max must be > 0");
  try {
    if (j.contains("colormap")) r.colorize.colormap = colormap_from_string(request_string(j.at("colormap"), "colormap"));
  } catch (const ConfigError& e) {
    throw RequestError("colormap", e.what());
  }
  try {
    if (j.contains("normalization"))
      r.colorize.normalization = normalization_from_string(request_string(j.at("normalization"), "normalization"));
  } catch (const ConfigError& e) {
    throw RequestError("normalization", e.what());
  }
  if (j.contains("stats_region")) {
    const auto& s = j.at("stats_region");
    if (!s.is_array() || s.size() != 4) throw RequestError("stats_region", "stats_region must be [x, y, w, h]");
    std::array<int, 4> v{};
    for (int i = 0; i < 4; ++i) v[static_cast<std::size_t>(i)] = request_int(s[static_cast<std::size_t>(i)], "stats_region");
    if (v[0] < 0 || v[1] < 0 || v[2] < 1 || v[3] < 1 || v[0] + v[2] > r.width || v[1] + v[3] > r.height)
      throw RequestError("stats_region", "stats_region must lie inside the frame");
    r.stats_region = v;
  }
  return r;
}

inline nlohmann::json frame_request_to_json(const FrameRequest& r) {
  using json_util::from_vec3;
  nlohmann::json j = {{"camera",
                       {{"position", from_vec3(r.camera.position)},
                        {"look_at", from_vec3(r.camera.look_at)},
                        {"up", from_vec3(r.camera.up)},
                        {"fov_deg", r.camera.fov_deg}}},
                      {"observer", r.observer ? from_vec3(*r.observer) : nlohmann::json("coupled")},
                      {"resolution", {r.width, r.height}},
                      {"falloff", r.occlusion.falloff},
                      {"occlusion", r.occlusion.enabled},
                      {"alpha", r.colorize.alpha},
                      {"colormap", to_string(r.colorize.colormap)},
                      {"normalization", to_string(r.colorize.normalization)},
                      {"g_max", r.colorize.g_max}};
  if (r.occlusion.epsilon) j["epsilon"] = *r.occlusion.epsilon;
  if (r.stats_region) j["stats_region"] = *r.stats_region;
  return j;
}

/// Query-parameter form used by GET /buffers. Vectors are comma-separated;
/// `occlusion` accepts true/false/1/0.
inline nlohmann::json query_to_request_json(const std::multimap<std::string, std::string>& params) {
  nlohmann::json j = nlohmann::json::object();
  auto vec = [](const std::string& key, const std::string& v, std::size_t n) {
    std::vector<double> out;
    try {
      out = detail::parse_numbers(v, key);
    } catch (const ConfigError&) {
      throw RequestError(key, key + " must be comma-separated numbers");
    }
    if (out.size() != n) throw RequestError(key, key + " needs " + std::to_string(n) + " values");
    return out;
  };
  auto num = [&vec](const std::string& key, const std::string& v) { return vec(key, v, 1)[0]; };
  for (const auto& [k, v] : params) {
    if (k == "position" || k == "look_at" || k == "up") {
      const auto p = vec("camera." + k, v, 3);
      j["camera"][k] = {p[0], p[1], p[2]};
    } else if (k == "fov_deg") {
      j["camera"]["fov_deg"] = num("camera.fov_deg", v);
    } else if (k == "observer") {
      if (v == "coupled") {
        j["observer"] = "coupled";
      } else {
        const auto p = vec("observer", v, 3);
        j["observer"] = {p[0], p[1], p[2]};
      }
    } else if (k == "width" || k == "height") {
      const double d = num("resolution", v);
      if (d != std::floor(d)) throw RequestError("resolution", "resolution must be integral");
      if (!j.contains("resolution")) j["resolution"] = {640, 360};
      j["resolution"][k == "width" ? 0 : 1] = static_cast<int>(d);
    } else if (k == "falloff" || k == "alpha" || k == "g_max" || k == "epsilon") {
      j[k] = num(k, v);
    } else if (k == "occlusion") {
      if (v == "true" || v == "1") j[k] = true;
      else if (v == "false" || v == "0") j[k] = false;
      else throw RequestError("occlusion", "occlusion must be true or false");
    } else if (k == "colormap" || k == "normalization") {
      j[k] = v;
    } else if (k == "stats_region") {
      const auto p = vec(k, v, 4);
      j[k] = {static_cast<int>(p[0]), static_cast<int>(p[1]), static_cast<int>(p[2]), static_cast<int>(p[3])};
    } else {
      throw RequestError(k, "unknown parameter '" + k + "'");
    }
  }
  return j;
}

inline nlohmann::json frame_request_schema() {
  const nlohmann::json vec3 = {{"type", "array"}, {"items", {{"type", "number"}}}, {"minItems", 3}, {"maxItems", 3}};
  return {{"$schema", "https://json-schema.org/draft/2020-12/schema"},
          {"title", "FrameRequest"},
          {"type", "object"},
          {"additionalProperties", false},
          {"required", {"camera"}},
          {"properties",
           {{"camera",
             {{"type", "object"},
              {"additionalProperties", false},
              {"required", {"position", "look_at"}},
              {"properties", {{"position", vec3}, {"look_at", vec3}, {"up", vec3}, {"fov_deg", {{"type", "number"}, {"exclusiveMinimum", 0}, {"exclusiveMaximum", 180}}}}}}},
            {"observer", {{"oneOf", {{{"const", "coupled"}}, vec3}}}},
            {"resolution", {{"type", "array"}, {"items", {{"type", "integer"}, {"minimum", 1}}}, {"minItems", 2}, {"maxItems", 2}}},
            {"falloff", {{"type", "number"}, {"exclusiveMinimum", 0}}},
            {"epsilon", {{"type", "number"}, {"minimum", 0}}},
            {"occlusion", {{"type", "boolean"}}},
            {"alpha", {{"type", "number"}, {"minimum", 0}, {"maximum", 1}}},
            {"colormap", {{"enum", {"turbo", "jet", "gray"}}}},
            {"normalization", {{"enum", {"fixed", "minmax"}}}},
            {"g_max", {{"type", "number"}, {"exclusiveMinimum", 0}}},
            {"stats_region", {{"type", "array"}, {"items", {{"type", "integer"}}}, {"minItems", 4}, {"maxItems", 4}}}}}};
}

struct ServiceSession {
  AnalyticScene scene;
  NergModel model;
  std::string scene_id;
  std::string checkpoint_id;
  IntegratorConfig integrator;
  FrameRequest defaults;
};

class FrameService {
 public:
  explicit FrameService(ServiceLimits limits = {}) : limits_(limits) {}

  /// Installs the session; /info and rendering answer 503 until then.
  void load(ServiceSession session) {
    session.integrator.validate();
    std::atomic_store(&session_, std::make_shared<const ServiceSession>(std::move(session)));
  }

  bool loaded() const { return std::atomic_load(&session_) != nullptr; }
  const ServiceLimits& limits() const { return limits_; }

  HttpResponse info() const {
    const auto session = std::atomic_load(&session_);
    if (!session) return detail::error_response(503, "model is still loading");
    const auto& s = *session;
    using json_util::from_vec3;
    return detail::json_response(
        200, {{"scene_id", s.scene_id},
              {"checkpoint_id", s.checkpoint_id},
              {"variant", to_string(s.model.variant())},
              {"aabb", {{"min", from_vec3(s.scene.bounds().lo)}, {"max", from_vec3(s.scene.bounds().hi)}}},
              {"max_resolution", {limits_.max_width, limits_.max_height}},
              {"integrator", {{"near", s.integrator.near}, {"far", s.integrator.far}, {"steps", s.integrator.steps}}},
              {"defaults", frame_request_to_json(s.defaults)}});
  }

  HttpResponse schema() const { return detail::json_response(200, frame_request_schema()); }

  HttpResponse frame(std::string_view body) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      return detail::error_response(400, std::string("malformed JSON: ") + e.what());
    }
    return run(j, false);
  }

  HttpResponse buffers(const std::multimap<std::string, std::string>& query) {
    nlohmann::json j;
    try {
      j = query_to_request_json(query);
    } catch (const RequestError& e) {
      return detail::error_response(400, e.what(), e.field());
    }
    return run(j, true);
  }

 private:
  struct Slot {
    std::atomic<std::size_t>& n;
    ~Slot() { --n; }
  };

  HttpResponse run(const nlohmann::json& j, bool raw) {
    const auto session = std::atomic_load(&session_);
    if (!session) return detail::error_response(503, "model is still loading");
    FrameRequest req;
    try {
      req = frame_request_from_json(j, session->defaults);
    } catch (const RequestError& e) {
      return detail::error_response(400, e.what(), e.field());
    }
    if (req.width > limits_.max_width || req.height > limits_.max_height)
      return detail::error_response(413, "resolution exceeds the configured maximum " + std::to_string(limits_.max_width) + "x" +
                                             std::to_string(limits_.max_height), "resolution");
    if (req.observer && !session->scene.bounds().contains(*req.observer))
      return detail::error_response(422, "observer lies outside the scene bounds", "observer");
    Camera cam;
    try {
      cam = Camera::look_at(req.camera.position, req.camera.look_at, req.camera.up, req.camera.fov_deg * kPi / 180.0, req.width,
                            req.height);
    } catch (const ConfigError& e) {
      return detail::error_response(400, e.what(), "camera");
    } catch (const DomainError& e) {
      return detail::error_response(400, e.what(), "camera");
    }
    if (in_flight_.fetch_add(1) >= limits_.queue_depth) {
      --in_flight_;
      return detail::error_response(429, "render queue is full");
    }
    Slot slot{in_flight_};
    const ObserverState obs = req.observer ? ObserverState::at(*req.observer) : ObserverState::coupled_to_camera();
    const auto t0 = std::chrono::steady_clock::now();
    const GazeFrame f = render_frame(session->scene, session->model, cam, obs, session->integrator, req.occlusion,
                                     {limits_.render_threads});
    HttpResponse resp;
    if (raw) {
      const bin::Bytes bytes = encode_frame_dump(f);
      resp.body.assign(bytes.begin(), bytes.end());
      resp.content_type = "application/octet-stream";
    } else {
      const bin::Bytes bytes = encode_png(colorize(f, req.colorize));
      resp.body.assign(bytes.begin(), bytes.end());
      resp.content_type = "image/png";
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    double gmin = 0.0, gmax = 0.0;
    const std::array<int, 4> reg = req.stats_region.value_or(std::array<int, 4>{0, 0, f.width, f.height});
    bool first = true;
    for (int y = reg[1]; y < reg[1] + reg[3]; ++y)
      for (int x = reg[0]; x < reg[0] + reg[2]; ++x) {
        const double g = f.gaze[f.index(x, y)];
        gmin = first ? g : std::min(gmin, g);
        gmax = first ? g : std::max(gmax, g);
        first = false;
      }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", ms);
    resp.headers.emplace_back("X-Render-Ms", buf);
    std::snprintf(buf, sizeof buf, "%.9g", gmin);
    resp.headers.emplace_back("X-Gaze-Min", buf);
    std::snprintf(buf, sizeof buf, "%.9g", gmax);
    resp.headers.emplace_back("X-Gaze-Max", buf);
    return resp;
  }

  ServiceLimits limits_;
  std::shared_ptr<const ServiceSession> session_;
  std::atomic<std::size_t> in_flight_{0};
};

/// Routes FrameService onto an httplib server (not started).
inline void install_routes(httplib::Server& server, FrameService& service) {
  auto send = [](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    res.set_content(r.body, r.content_type);
  };
  server.Get("/info", [&service, send](const httplib::Request&, httplib::Response& res) { send(res, service.info()); });
  server.Get("/schema", [&service, send](const httplib::Request&, httplib::Response& res) { send(res, service.schema()); });
  server.Post("/frame", [&service, send](const httplib::Request& req, httplib::Response& res) { send(res, service.frame(req.body)); });
  server.Get("/buffers", [&service, send](const httplib::Request& req, httplib::Response& res) {
    std::multimap<std::string, std::string> q(req.params.begin(), req.params.end());
    send(res, service.buffers(q));
  });
}

/// Session for a run: scene from the config, checkpoint from the output
/// directory, render and occlusion defaults from the config.
inline ServiceSession session_from_run(const RunConfig& cfg) {
  if (!std::filesystem::is_regular_file(cfg.scene)) throw MissingInputError("missing input " + cfg.scene.string());
  const auto ckpt_path = cfg.output_dir / "model.ckpt";
  if (!std::filesystem::is_regular_file(ckpt_path)) throw MissingInputError("missing input " + ckpt_path.string());
  Checkpoint ck = load_checkpoint(ckpt_path);
  FrameRequest defaults;
  defaults.camera = cfg.render.camera;
  defaults.observer = cfg.render.observer;
  defaults.width = cfg.render.width;
  defaults.height = cfg.render.height;
  defaults.occlusion = cfg.occlusion;
  defaults.colorize = cfg.render.colorize;
  return {load_scene(cfg.scene), std::move(ck.model), cfg.scene.filename().string(),
          sha256_file(ckpt_path).substr(0, 16), cfg.integrator, defaults};
}

}  // namespace nerg
