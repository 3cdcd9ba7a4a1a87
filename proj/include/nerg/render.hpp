// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0
//
// Frame rendering: radiance and depth per pixel, surface reconstruction,
// gaze evaluation for a (possibly decoupled) observer, depth-tested gaze
// occlusion, heatmap compositing, and frame-time benchmarking.
#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "nerg/field.hpp"
#include "nerg/model.hpp"
#include "nerg/scene_io.hpp"

namespace nerg {

struct ObserverState {
  Vec3 position;
  bool coupled = true;

  static ObserverState coupled_to_camera() { return {}; }
  static ObserverState at(const Vec3& p) { return {p, false}; }
};

struct OcclusionConfig {
  bool enabled = true;
  double falloff = 0.05;
  std::optional<double> epsilon;  // defaults to 2 camera integrator steps

  void validate() const {
    if (!(falloff > 0.0) || !std::isfinite(falloff)) throw ConfigError("occlusion fall-off must be > 0");
    if (epsilon && !(*epsilon >= 0.0 && std::isfinite(*epsilon))) throw ConfigError("occlusion epsilon must be >= 0");
  }

  double tolerance(const IntegratorConfig& camera_integ) const { return epsilon.value_or(2.0 * camera_integ.step_size()); }
};

/// v = clamp(1 - (d_o* - d_o - eps) / d_f, 0, 1).
inline double visibility_factor(double d_o, double d_o_star, double falloff, double epsilon) {
  const double v = 1.0 - (d_o_star - d_o - epsilon) / falloff;
  return std::clamp(v, 0.0, 1.0);
}

inline double visibility_factor(double d_o, double d_o_star, const OcclusionConfig& cfg) {
  cfg.validate();
  return visibility_factor(d_o, d_o_star, cfg.falloff, cfg.epsilon.value_or(0.0));
}

enum PixelFlag : std::uint8_t {
  kPixelSurface = 1,
  kPixelCoincident = 2,  // observer sits on the surface point; gaze undefined
};

struct GazeFrame {
  int width = 0;
  int height = 0;
  std::vector<Rgb> rgb;
  std::vector<double> depth;
  std::vector<double> gaze;
  std::vector<double> visibility;
  std::vector<std::uint8_t> flags;

  GazeFrame() = default;
  GazeFrame(int w, int h) : width(w), height(h) {
    const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    rgb.resize(n);
    depth.resize(n);
    gaze.resize(n);
    visibility.resize(n, 1.0);
    flags.resize(n);
  }
  std::size_t size() const { return gaze.size(); }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

struct RenderOptions {
  unsigned threads = 0;  // 0 = hardware concurrency
};

namespace detail {

/// Observer-side integrator: from p_o toward p_d, ending d_f past it.
inline IntegratorConfig observer_integrator(const IntegratorConfig& base, double d_star, double falloff) {
  IntegratorConfig c = base;
  c.near = 0.0;
  c.far = d_star + falloff;
  c.background_depth.reset();
  c.jitter = false;
  return c;
}

inline void render_row(const SceneField& field, const NergModel& model, const Camera& cam, const ObserverState& obs,
                       const IntegratorConfig& integ, const OcclusionConfig& occ, int y, GazeFrame& f) {
  // Coupled, or decoupled but sitting exactly on the camera: both depths
  // come from the same viewpoint, so no depth test is needed.
  const bool aligned = obs.coupled || obs.position == cam.position;
  const Vec3 p_o = aligned ? cam.position : obs.position;
  const double eps = occ.tolerance(integ);
  std::vector<Vec3> p_d, p_obs;
  std::vector<std::size_t> ids;
  for (int x = 0; x < cam.width; ++x) {
    const std::size_t i = f.index(x, y);
    const Ray ray = camera_ray(cam, x, y);
    const RenderSample s = volume_render(field, ray, integ);
    f.rgb[i] = s.color;
    f.depth[i] = s.depth;
    f.gaze[i] = 0.0;
    f.visibility[i] = 1.0;
    f.flags[i] = 0;
    if (!s.surface) continue;
    f.flags[i] |= kPixelSurface;
    const Vec3 pd = ray.at(s.depth);
    const double d_star = distance(p_o, pd);
    if (d_star < 1e-9) {
      f.flags[i] |= kPixelCoincident;
      continue;
    }
    if (!aligned && occ.enabled) {
      const IntegratorConfig oc = observer_integrator(integ, d_star, occ.falloff);
      const double d_o = render_depth(field, Ray{p_o, UnitDir::normalize(pd - p_o)}, oc).depth;
      f.visibility[i] = visibility_factor(d_o, d_star, occ.falloff, eps);
    }
    p_d.push_back(pd);
    p_obs.push_back(p_o);
    ids.push_back(i);
  }
  if (ids.empty()) return;
  std::vector<double> g(ids.size());
  model.predict_batch(p_d, p_obs, g);
  for (std::size_t k = 0; k < ids.size(); ++k) f.gaze[ids[k]] = g[k] * f.visibility[ids[k]];
}

}  // namespace detail

/// Renders color, depth, gaze and visibility for every pixel of `cam`.
/// Background pixels (opacity below threshold) get g = 0. Rows are
/// independent, so any thread count yields the same frame.
inline GazeFrame render_frame(const SceneField& field, const NergModel& model, const Camera& cam, const ObserverState& obs,
                              const IntegratorConfig& integ, const OcclusionConfig& occ, const RenderOptions& opt = {}) {
  cam.validate();
  integ.validate();
  occ.validate();
  if (!obs.coupled && !obs.position.finite()) throw ConfigError("observer position must be finite");
  GazeFrame f(cam.width, cam.height);
  unsigned threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(cam.height));
  if (threads <= 1) {
    for (int y = 0; y < cam.height; ++y) detail::render_row(field, model, cam, obs, integ, occ, y, f);
    return f;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (int y = static_cast<int>(t); y < cam.height; y += static_cast<int>(threads))
          detail::render_row(field, model, cam, obs, integ, occ, y, f);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return f;
}

// ---------------------------------------------------------------------------
// Colorize

enum class Colormap { Turbo, Jet, Gray };
enum class GazeNormalization { Fixed, MinMax };

inline std::string_view to_string(Colormap c) {
  switch (c) {
    case Colormap::Turbo: return "turbo";
    case Colormap::Jet: return "jet";
    case Colormap::Gray: return "gray";
  }
  return "?";
}

inline Colormap colormap_from_string(std::string_view s) {
  if (s == "turbo") return Colormap::Turbo;
  if (s == "jet") return Colormap::Jet;
  if (s == "gray") return Colormap::Gray;
  throw ConfigError("unknown colormap '" + std::string(s) + "' (expected turbo, jet or gray)");
}

inline std::string_view to_string(GazeNormalization n) { return n == GazeNormalization::Fixed ? "fixed" : "minmax"; }

inline GazeNormalization normalization_from_string(std::string_view s) {
  if (s == "fixed") return GazeNormalization::Fixed;
  if (s == "minmax") return GazeNormalization::MinMax;
  throw ConfigError("unknown normalization '" + std::string(s) + "' (expected fixed or minmax)");
}

/// Turbo uses the polynomial fit by A. Mikhailov (2019); jet is the
/// piecewise-linear MATLAB map. t is clamped to [0, 1].
inline Rgb colormap_lookup(Colormap map, double t) {
  t = std::clamp(t, 0.0, 1.0);
  switch (map) {
    case Colormap::Turbo: {
      const double r = 0.13572138 + t * (4.61539260 + t * (-42.66032258 + t * (132.13108234 + t * (-152.94239396 + t * 59.28637943))));
      const double g = 0.09140261 + t * (2.19418839 + t * (4.84296658 + t * (-14.18503333 + t * (4.27729857 + t * 2.82956604))));
      const double b = 0.10667330 + t * (12.64194608 + t * (-60.58204836 + t * (110.36276771 + t * (-89.90310912 + t * 27.34824973))));
      return {std::clamp(r, 0.0, 1.0), std::clamp(g, 0.0, 1.0), std::clamp(b, 0.0, 1.0)};
    }
    case Colormap::Jet: {
      auto ch = [t](double c) { return std::clamp(1.5 - std::abs(4.0 * t - c), 0.0, 1.0); };
      return {ch(3.0), ch(2.0), ch(1.0)};
    }
    case Colormap::Gray: return {t, t, t};
  }
  return {};
}

struct ColorizeConfig {
  Colormap colormap = Colormap::Turbo;
  double alpha = 0.6;
  GazeNormalization normalization = GazeNormalization::Fixed;
  double g_max = 2.0;  // fixed-range upper end; the range is [0, g_max]

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("overlay alpha must lie in [0, 1]");
    if (!(g_max > 0.0) || !std::isfinite(g_max)) throw ConfigError("g_max must be > 0");
  }
};

/// 8-bit interleaved RGB.
struct Image8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;
};

inline std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

inline Image8 rgb_image(const GazeFrame& f) {
  Image8 img{f.width, f.height, std::vector<std::uint8_t>(3 * f.size())};
  for (std::size_t i = 0; i < f.size(); ++i) {
    img.data[3 * i] = to_u8(f.rgb[i].r);
    img.data[3 * i + 1] = to_u8(f.rgb[i].g);
    img.data[3 * i + 2] = to_u8(f.rgb[i].b);
  }
  return img;
}

struct GazeRange {
  double min = 0.0;
  double max = 0.0;
};

/// Range over pixels with g > 0; {0, 0} when there are none.
inline GazeRange gaze_range(const GazeFrame& f) {
  GazeRange r;
  bool any = false;
  for (double g : f.gaze) {
    if (!(g > 0.0)) continue;
    if (!any) r = {g, g};
    r.min = std::min(r.min, g);
    r.max = std::max(r.max, g);
    any = true;
  }
  return r;
}

/// Maps g to [0, 1]: g / g_max in fixed mode, (g - min) / (max - min) over
/// the frame's nonzero pixels in min-max mode (1 when the range is empty).
inline double normalize_gaze(double g, const ColorizeConfig& cfg, const GazeRange& range) {
  if (cfg.normalization == GazeNormalization::Fixed) return std::clamp(g / cfg.g_max, 0.0, 1.0);
  const double span = range.max - range.min;
  if (!(span > 0.0)) return 1.0;
  return std::clamp((g - range.min) / span, 0.0, 1.0);
}

/// out = (1 - alpha) rgb + alpha colormap(t) where g > 0; pixels with g = 0
/// keep their rgb, so an all-zero gaze frame passes through unchanged.
inline Image8 colorize(const GazeFrame& f, const ColorizeConfig& cfg) {
  cfg.validate();
  for (double g : f.gaze)
    if (!std::isfinite(g)) throw DomainError("gaze buffer is not finite");
  const GazeRange range = gaze_range(f);
  Image8 img{f.width, f.height, std::vector<std::uint8_t>(3 * f.size())};
  for (std::size_t i = 0; i < f.size(); ++i) {
    Rgb c = f.rgb[i];
    if (f.gaze[i] > 0.0) {
      const Rgb m = colormap_lookup(cfg.colormap, normalize_gaze(f.gaze[i], cfg, range));
      c = (1.0 - cfg.alpha) * c + cfg.alpha * m;
    }
    img.data[3 * i] = to_u8(c.r);
    img.data[3 * i + 1] = to_u8(c.g);
    img.data[3 * i + 2] = to_u8(c.b);
  }
  return img;
}

// ---------------------------------------------------------------------------
// Bench

struct BenchConfig {
  int width = 1280;
  int height = 720;
  std::size_t n_cams = 32;
  std::uint64_t seed = 0;
  double fov_y = kPi / 3.0;
  double margin = 0.1;  // fraction of the aabb extent kept clear on each side
  unsigned threads = 1;

  void validate() const {
    if (width < 1 || height < 1) throw ConfigError("bench resolution must be at least 1x1");
    if (n_cams < 1) throw ConfigError("bench needs n_cams >= 1");
    if (!(margin >= 0.0 && margin < 0.5)) throw ConfigError("bench margin must lie in [0, 0.5)");
  }
};

/// Seeded cameras: positions uniform in the shrunk aabb and outside any
/// geometry, each looking at a uniform point of the aabb, z up.
inline std::vector<Camera> bench_cameras(const SceneField& field, const BenchConfig& cfg) {
  cfg.validate();
  const Aabb b = field.bounds();
  const Vec3 pad = cfg.margin * b.extent();
  const Aabb inner{b.lo + pad, b.hi - pad};
  std::mt19937_64 rng(cfg.seed);
  auto uniform_in = [&rng](const Aabb& box) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = std::uniform_real_distribution<double>(box.lo[a], box.hi[a])(rng);
    return p;
  };
  std::vector<Camera> cams;
  constexpr int kMaxTries = 10000;
  for (std::size_t c = 0; c < cfg.n_cams; ++c) {
    int tries = 0;
    for (;; ++tries) {
      if (tries >= kMaxTries) throw ConfigError("bench: no free camera position found");
      const Vec3 pos = uniform_in(inner);
      if (field.density(pos) > 0.0) continue;
      const Vec3 target = uniform_in(b);
      const Vec3 d = target - pos;
      if (norm(d) < 1e-3 * norm(b.extent()) || std::abs(normalized(d).z) > 0.95) continue;
      cams.push_back(Camera::look_at(pos, target, {0, 0, 1}, cfg.fov_y, cfg.width, cfg.height));
      break;
    }
  }
  return cams;
}

struct BenchSeries {
  std::string label;
  std::vector<double> ms;
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
};

struct BenchReport {
  BenchConfig config;
  std::vector<Camera> cameras;
  std::vector<BenchSeries> series;
};

/// Linear-interpolated percentile, q in [0, 1].
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct BenchModel {
  std::string label;
  const NergModel* model = nullptr;
};

/// Wall-clock render_frame time for every model on one shared camera set.
/// Models are interleaved per camera so drift affects them alike.
inline BenchReport bench_frame_time(const SceneField& field, std::span<const BenchModel> models, const BenchConfig& cfg,
                                    const IntegratorConfig& integ, const OcclusionConfig& occ = {},
                                    const ObserverState& obs = ObserverState::coupled_to_camera()) {
  if (models.empty()) throw ConfigError("bench needs at least one model");
  BenchReport rep{cfg, bench_cameras(field, cfg), {}};
  for (const auto& m : models) rep.series.push_back({m.label, {}, 0, 0, 0});
  const RenderOptions opt{cfg.threads};
  for (const Camera& cam : rep.cameras) {
    for (std::size_t k = 0; k < models.size(); ++k) {
      const auto t0 = std::chrono::steady_clock::now();
      const GazeFrame f = render_frame(field, *models[k].model, cam, obs, integ, occ, opt);
      const auto t1 = std::chrono::steady_clock::now();
      rep.series[k].ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
  }
  for (auto& s : rep.series) {
    double sum = 0.0;
    for (double v : s.ms) sum += v;
    s.mean = sum / static_cast<double>(s.ms.size());
    s.p50 = percentile(s.ms, 0.5);
    s.p95 = percentile(s.ms, 0.95);
  }
  return rep;
}

inline nlohmann::json camera_to_json(const Camera& c) {
  using json_util::from_vec3;
  return {{"position", from_vec3(c.position)}, {"forward", from_vec3(c.forward)}, {"up", from_vec3(c.up)}, {"fov_y", c.fov_y}};
}

inline nlohmann::json bench_to_json(const BenchReport& r) {
  nlohmann::json j;
  j["resolution"] = {r.config.width, r.config.height};
  j["n_cams"] = r.config.n_cams;
  j["seed"] = r.config.seed;
  j["cameras"] = nlohmann::json::array();
  for (const auto& c : r.cameras) j["cameras"].push_back(camera_to_json(c));
  j["models"] = nlohmann::json::array();
  for (const auto& s : r.series)
    j["models"].push_back({{"label", s.label}, {"per_camera_ms", s.ms}, {"mean_ms", s.mean}, {"p50_ms", s.p50}, {"p95_ms", s.p95}});
  return j;
}

}  // namespace nerg
