// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0
//
// Volumetric scene fields (density + albedo) and fixed-step volume
// rendering. These fields play the role of a pretrained radiance field:
// the rest of the pipeline only ever queries density and color.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nerg/core.hpp"

namespace nerg {

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  Rgb& operator+=(const Rgb& o) { r += o.r; g += o.g; b += o.b; return *this; }
  friend Rgb operator+(Rgb a, const Rgb& o) { return a += o; }
  friend Rgb operator*(double s, const Rgb& c) { return {s * c.r, s * c.g, s * c.b}; }
  friend bool operator==(const Rgb&, const Rgb&) = default;

  bool in_unit_range() const { return r >= 0 && r <= 1 && g >= 0 && g <= 1 && b >= 0 && b <= 1; }
};

struct FieldSample {
  double sigma = 0.0;  // extinction per scene unit
  Rgb rgb;
};

/// Read-only volumetric field. Implementations are immutable after
/// construction, so concurrent queries are safe.
class SceneField {
 public:
  virtual ~SceneField() = default;

  /// Density and color at p seen along `view`. Zero density outside bounds().
  virtual FieldSample query(const Vec3& p, const UnitDir& view) const = 0;

  /// Density only. Must equal query(p, ·).sigma bit for bit.
  virtual double density(const Vec3& p) const = 0;

  virtual Aabb bounds() const = 0;

  /// Color seen by rays that leave the field.
  virtual Rgb background() const { return {}; }
};

// ---------------------------------------------------------------------------
// Analytic scenes

enum class PrimitiveKind { Sphere, Box, Slab };

/// Constant-density sphere, axis-aligned box, or axis-aligned slab
/// (infinite in the two other axes, clipped by the scene bounds).
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::Sphere;
  Vec3 center;
  double radius = 0.0;
  Vec3 lo;  // box corners; for slabs the two free axes are +-infinity
  Vec3 hi;
  int axis = 2;
  double sigma = 0.0;
  Rgb albedo;

  static Primitive sphere(const Vec3& center, double radius, double sigma, const Rgb& albedo) {
    Primitive p;
    p.kind = PrimitiveKind::Sphere;
    p.center = center;
    p.radius = radius;
    p.lo = center - Vec3{radius, radius, radius};
    p.hi = center + Vec3{radius, radius, radius};
    p.sigma = sigma;
    p.albedo = albedo;
    p.validate();
    return p;
  }

  static Primitive box(const Vec3& lo, const Vec3& hi, double sigma, const Rgb& albedo) {
    Primitive p;
    p.kind = PrimitiveKind::Box;
    p.lo = lo;
    p.hi = hi;
    p.center = 0.5 * (lo + hi);
    p.sigma = sigma;
    p.albedo = albedo;
    p.validate();
    return p;
  }

  static Primitive slab(int axis, double min, double max, double sigma, const Rgb& albedo) {
    if (axis < 0 || axis > 2) throw ConfigError("slab axis must be 0, 1 or 2");
    Primitive p;
    p.kind = PrimitiveKind::Slab;
    p.axis = axis;
    const double inf = std::numeric_limits<double>::infinity();
    p.lo = {-inf, -inf, -inf};
    p.hi = {inf, inf, inf};
    p.lo[axis] = min;
    p.hi[axis] = max;
    p.sigma = sigma;
    p.albedo = albedo;
    p.validate();
    return p;
  }

  bool contains(const Vec3& p) const {
    if (kind == PrimitiveKind::Sphere) {
      const Vec3 d = p - center;
      return dot(d, d) <= radius * radius;
    }
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
  }

  bool finite_extent() const { return kind != PrimitiveKind::Slab; }
  Aabb bounds() const { return {lo, hi}; }

  void validate() const {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("primitive density must be finite and >= 0");
    if (!albedo.in_unit_range()) throw ConfigError("primitive albedo must lie in [0, 1]^3");
    switch (kind) {
      case PrimitiveKind::Sphere:
        if (!center.finite() || !(radius > 0.0) || !std::isfinite(radius))
          throw ConfigError("sphere needs a finite center and positive radius");
        break;
      case PrimitiveKind::Box:
        if (!Aabb{lo, hi}.valid()) throw ConfigError("box needs finite min <= max");
        break;
      case PrimitiveKind::Slab:
        if (!std::isfinite(lo[axis]) || !std::isfinite(hi[axis]) || lo[axis] > hi[axis])
          throw ConfigError("slab needs finite min <= max");
        break;
    }
  }
};

/// Collection of constant-density primitives. Overlapping densities add;
/// color is the density-weighted mean albedo.
class AnalyticScene final : public SceneField {
 public:
  AnalyticScene() = default;

  AnalyticScene(std::vector<Primitive> primitives, Rgb background, std::optional<Aabb> bounds = std::nullopt)
      : primitives_(std::move(primitives)), background_(background) {
    if (!background_.in_unit_range()) throw ConfigError("background color must lie in [0, 1]^3");
    for (const auto& p : primitives_) p.validate();
    if (bounds) {
      if (!bounds->valid()) throw ConfigError("scene bounds must be finite with min <= max");
      bounds_ = *bounds;
    } else {
      std::optional<Aabb> acc;
      for (const auto& p : primitives_)
        if (p.finite_extent()) acc = acc ? acc->merged(p.bounds()) : p.bounds();
      if (!acc) {
        if (!primitives_.empty()) throw ConfigError("scene with only slabs needs explicit bounds");
        acc = Aabb{{-1, -1, -1}, {1, 1, 1}};
      }
      bounds_ = *acc;
    }
    explicit_bounds_ = bounds.has_value();
  }

  FieldSample query(const Vec3& p, const UnitDir&) const override {
    FieldSample out;
    if (!bounds_.contains(p)) return out;
    double r = 0.0, g = 0.0, b = 0.0;
    for (const auto& prim : primitives_) {
      if (!prim.contains(p)) continue;
      out.sigma += prim.sigma;
      r += prim.sigma * prim.albedo.r;
      g += prim.sigma * prim.albedo.g;
      b += prim.sigma * prim.albedo.b;
    }
    if (out.sigma > 0.0) out.rgb = {r / out.sigma, g / out.sigma, b / out.sigma};
    return out;
  }

  double density(const Vec3& p) const override {
    if (!bounds_.contains(p)) return 0.0;
    double sigma = 0.0;
    for (const auto& prim : primitives_)
      if (prim.contains(p)) sigma += prim.sigma;
    return sigma;
  }

  Aabb bounds() const override { return bounds_; }
  Rgb background() const override { return background_; }

  const std::vector<Primitive>& primitives() const { return primitives_; }
  bool has_explicit_bounds() const { return explicit_bounds_; }

 private:
  std::vector<Primitive> primitives_;
  Rgb background_;
  Aabb bounds_{{-1, -1, -1}, {1, 1, 1}};
  bool explicit_bounds_ = false;
};

// ---------------------------------------------------------------------------
// Voxel grids

struct GridResolution {
  int nx = 2;
  int ny = 2;
  int nz = 2;

  std::size_t cells() const { return static_cast<std::size_t>(nx) * ny * nz; }
  friend bool operator==(const GridResolution&, const GridResolution&) = default;
};

/// Regular grid of (sigma, r, g, b) samples at cell centers, x fastest.
class VoxelGrid final : public SceneField {
 public:
  VoxelGrid(GridResolution res, Aabb bounds, std::vector<float> values, bool trilinear = true, Rgb background = {})
      : res_(res), bounds_(bounds), values_(std::move(values)), trilinear_(trilinear), background_(background) {
    if (res_.nx < 2 || res_.ny < 2 || res_.nz < 2) throw ConfigError("voxel grid needs at least 2 cells per axis");
    if (!bounds_.valid() || bounds_.extent().x <= 0 || bounds_.extent().y <= 0 || bounds_.extent().z <= 0)
      throw ConfigError("voxel grid bounds must have positive extent");
    if (values_.size() != 4 * res_.cells()) throw ConfigError("voxel grid value count does not match resolution");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      const float v = values_[i];
      if (!std::isfinite(v) || v < 0.0f || (i % 4 != 0 && v > 1.0f))
        throw ConfigError("voxel grid values out of range");
    }
    cell_ = {bounds_.extent().x / res_.nx, bounds_.extent().y / res_.ny, bounds_.extent().z / res_.nz};
  }

  FieldSample query(const Vec3& p, const UnitDir&) const override {
    FieldSample out;
    if (!bounds_.contains(p)) return out;
    float v[4];
    sample(p, v);
    out.sigma = v[0];
    out.rgb = {v[1], v[2], v[3]};
    return out;
  }

  double density(const Vec3& p) const override {
    if (!bounds_.contains(p)) return 0.0;
    float v[4];
    sample(p, v);
    return v[0];
  }

  Aabb bounds() const override { return bounds_; }
  Rgb background() const override { return background_; }

  GridResolution resolution() const { return res_; }
  const std::vector<float>& values() const { return values_; }
  bool trilinear() const { return trilinear_; }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(res_.nx) * (j + static_cast<std::size_t>(res_.ny) * k);
  }

  Vec3 cell_center(int i, int j, int k) const {
    return {bounds_.lo.x + (i + 0.5) * cell_.x, bounds_.lo.y + (j + 0.5) * cell_.y, bounds_.lo.z + (k + 0.5) * cell_.z};
  }

 private:
  void sample(const Vec3& p, float out[4]) const {
    const int n[3] = {res_.nx, res_.ny, res_.nz};
    if (!trilinear_) {
      int idx[3];
      for (int a = 0; a < 3; ++a)
        idx[a] = std::clamp(static_cast<int>(std::floor((p[a] - bounds_.lo[a]) / cell_[a])), 0, n[a] - 1);
      const float* c = &values_[4 * index(idx[0], idx[1], idx[2])];
      for (int q = 0; q < 4; ++q) out[q] = c[q];
      return;
    }
    int i0[3], i1[3];
    double f[3];
    for (int a = 0; a < 3; ++a) {
      const double u = std::clamp((p[a] - bounds_.lo[a]) / cell_[a] - 0.5, 0.0, static_cast<double>(n[a] - 1));
      i0[a] = std::min(static_cast<int>(u), n[a] - 2);
      i1[a] = i0[a] + 1;
      f[a] = u - i0[a];
    }
    double acc[4] = {0, 0, 0, 0};
    for (int corner = 0; corner < 8; ++corner) {
      const int ix = corner & 1 ? i1[0] : i0[0];
      const int iy = corner & 2 ? i1[1] : i0[1];
      const int iz = corner & 4 ? i1[2] : i0[2];
      const double w = (corner & 1 ? f[0] : 1 - f[0]) * (corner & 2 ? f[1] : 1 - f[1]) * (corner & 4 ? f[2] : 1 - f[2]);
      const float* c = &values_[4 * index(ix, iy, iz)];
      for (int q = 0; q < 4; ++q) acc[q] += w * c[q];
    }
    for (int q = 0; q < 4; ++q) out[q] = static_cast<float>(acc[q]);
  }

  GridResolution res_;
  Aabb bounds_;
  std::vector<float> values_;
  bool trilinear_;
  Rgb background_;
  Vec3 cell_;
};

/// Samples the scene at cell centers over its bounds.
inline VoxelGrid bake_voxel_grid(const AnalyticScene& scene, GridResolution res, bool trilinear = true) {
  if (res.nx < 2 || res.ny < 2 || res.nz < 2) throw ConfigError("voxel grid needs at least 2 cells per axis");
  const Aabb b = scene.bounds();
  const Vec3 cell{b.extent().x / res.nx, b.extent().y / res.ny, b.extent().z / res.nz};
  std::vector<float> values(4 * res.cells());
  const UnitDir view;
  std::size_t o = 0;
  for (int k = 0; k < res.nz; ++k)
    for (int j = 0; j < res.ny; ++j)
      for (int i = 0; i < res.nx; ++i) {
        const Vec3 p{b.lo.x + (i + 0.5) * cell.x, b.lo.y + (j + 0.5) * cell.y, b.lo.z + (k + 0.5) * cell.z};
        const FieldSample s = scene.query(p, view);
        values[o++] = static_cast<float>(s.sigma);
        values[o++] = static_cast<float>(s.rgb.r);
        values[o++] = static_cast<float>(s.rgb.g);
        values[o++] = static_cast<float>(s.rgb.b);
      }
  return VoxelGrid(res, b, std::move(values), trilinear, scene.background());
}

// ---------------------------------------------------------------------------
// Volume rendering

struct IntegratorConfig {
  double near = 0.0;
  double far = 10.0;
  int steps = 256;
  double min_transmittance = 1e-4;  // early termination
  double opacity_threshold = 1e-2;  // below this a ray has no surface
  std::optional<double> background_depth;  // defaults to `far`
  bool jitter = false;
  std::uint64_t jitter_seed = 0;

  double step_size() const { return (far - near) / steps; }
  double no_surface_depth() const { return background_depth.value_or(far); }

  void validate() const {
    if (!(near >= 0.0) || !(far > near) || !std::isfinite(far)) throw ConfigError("integrator needs 0 <= near < far");
    if (steps < 2) throw ConfigError("integrator needs at least 2 steps");
    if (!(min_transmittance >= 0.0 && min_transmittance < 1.0))
      throw ConfigError("early-termination threshold must lie in [0, 1)");
    if (!(opacity_threshold >= 0.0 && opacity_threshold < 1.0))
      throw ConfigError("opacity threshold must lie in [0, 1)");
    if (background_depth && !std::isfinite(*background_depth)) throw ConfigError("background depth must be finite");
  }
};

struct RenderSample {
  Rgb color;
  double opacity = 0.0;
  double depth = 0.0;
  bool surface = false;  // opacity exceeded the threshold
};

struct DepthSample {
  double depth = 0.0;
  double opacity = 0.0;
  bool surface = false;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline double jitter_offset(std::uint64_t seed, const Ray& ray) {
  std::uint64_t h = splitmix64(seed);
  for (double v : {ray.origin.x, ray.origin.y, ray.origin.z, ray.dir.vec().x, ray.dir.vec().y, ray.dir.vec().z})
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(v));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

struct MarchResult {
  Rgb color;
  double transmittance = 1.0;
  double opacity = 0.0;
  double weighted_t = 0.0;
};

/// Shared quadrature for color and depth-only rendering. Sample i sits at
/// t = near + (i + u) * dt with u = 0.5 unless jittered; samples outside the
/// field bounds are skipped since their density is zero.
template <bool kWithColor>
MarchResult march(const SceneField& field, const Ray& ray, const IntegratorConfig& cfg) {
  const double dt = cfg.step_size();
  const double u = cfg.jitter ? jitter_offset(cfg.jitter_seed, ray) : 0.5;
  MarchResult r;
  const auto span = field.bounds().intersect(ray);
  if (!span) return r;
  const double first_d = std::clamp(std::floor((span->first - cfg.near) / dt - u), 0.0, double(cfg.steps));
  const double last_d = std::clamp(std::ceil((span->second - cfg.near) / dt - u) + 1.0, 0.0, double(cfg.steps));
  const int first = static_cast<int>(first_d);
  const int last = static_cast<int>(last_d);
  for (int i = first; i < last; ++i) {
    const double t = cfg.near + (i + u) * dt;
    const Vec3 p = ray.at(t);
    double sigma;
    Rgb rgb;
    if constexpr (kWithColor) {
      const FieldSample s = field.query(p, ray.dir);
      sigma = s.sigma;
      rgb = s.rgb;
    } else {
      sigma = field.density(p);
    }
    if (!(sigma > 0.0)) continue;
    const double alpha = -std::expm1(-sigma * dt);
    const double w = r.transmittance * alpha;
    r.opacity += w;
    r.weighted_t += w * t;
    if constexpr (kWithColor) r.color += w * rgb;
    r.transmittance *= 1.0 - alpha;
    if (r.transmittance < cfg.min_transmittance) break;
  }
  return r;
}

inline void resolve_depth(const MarchResult& m, const IntegratorConfig& cfg, double& depth, bool& surface) {
  surface = m.opacity > cfg.opacity_threshold;
  depth = surface ? m.weighted_t / m.opacity : cfg.no_surface_depth();
}

}  // namespace detail

/// Emission-absorption quadrature along `ray`: alpha_i = 1 - exp(-sigma_i dt),
/// weights T_i alpha_i. Depth is the opacity-normalized expected termination
/// distance, or the background depth when opacity stays below threshold.
inline RenderSample volume_render(const SceneField& field, const Ray& ray, const IntegratorConfig& cfg) {
  cfg.validate();
  const detail::MarchResult m = detail::march<true>(field, ray, cfg);
  RenderSample s;
  s.color = m.color + m.transmittance * field.background();
  s.opacity = m.opacity;
  detail::resolve_depth(m, cfg, s.depth, s.surface);
  return s;
}

/// Density-only variant of volume_render; returns the identical depth and
/// opacity without touching color.
inline DepthSample render_depth(const SceneField& field, const Ray& ray, const IntegratorConfig& cfg) {
  cfg.validate();
  const detail::MarchResult m = detail::march<false>(field, ray, cfg);
  DepthSample s;
  s.opacity = m.opacity;
  detail::resolve_depth(m, cfg, s.depth, s.surface);
  return s;
}

}  // namespace nerg
