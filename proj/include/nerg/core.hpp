// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0
//
// Geometry primitives shared by every other module: vectors, unit
// directions, rays, axis-aligned boxes, the pinhole camera and the
// similarity transform between gaze-data and scene coordinates.
//
// Spherical convention: theta is the polar angle measured from +z,
// phi the azimuth measured from +x toward +y, phi in [-pi, pi).
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "nerg/error.hpp"

namespace nerg {

inline constexpr double kPi = std::numbers::pi;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

  friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend constexpr Vec3 operator/(const Vec3& a, double s) { return {a.x / s, a.y / s, a.z / s}; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;

  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

inline Vec3 normalized(const Vec3& v) {
  const double n = norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("cannot normalize a zero or non-finite vector");
  return v / n;
}

inline constexpr double kUnitTolerance = 1e-6;

inline bool is_unit(const Vec3& v, double tol = kUnitTolerance) {
  return std::abs(norm(v) - 1.0) <= tol;
}

/// (sin t cos p, sin t sin p, cos t).
inline Vec3 dir_from_spherical(double theta, double phi) {
  if (!(theta >= 0.0 && theta <= kPi) || !std::isfinite(phi))
    throw DomainError("theta must lie in [0, pi] and phi must be finite");
  const double st = std::sin(theta);
  return {st * std::cos(phi), st * std::sin(phi), std::cos(theta)};
}

struct Spherical {
  double theta = 0.0;
  double phi = 0.0;
};

/// Inverse of dir_from_spherical. At the poles phi is defined as 0.
inline Spherical spherical_from_dir(const Vec3& v) {
  if (!v.finite() || !is_unit(v)) throw DomainError("spherical_from_dir expects a unit vector");
  const double rho = std::hypot(v.x, v.y);
  // atan2 keeps full precision near the poles where acos(z) would not.
  const double theta = std::atan2(rho, v.z);
  double phi = rho == 0.0 ? 0.0 : std::atan2(v.y, v.x);
  if (phi >= kPi) phi -= 2.0 * kPi;
  return {theta, phi};
}

/// A direction on the unit sphere. Stores the unit vector; angles are
/// derived on demand.
class UnitDir {
 public:
  UnitDir() = default;

  static UnitDir from_spherical(double theta, double phi) { return UnitDir(dir_from_spherical(theta, phi)); }

  /// Accepts a vector that is already unit length (within 1e-6) and
  /// renormalizes it.
  static UnitDir from_unit(const Vec3& v) {
    if (!v.finite() || !is_unit(v)) throw DomainError("direction is not unit length");
    return UnitDir(v / norm(v));
  }

  /// Normalizes an arbitrary non-zero vector.
  static UnitDir normalize(const Vec3& v) { return UnitDir(normalized(v)); }

  const Vec3& vec() const { return v_; }
  Spherical angles() const { return spherical_from_dir(v_); }
  double theta() const { return angles().theta; }
  double phi() const { return angles().phi; }
  UnitDir operator-() const { return UnitDir(-v_); }

  friend bool operator==(const UnitDir&, const UnitDir&) = default;

 private:
  explicit UnitDir(const Vec3& v) : v_(v) {}
  Vec3 v_{0.0, 0.0, 1.0};
};

struct Ray {
  Vec3 origin;
  UnitDir dir;

  Vec3 at(double t) const { return origin + t * dir.vec(); }
};

struct Aabb {
  Vec3 lo;
  Vec3 hi;

  bool valid() const { return lo.finite() && hi.finite() && lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z; }
  bool contains(const Vec3& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
  }
  Vec3 center() const { return 0.5 * (lo + hi); }
  Vec3 extent() const { return hi - lo; }

  Aabb merged(const Aabb& o) const {
    return {{std::min(lo.x, o.lo.x), std::min(lo.y, o.lo.y), std::min(lo.z, o.lo.z)},
            {std::max(hi.x, o.hi.x), std::max(hi.y, o.hi.y), std::max(hi.z, o.hi.z)}};
  }

  /// Closest point of the box to p.
  Vec3 clamp(const Vec3& p) const {
    return {std::clamp(p.x, lo.x, hi.x), std::clamp(p.y, lo.y, hi.y), std::clamp(p.z, lo.z, hi.z)};
  }

  /// Slab test. Returns the parametric interval [t0, t1] (t may be
  /// negative) where the ray is inside the box.
  std::optional<std::pair<double, double>> intersect(const Ray& ray) const {
    double t0 = -INFINITY;
    double t1 = INFINITY;
    for (int a = 0; a < 3; ++a) {
      const double o = ray.origin[a];
      const double d = ray.dir.vec()[a];
      if (d == 0.0) {
        if (o < lo[a] || o > hi[a]) return std::nullopt;
        continue;
      }
      double ta = (lo[a] - o) / d;
      double tb = (hi[a] - o) / d;
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    }
    if (t0 > t1) return std::nullopt;
    return std::pair{t0, t1};
  }

  friend bool operator==(const Aabb&, const Aabb&) = default;
};

/// Pinhole camera. `forward` looks into the scene, `up` points to the top
/// of the image, pixel rows grow downward.
struct Camera {
  Vec3 position;
  Vec3 right{1.0, 0.0, 0.0};
  Vec3 up{0.0, 0.0, 1.0};
  Vec3 forward{0.0, 1.0, 0.0};
  double fov_y = kPi / 3.0;
  int width = 1;
  int height = 1;

  static Camera look_at(const Vec3& position, const Vec3& target, const Vec3& world_up, double fov_y, int width,
                        int height) {
    Camera cam;
    cam.position = position;
    cam.forward = normalized(target - position);
    const Vec3 r = cross(cam.forward, world_up);
    if (norm(r) < 1e-9) throw ConfigError("camera up vector is parallel to the viewing direction");
    cam.right = normalized(r);
    cam.up = cross(cam.right, cam.forward);
    cam.fov_y = fov_y;
    cam.width = width;
    cam.height = height;
    cam.validate();
    return cam;
  }

  void validate() const {
    if (!position.finite()) throw ConfigError("camera position must be finite");
    if (!(fov_y > 0.0 && fov_y < kPi)) throw ConfigError("camera fov must lie in (0, pi)");
    if (width < 1 || height < 1) throw ConfigError("camera resolution must be at least 1x1");
    const double tol = 1e-6;
    if (!is_unit(right, tol) || !is_unit(up, tol) || !is_unit(forward, tol) || std::abs(dot(right, up)) > tol ||
        std::abs(dot(right, forward)) > tol || std::abs(dot(up, forward)) > tol)
      throw ConfigError("camera basis must be orthonormal");
  }

  friend bool operator==(const Camera&, const Camera&) = default;
};

/// Primary ray through the center of pixel (px, py).
inline Ray camera_ray(const Camera& cam, int px, int py) {
  if (px < 0 || py < 0 || px >= cam.width || py >= cam.height) throw DomainError("pixel outside the sensor");
  const double tan_half = std::tan(0.5 * cam.fov_y);
  const double aspect = static_cast<double>(cam.width) / cam.height;
  const double sx = (2.0 * (px + 0.5) / cam.width - 1.0) * tan_half * aspect;
  const double sy = (1.0 - 2.0 * (py + 0.5) / cam.height) * tan_half;
  return {cam.position, UnitDir::normalize(cam.forward + sx * cam.right + sy * cam.up)};
}

/// Similarity transform (uniform scale * rotation + translation) stored as
/// a row-major homogeneous 4x4 matrix. Maps scene coordinates to gaze-data
/// coordinates.
class WorldTransform {
 public:
  WorldTransform() : m_{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1} { update_scale(); }

  static WorldTransform identity() { return {}; }

  static WorldTransform from_row_major(std::span<const double> values) {
    if (values.size() != 16) throw ConfigError("world transform needs 16 values");
    WorldTransform t;
    for (std::size_t i = 0; i < 16; ++i) {
      if (!std::isfinite(values[i])) throw ConfigError("world transform has non-finite entries");
      t.m_[i] = values[i];
    }
    t.check();
    return t;
  }

  static WorldTransform translation(const Vec3& d) {
    WorldTransform t;
    t.m_[3] = d.x;
    t.m_[7] = d.y;
    t.m_[11] = d.z;
    return t;
  }

  /// scale * R(axis, angle), then translate.
  static WorldTransform similarity(double scale, const Vec3& axis, double angle, const Vec3& offset) {
    const Vec3 k = normalized(axis);
    const double c = std::cos(angle), s = std::sin(angle), C = 1.0 - c;
    const std::array<double, 16> v{
        scale * (c + k.x * k.x * C),       scale * (k.x * k.y * C - k.z * s), scale * (k.x * k.z * C + k.y * s), offset.x,
        scale * (k.y * k.x * C + k.z * s), scale * (c + k.y * k.y * C),       scale * (k.y * k.z * C - k.x * s), offset.y,
        scale * (k.z * k.x * C - k.y * s), scale * (k.z * k.y * C + k.x * s), scale * (c + k.z * k.z * C),       offset.z,
        0.0, 0.0, 0.0, 1.0};
    return from_row_major(v);
  }

  const std::array<double, 16>& row_major() const { return m_; }
  double scale() const { return scale_; }

  Vec3 transform_point(const Vec3& p) const {
    return {m_[0] * p.x + m_[1] * p.y + m_[2] * p.z + m_[3], m_[4] * p.x + m_[5] * p.y + m_[6] * p.z + m_[7],
            m_[8] * p.x + m_[9] * p.y + m_[10] * p.z + m_[11]};
  }

  /// Rotation part only; the result is renormalized.
  UnitDir transform_dir(const UnitDir& d) const { return UnitDir::normalize(linear(d.vec())); }

  WorldTransform inverse() const {
    // (sR)^-1 = R^T / s, so the inverse linear block is M^T / s^2.
    const double inv_s2 = 1.0 / (scale_ * scale_);
    WorldTransform t;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) t.m_[r * 4 + c] = m_[c * 4 + r] * inv_s2;
    const Vec3 offset{m_[3], m_[7], m_[11]};
    const Vec3 inv_offset = -t.linear(offset);
    t.m_[3] = inv_offset.x;
    t.m_[7] = inv_offset.y;
    t.m_[11] = inv_offset.z;
    t.update_scale();
    return t;
  }

 private:
  Vec3 linear(const Vec3& v) const {
    return {m_[0] * v.x + m_[1] * v.y + m_[2] * v.z, m_[4] * v.x + m_[5] * v.y + m_[6] * v.z,
            m_[8] * v.x + m_[9] * v.y + m_[10] * v.z};
  }

  Vec3 column(int c) const { return {m_[c], m_[4 + c], m_[8 + c]}; }

  void update_scale() { scale_ = norm(column(0)); }

  void check() {
    if (m_[12] != 0.0 || m_[13] != 0.0 || m_[14] != 0.0 || m_[15] != 1.0)
      throw ConfigError("world transform bottom row must be (0, 0, 0, 1)");
    update_scale();
    if (!(scale_ > 1e-12)) throw ConfigError("world transform is singular");
    const double s2 = scale_ * scale_;
    const double tol = 1e-6 * s2;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        const double expect = a == b ? s2 : 0.0;
        if (std::abs(dot(column(a), column(b)) - expect) > tol)
          throw ConfigError("world transform must be a similarity (uniform scale times rotation)");
      }
    if (dot(cross(column(0), column(1)), column(2)) <= 0.0)
      throw ConfigError("world transform must preserve orientation");
  }

  std::array<double, 16> m_;
  double scale_ = 1.0;
};

}  // namespace nerg
