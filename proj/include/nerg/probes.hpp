// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0
//
// Gaze probes: aggregation of raw gaze rays into local egocentric
// direction densities via von Mises-Fisher kernel density estimation on
// the unit sphere, plus the sample generators that turn probes into
// training data.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <span>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "nerg/core.hpp"
#include "nerg/field.hpp"

namespace nerg {

/// Independent, reproducible sub-stream seed for item `stream` of a run.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return detail::splitmix64(seed ^ detail::splitmix64(stream + 0x632be59bd9b4e019ULL));
}

struct GazeRay {
  Vec3 position;
  UnitDir direction;
};

// ---------------------------------------------------------------------------
// von Mises-Fisher kernel

class VmfKernel {
 public:
  explicit VmfKernel(double kappa = 50.0) : kappa_(kappa) {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw DomainError("vMF concentration must be positive and finite");
    // C(k) e^k = k / (2 pi (1 - e^{-2k})); expm1 keeps the small-k limit exact.
    log_peak_ = std::log(kappa) - std::log(2.0 * kPi) - std::log(-std::expm1(-2.0 * kappa));
  }

  double kappa() const { return kappa_; }

  /// Density at mu . omega = 1.
  double peak() const { return std::exp(log_peak_); }

  /// log C(k) + k cos, written as log(peak) + k (cos - 1) so that large
  /// concentrations never overflow.
  double log_pdf_cos(double cos_angle) const {
    return log_peak_ + kappa_ * (std::min(cos_angle, 1.0) - 1.0);
  }

  double pdf_cos(double cos_angle) const { return std::exp(log_pdf_cos(cos_angle)); }

  friend bool operator==(const VmfKernel& a, const VmfKernel& b) { return a.kappa_ == b.kappa_; }

 private:
  double kappa_;
  double log_peak_;
};

/// vMF density (per steradian) of omega around mean direction mu.
inline double vmf_pdf(const VmfKernel& kernel, const UnitDir& mu, const UnitDir& omega) {
  return kernel.pdf_cos(dot(mu.vec(), omega.vec()));
}

inline double vmf_pdf(const VmfKernel& kernel, const Vec3& mu, const Vec3& omega) {
  if (!is_unit(mu) || !is_unit(omega)) throw DomainError("vmf_pdf expects unit vectors");
  return kernel.pdf_cos(dot(mu, omega));
}

/// Orthonormal basis (t, b) completing n.
inline std::pair<Vec3, Vec3> orthonormal_frame(const Vec3& n) {
  // Duff et al. branchless construction.
  const double sign = std::copysign(1.0, n.z);
  const double a = -1.0 / (sign + n.z);
  const double b = n.x * n.y * a;
  return {{1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x}, {b, sign + n.y * n.y * a, -n.y}};
}

/// Draws one direction from vMF(mu, kappa). kappa = 0 is uniform,
/// kappa = +inf returns mu.
template <typename Rng>
Vec3 sample_vmf(const Vec3& mu, double kappa, Rng& rng) {
  if (std::isinf(kappa)) return mu;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double u = uni(rng);
  const double phi = 2.0 * kPi * uni(rng);
  double w;
  if (kappa == 0.0) {
    w = 1.0 - 2.0 * u;
  } else {
    w = 1.0 + std::log(u + (1.0 - u) * std::exp(-2.0 * kappa)) / kappa;
    w = std::clamp(w, -1.0, 1.0);
  }
  const double s = std::sqrt(std::max(0.0, 1.0 - w * w));
  const auto [t, b] = orthonormal_frame(mu);
  return normalized(w * mu + s * std::cos(phi) * t + s * std::sin(phi) * b);
}

// ---------------------------------------------------------------------------
// Sphere sampling

/// n seeded uniform directions (normalized Gaussian triples).
inline std::vector<Vec3> sample_sphere_uniform(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DomainError("sample_sphere_uniform needs n >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Vec3> out;
  out.reserve(n);
  while (out.size() < n) {
    const Vec3 v{gauss(rng), gauss(rng), gauss(rng)};
    const double len = norm(v);
    if (len < 1e-12) continue;
    out.push_back(v / len);
  }
  return out;
}

/// Fibonacci lattice: n nearly equal-area points, each carrying weight 4 pi / n.
inline std::vector<Vec3> fibonacci_sphere(std::size_t n) {
  if (n == 0) throw DomainError("fibonacci_sphere needs n >= 1");
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / static_cast<double>(n);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(i);
    out.push_back({r * std::cos(phi), r * std::sin(phi), z});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Probes

/// Kernel density estimate of gaze directions around one position. The
/// density is the mean of per-ray vMF kernels, so it integrates to one.
class GazeProbe {
 public:
  GazeProbe(const Vec3& center, std::vector<Vec3> rays, VmfKernel kernel)
      : center_(center), rays_(std::move(rays)), kernel_(kernel) {
    if (rays_.empty()) throw DomainError("a gaze probe needs at least one ray");
    for (const auto& r : rays_)
      if (!is_unit(r)) throw DomainError("gaze probe rays must be unit vectors");
  }

  const Vec3& center() const { return center_; }
  const std::vector<Vec3>& rays() const { return rays_; }
  const VmfKernel& kernel() const { return kernel_; }

  double density(const Vec3& omega) const {
    const double k = kernel_.kappa();
    double acc = 0.0;
    for (const auto& mu : rays_) acc += std::exp(k * (std::min(dot(mu, omega), 1.0) - 1.0));
    return kernel_.peak() * acc / static_cast<double>(rays_.size());
  }

 private:
  Vec3 center_;
  std::vector<Vec3> rays_;
  VmfKernel kernel_;
};

inline double probe_density(const GazeProbe& probe, const UnitDir& omega) { return probe.density(omega.vec()); }

inline double probe_density(const GazeProbe& probe, const Vec3& omega) {
  if (!is_unit(omega)) throw DomainError("probe_density expects a unit direction");
  return probe.density(omega);
}

enum class PlacementKind { Grid, Random };

struct ProbePlacement {
  PlacementKind kind = PlacementKind::Random;
  Aabb volume{{-1, -1, -1}, {1, 1, 1}};
  std::array<int, 3> grid{4, 4, 4};  // Grid only
  std::size_t count = 64;            // Random only: number of non-empty probes wanted
  std::size_t attempts_per_probe = 64;
};

struct ProbeParams {
  double radius = 0.1;     // meters
  std::size_t cap = 1024;  // max rays per probe
  double kappa = 50.0;
};

/// What produced a ProbeSet; serialized with it.
struct PlacementRecord {
  ProbePlacement placement;
  ProbeParams params;
  std::uint64_t seed = 0;
};

struct ProbeSet {
  std::vector<GazeProbe> probes;
  PlacementRecord record;

  std::size_t size() const { return probes.size(); }
  bool empty() const { return probes.empty(); }
};

namespace detail {

/// Hash grid over ray origins with cell size equal to the query radius.
class RayIndex {
 public:
  RayIndex(std::span<const GazeRay> rays, double cell) : rays_(rays), cell_(cell) {
    for (std::uint32_t i = 0; i < rays.size(); ++i) cells_[key(cell_of(rays[i].position))].push_back(i);
  }

  /// Indices (ascending) of rays whose origin lies within `radius` of c.
  std::vector<std::uint32_t> within(const Vec3& c, double radius) const {
    std::vector<std::uint32_t> out;
    const auto [cx, cy, cz] = cell_of(c);
    const double r2 = radius * radius;
    for (std::int64_t dz = -1; dz <= 1; ++dz)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
          const auto it = cells_.find(key({cx + dx, cy + dy, cz + dz}));
          if (it == cells_.end()) continue;
          for (std::uint32_t i : it->second) {
            const Vec3 d = rays_[i].position - c;
            if (dot(d, d) <= r2) out.push_back(i);
          }
        }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  using Cell = std::tuple<std::int64_t, std::int64_t, std::int64_t>;

  Cell cell_of(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x / cell_)), static_cast<std::int64_t>(std::floor(p.y / cell_)),
            static_cast<std::int64_t>(std::floor(p.z / cell_))};
  }

  static std::uint64_t key(const Cell& c) {
    const auto [x, y, z] = c;
    std::uint64_t h = splitmix64(static_cast<std::uint64_t>(x));
    h = splitmix64(h ^ static_cast<std::uint64_t>(y));
    return splitmix64(h ^ static_cast<std::uint64_t>(z));
  }

  std::span<const GazeRay> rays_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
};

/// Probe from the rays within radius; over-cap sets are reduced to a
/// seeded uniform subsample without replacement, kept in input order.
inline std::optional<GazeProbe> make_probe(const RayIndex& index, std::span<const GazeRay> rays, const Vec3& center,
                                           const ProbeParams& params, std::uint64_t seed) {
  std::vector<std::uint32_t> ids = index.within(center, params.radius);
  if (ids.empty()) return std::nullopt;
  if (ids.size() > params.cap) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < params.cap; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, ids.size() - 1);
      std::swap(ids[i], ids[pick(rng)]);
    }
    ids.resize(params.cap);
    std::sort(ids.begin(), ids.end());
  }
  std::vector<Vec3> dirs;
  dirs.reserve(ids.size());
  for (auto i : ids) dirs.push_back(rays[i].direction.vec());
  return GazeProbe(center, std::move(dirs), VmfKernel(params.kappa));
}

}  // namespace detail

/// Places probe centers (grid or seeded random) and aggregates the rays
/// within `radius` of each. Centers without any ray are dropped; random
/// placement keeps drawing until `count` non-empty probes exist or the
/// attempt budget runs out.
inline ProbeSet build_probes(std::span<const GazeRay> rays, const ProbePlacement& placement, const ProbeParams& params,
                             std::uint64_t seed) {
  if (!(params.radius > 0.0) || !std::isfinite(params.radius)) throw DomainError("probe radius must be positive");
  if (params.cap < 1) throw DomainError("probe cap must be at least 1");
  if (!placement.volume.valid()) throw ConfigError("probe placement volume is invalid");
  VmfKernel check(params.kappa);
  (void)check;

  ProbeSet set;
  set.record = {placement, params, seed};
  if (rays.empty()) return set;

  const detail::RayIndex index(rays, params.radius);
  const Aabb& vol = placement.volume;
  std::uint64_t stream = 0;

  if (placement.kind == PlacementKind::Grid) {
    const auto [nx, ny, nz] = placement.grid;
    if (nx < 1 || ny < 1 || nz < 1) throw ConfigError("probe grid needs at least one cell per axis");
    const Vec3 ext = vol.extent();
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          const Vec3 c{vol.lo.x + (i + 0.5) * ext.x / nx, vol.lo.y + (j + 0.5) * ext.y / ny,
                       vol.lo.z + (k + 0.5) * ext.z / nz};
          if (auto p = detail::make_probe(index, rays, c, params, derive_seed(seed, stream++)))
            set.probes.push_back(std::move(*p));
        }
    return set;
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(vol.lo.x, vol.hi.x), uy(vol.lo.y, vol.hi.y), uz(vol.lo.z, vol.hi.z);
  std::set<std::tuple<double, double, double>> seen;
  const std::size_t budget = placement.count * std::max<std::size_t>(placement.attempts_per_probe, 1);
  for (std::size_t attempt = 0; attempt < budget && set.probes.size() < placement.count; ++attempt) {
    const Vec3 c{ux(rng), uy(rng), uz(rng)};
    if (!seen.insert({c.x, c.y, c.z}).second) continue;
    if (auto p = detail::make_probe(index, rays, c, params, derive_seed(seed, stream++)))
      set.probes.push_back(std::move(*p));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Training samples

/// One supervision tuple: probe position, direction, ground-truth density
/// g, and the distance along `direction` to the surface the observer sees
/// (1 scene unit unless a scene depth was attached).
struct GazeSample {
  Vec3 position;
  Vec3 direction;
  double g = 0.0;
  double surface_distance = 1.0;
};

/// n_per_probe uniform directions per probe, each labelled with the probe's
/// KDE density. Probe i draws from stream derive_seed(seed, i).
inline std::vector<GazeSample> make_training_samples(const ProbeSet& probes, std::size_t n_per_probe,
                                                     std::uint64_t seed) {
  if (probes.empty()) throw DomainError("make_training_samples needs a non-empty probe set");
  std::vector<GazeSample> out;
  out.reserve(probes.size() * n_per_probe);
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const GazeProbe& probe = probes.probes[i];
    for (const Vec3& w : sample_sphere_uniform(n_per_probe, derive_seed(seed, i)))
      out.push_back({probe.center(), w, probe.density(w), 1.0});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic gaze

struct Attractor {
  Vec3 point;
  double weight = 1.0;
};

/// Synthetic gaze rays: origins uniform in `observer_volume` (outside any
/// geometry of `scene`), targets drawn by attractor weight, directions
/// perturbed by vMF noise with concentration `noise_kappa` (0 = uniform,
/// +inf = exact). Optionally reports the attractor chosen for each ray.
inline std::vector<GazeRay> synth_gaze(const SceneField& scene, std::span<const Attractor> attractors, std::size_t n,
                                       const Aabb& observer_volume, double noise_kappa, std::uint64_t seed,
                                       std::vector<std::size_t>* assignment = nullptr) {
  if (n == 0) throw DomainError("synth_gaze needs n >= 1");
  if (attractors.empty()) throw DomainError("synth_gaze needs at least one attractor");
  if (!observer_volume.valid()) throw ConfigError("observer volume is invalid");
  if (!(noise_kappa >= 0.0)) throw DomainError("noise kappa must be >= 0");
  std::vector<double> weights;
  double total = 0.0;
  for (const auto& a : attractors) {
    if (!(a.weight >= 0.0) || !std::isfinite(a.weight) || !a.point.finite())
      throw DomainError("attractor weights must be finite and >= 0");
    weights.push_back(a.weight);
    total += a.weight;
  }
  if (!(total > 0.0)) throw DomainError("attractor weights must not all be zero");

  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  const Aabb& v = observer_volume;
  std::uniform_real_distribution<double> ux(v.lo.x, v.hi.x), uy(v.lo.y, v.hi.y), uz(v.lo.z, v.hi.z);

  std::vector<GazeRay> out;
  out.reserve(n);
  if (assignment) assignment->clear();
  constexpr int kMaxRedraws = 10000;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t a = pick(rng);
    Vec3 origin;
    int tries = 0;
    for (;; ++tries) {
      if (tries >= kMaxRedraws) throw ConfigError("synth_gaze: observer volume is fully occupied by geometry");
      origin = {ux(rng), uy(rng), uz(rng)};
      if (scene.density(origin) > 0.0) continue;
      if (distance(origin, attractors[a].point) < 1e-9) continue;
      break;
    }
    const Vec3 mean = normalized(attractors[a].point - origin);
    out.push_back({origin, UnitDir::normalize(sample_vmf(mean, noise_kappa, rng))});
    if (assignment) assignment->push_back(a);
  }
  return out;
}

}  // namespace nerg
