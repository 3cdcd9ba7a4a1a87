// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0
//
// Adam training on probe samples, the finite-difference gradient check, and
// held-out evaluation.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "nerg/field.hpp"
#include "nerg/losses.hpp"
#include "nerg/model.hpp"
#include "nerg/probes.hpp"

namespace nerg {

struct TrainConfig {
  int epochs = 50;
  double lr = 1e-3;
  std::size_t batch_size = 1024;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double adam_eps = 1e-15;
  std::uint64_t seed = 0;
  std::size_t train_probes = 4096;
  std::size_t test_probes = 512;
  std::size_t samples_per_probe = 1024;

  void validate() const {
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be > 0");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam betas must be in [0, 1)");
    if (!(adam_eps >= 0.0)) throw ConfigError("adam epsilon must be >= 0");
    if (samples_per_probe < 1) throw ConfigError("train.samples_per_probe must be >= 1");
  }
};

struct LossReport {
  double kld = 0.0;
  double cc = 0.0;
  double mae = 0.0;
  double total = 0.0;
  std::size_t count = 0;
};

// ---------------------------------------------------------------------------
// Surface location

/// Distance along a gaze ray from its origin to the surface it sees.
using SurfaceLocator = std::function<double(const Vec3& origin, const Vec3& direction)>;

/// Expected termination depth of the scene along the ray.
inline SurfaceLocator make_depth_locator(const SceneField& scene, const IntegratorConfig& integ) {
  integ.validate();
  return [&scene, integ](const Vec3& origin, const Vec3& direction) {
    return render_depth(scene, Ray{origin, UnitDir::normalize(direction)}, integ).depth;
  };
}

inline void attach_surface_distances(std::span<GazeSample> samples, const SurfaceLocator& locate) {
  for (auto& s : samples) {
    const double t = locate(s.position, s.direction);
    if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("surface locator returned a non-positive distance");
    s.surface_distance = t;
  }
}

inline Vec3 surface_point(const GazeSample& s) { return s.position + s.surface_distance * s.direction; }

// ---------------------------------------------------------------------------
// Batched loss and gradient

enum class LossKind { Total, Mae };

struct BatchBuffers {
  NergModel::Matrix x_emit, x_capture;
  std::vector<double> y, dg;
  BatchForward fw;
};

inline void prepare_batch(const NergModel& model, std::span<const GazeSample> batch, BatchBuffers& buf) {
  std::vector<Vec3> p_od(batch.size()), p_o(batch.size());
  buf.y.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    p_od[i] = surface_point(batch[i]);
    p_o[i] = batch[i].position;
    buf.y[i] = batch[i].g;
  }
  model.build_inputs(p_od, p_o, buf.x_emit, buf.x_capture);
}

/// Loss of the prepared batch; with a non-empty grad, also accumulates the
/// parameter gradient (grad is overwritten).
inline LossTerms batch_loss(const NergModel& model, BatchBuffers& buf, std::span<double> grad, LossKind kind = LossKind::Total) {
  model.forward(buf.x_emit, buf.x_capture, buf.fw);
  const std::span<const double> yhat(buf.fw.g.data(), static_cast<std::size_t>(buf.fw.g.size()));
  buf.dg.assign(buf.y.size(), 0.0);
  LossTerms t;
  if (kind == LossKind::Mae) {
    t.mae = detail::mae_impl(buf.y, yhat, grad.empty() ? std::span<double>{} : std::span<double>(buf.dg), 1.0);
    t.total = t.mae;
  } else if (grad.empty()) {
    t = loss_terms(buf.y, yhat);
  } else {
    t = loss_terms_with_gradient(buf.y, yhat, buf.dg);
  }
  if (!grad.empty()) {
    std::fill(grad.begin(), grad.end(), 0.0);
    model.backward(buf.fw, buf.dg, grad);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Gradient check

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;  // steps that flipped a ReLU or |.| branch
  double grad_norm = 0.0;
};

inline constexpr double kGradCheckStep = 1e-4;
inline constexpr double kGradCheckFloor = 1e-6;

/// Analytic gradient vs central differences (h = 1e-4) for every parameter.
/// Relative error is |a - f| / max(|a|, |f|, 1e-6). Parameters whose +/-h
/// step changes a ReLU mask or the sign of a residual are skipped and
/// counted, since the loss is not differentiable across those steps.
inline GradCheckReport grad_check(const NergModel& model, std::span<const GazeSample> batch, LossKind kind = LossKind::Total) {
  if (batch.empty()) throw DomainError("grad_check needs a non-empty batch");
  NergModel probe = model;
  BatchBuffers buf;
  prepare_batch(probe, batch, buf);
  ParamVector analytic(probe.param_count());
  batch_loss(probe, buf, analytic, kind);
  const std::vector<bool> base_mask = probe.relu_mask(buf.fw);
  auto residual_signs = [&] {
    std::vector<int> s(buf.y.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double d = buf.fw.g[static_cast<Eigen::Index>(i)] - buf.y[i];
      s[i] = (d > 0) - (d < 0);
    }
    return s;
  };
  const std::vector<int> base_signs = residual_signs();

  GradCheckReport rep;
  double sq = 0.0;
  for (double a : analytic) sq += a * a;
  rep.grad_norm = std::sqrt(sq);
  auto params = probe.params();
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = params[k];
    bool kink = false;
    double f[2];
    for (int side = 0; side < 2; ++side) {
      params[k] = saved + (side == 0 ? kGradCheckStep : -kGradCheckStep);
      f[side] = batch_loss(probe, buf, {}, kind).total;
      if (probe.relu_mask(buf.fw) != base_mask || residual_signs() != base_signs) kink = true;
    }
    params[k] = saved;
    if (kink) {
      ++rep.skipped_kinks;
      continue;
    }
    const double fd = (f[0] - f[1]) / (2.0 * kGradCheckStep);
    const double denom = std::max({std::abs(analytic[k]), std::abs(fd), kGradCheckFloor});
    rep.max_rel_error = std::max(rep.max_rel_error, std::abs(analytic[k] - fd) / denom);
    ++rep.checked;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Training

class Adam {
 public:
  Adam(std::size_t n, const TrainConfig& cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      params[i] -= cfg_.lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.adam_eps);
    }
  }

  std::uint64_t steps() const { return t_; }

 private:
  TrainConfig cfg_;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

struct TrainResult {
  NergModel model;
  std::vector<LossReport> history;  // one entry per completed epoch
  bool diverged = false;
};

/// Produces the training samples for a given epoch (0-based).
using EpochSampler = std::function<std::vector<GazeSample>(int epoch)>;
using EpochCallback = std::function<void(int epoch, const LossReport&)>;

/// Mini-batch Adam on total_loss. Each epoch shuffles its samples with
/// stream derive_seed(cfg.seed, epoch); KLD and CC are computed over each
/// batch. A non-finite loss or parameter stops training and returns the
/// parameters from the end of the last completed epoch.
inline TrainResult train(NergModel model, const EpochSampler& sampler, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  cfg.validate();
  TrainResult result{model, {}, false};
  Adam adam(model.param_count(), cfg);
  ParamVector grad(model.param_count());
  std::vector<double> last_good(model.params().begin(), model.params().end());
  BatchBuffers buf;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<GazeSample> samples = sampler(epoch);
    if (samples.empty()) throw DomainError("train needs a non-empty sample set");
    std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = samples.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
      std::swap(samples[i], samples[j]);
    }
    LossReport rep;
    bool bad = false;
    for (std::size_t start = 0; start < samples.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, samples.size() - start);
      prepare_batch(model, std::span<const GazeSample>(samples).subspan(start, n), buf);
      const LossTerms t = batch_loss(model, buf, grad);
      if (!std::isfinite(t.total)) {
        bad = true;
        break;
      }
      const double w = static_cast<double>(n);
      rep.kld += w * t.kld;
      rep.cc += w * t.cc;
      rep.mae += w * t.mae;
      rep.total += w * t.total;
      rep.count += n;
      adam.step(model.params(), grad);
    }
    for (double p : model.params())
      if (!std::isfinite(p)) bad = true;
    if (bad) {
      std::copy(last_good.begin(), last_good.end(), model.params().begin());
      result.diverged = true;
      break;
    }
    const double n = static_cast<double>(rep.count);
    rep.kld /= n;
    rep.cc /= n;
    rep.mae /= n;
    rep.total /= n;
    result.history.push_back(rep);
    std::copy(model.params().begin(), model.params().end(), last_good.begin());
    if (on_epoch) on_epoch(epoch, rep);
  }
  result.model = std::move(model);
  return result;
}

inline TrainResult train(NergModel model, std::span<const GazeSample> samples, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  if (samples.empty()) throw DomainError("train needs a non-empty sample set");
  std::vector<GazeSample> fixed(samples.begin(), samples.end());
  return train(std::move(model), [&fixed](int) { return fixed; }, cfg, on_epoch);
}

// ---------------------------------------------------------------------------
// Evaluation

/// Predicts g for the samples of one probe; out has one slot per sample.
using ProbePredictor = std::function<void(const GazeProbe&, std::span<const GazeSample>, std::span<double>)>;

inline ProbePredictor model_predictor(const NergModel& model) {
  return [&model](const GazeProbe&, std::span<const GazeSample> samples, std::span<double> out) {
    std::vector<Vec3> p_od(samples.size()), p_o(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      p_od[i] = surface_point(samples[i]);
      p_o[i] = samples[i].position;
    }
    model.predict_batch(p_od, p_o, out);
  };
}

/// The probe's own KDE; scores perfectly against itself.
inline ProbePredictor ground_truth_predictor() {
  return [](const GazeProbe& probe, std::span<const GazeSample> samples, std::span<double> out) {
    for (std::size_t i = 0; i < samples.size(); ++i) out[i] = probe.density(samples[i].direction);
  };
}

/// n_dirs uniform directions per probe (stream derive_seed(seed, i)),
/// metrics per probe, then averaged over probes. Without a locator the
/// surface point sits 1 scene unit along each direction.
inline LossReport evaluate(const ProbePredictor& predict, const ProbeSet& probes, std::size_t n_dirs, std::uint64_t seed,
                           const SurfaceLocator& locator = {}) {
  if (probes.empty()) throw DomainError("evaluate needs a non-empty probe set");
  if (n_dirs < 2) throw DomainError("evaluate needs n_dirs >= 2");
  LossReport rep;
  std::vector<GazeSample> samples;
  std::vector<double> y, yhat;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const GazeProbe& probe = probes.probes[i];
    samples.clear();
    y.clear();
    for (const Vec3& w : sample_sphere_uniform(n_dirs, derive_seed(seed, i))) {
      samples.push_back({probe.center(), w, probe.density(w), 1.0});
      y.push_back(samples.back().g);
    }
    if (locator) attach_surface_distances(samples, locator);
    yhat.assign(samples.size(), 0.0);
    predict(probe, samples, yhat);
    const LossTerms t = loss_terms(y, yhat);
    rep.kld += t.kld;
    rep.cc += t.cc;
    rep.mae += t.mae;
    rep.total += t.total;
    rep.count += samples.size();
  }
  const double n = static_cast<double>(probes.size());
  rep.kld /= n;
  rep.cc /= n;
  rep.mae /= n;
  rep.total /= n;
  return rep;
}

inline LossReport evaluate(const NergModel& model, const ProbeSet& probes, std::size_t n_dirs, std::uint64_t seed,
                           const SurfaceLocator& locator = {}) {
  return evaluate(model_predictor(model), probes, n_dirs, seed, locator);
}

}  // namespace nerg
