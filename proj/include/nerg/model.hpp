// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0
//
// Gaze network: frequency encoding, a shared MLP trunk, and two scalar
// heads. The emit head (softplus) scores a surface point seen from a
// direction; the capture head (sigmoid) scores an observer looking along a
// direction. Parameters live in one flat double buffer so optimizers and
// checkpoints can treat them uniformly.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "nerg/core.hpp"
#include "nerg/error.hpp"

namespace nerg {

enum class Variant { Emit, Capture, EmitCapture };
enum class Activation { Relu, Softplus, Tanh };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Emit: return "emit";
    case Variant::Capture: return "capture";
    case Variant::EmitCapture: return "emit-capture";
  }
  return "?";
}

inline Variant variant_from_string(std::string_view s) {
  if (s == "emit") return Variant::Emit;
  if (s == "capture") return Variant::Capture;
  if (s == "emit-capture") return Variant::EmitCapture;
  throw ConfigError("unknown variant '" + std::string(s) + "' (expected emit, capture or emit-capture)");
}

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Softplus: return "softplus";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::Relu;
  if (s == "softplus") return Activation::Softplus;
  if (s == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation '" + std::string(s) + "' (expected relu, softplus or tanh)");
}

inline bool uses_emit(Variant v) { return v != Variant::Capture; }
inline bool uses_capture(Variant v) { return v != Variant::Emit; }

// ---------------------------------------------------------------------------
// Encoding

struct EncodingConfig {
  int l_pos = 10;
  int l_dir = 4;
  bool include_raw = true;

  std::size_t position_size() const { return 3 * ((include_raw ? 1 : 0) + 2 * static_cast<std::size_t>(l_pos)); }
  std::size_t direction_size() const { return 3 * ((include_raw ? 1 : 0) + 2 * static_cast<std::size_t>(l_dir)); }
  std::size_t size() const { return position_size() + direction_size(); }

  void validate() const {
    if (l_pos < 0 || l_dir < 0) throw ConfigError("encoding frequency bands must be >= 0");
    if (l_pos > 30 || l_dir > 30) throw ConfigError("encoding frequency bands must be <= 30");
    if (size() == 0) throw ConfigError("encoding produces no features");
  }

  friend bool operator==(const EncodingConfig&, const EncodingConfig&) = default;
};

namespace detail {

inline double* encode_block(const Vec3& v, int bands, bool raw, double* out) {
  if (raw)
    for (int a = 0; a < 3; ++a) *out++ = v[a];
  for (int k = 0; k < bands; ++k) {
    const double f = std::ldexp(kPi, k);
    for (int a = 0; a < 3; ++a) {
      *out++ = std::sin(f * v[a]);
      *out++ = std::cos(f * v[a]);
    }
  }
  return out;
}

}  // namespace detail

/// Writes cfg.size() features: [p, sin(2^k pi p), cos(2^k pi p)]_k followed
/// by the same for dir. `p` is expected in [-1, 1]^3.
inline void encode_into(const Vec3& p, const Vec3& dir, const EncodingConfig& cfg, double* out) {
  out = detail::encode_block(p, cfg.l_pos, cfg.include_raw, out);
  detail::encode_block(dir, cfg.l_dir, cfg.include_raw, out);
}

inline std::vector<double> encode(const Vec3& p, const Vec3& dir, const EncodingConfig& cfg) {
  std::vector<double> out(cfg.size());
  encode_into(p, dir, cfg, out.data());
  return out;
}

// ---------------------------------------------------------------------------
// Model

struct ModelConfig {
  Variant variant = Variant::EmitCapture;
  int depth = 4;  // hidden layers; 0 makes the heads linear in the features
  int width = 128;
  Activation activation = Activation::Relu;
  EncodingConfig encoding;
  Aabb bounds{{-1, -1, -1}, {1, 1, 1}};  // positions are mapped from here to [-1, 1]^3
  bool zero_init_heads = false;

  void validate() const {
    encoding.validate();
    if (depth < 0 || depth > 64) throw ConfigError("model depth must be in [0, 64]");
    if (width < 1 || width > 4096) throw ConfigError("model width must be in [1, 4096]");
    if (!bounds.valid()) throw ConfigError("model bounds are invalid");
    for (int a = 0; a < 3; ++a)
      if (!(bounds.hi[a] > bounds.lo[a])) throw ConfigError("model bounds must have positive extent");
  }
};

/// Parameter and gradient storage. A fixed alignment keeps Eigen's
/// vectorized kernels on the same code path in every run, so training is
/// bit-reproducible.
using ParamVector = std::vector<double, Eigen::aligned_allocator<double>>;

struct LayerShape {
  std::string name;
  int rows = 0;  // outputs
  int cols = 0;  // inputs
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
  std::size_t count() const { return static_cast<std::size_t>(rows) * cols + rows; }
};

inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// r_o: unit direction from the observer p_o to the surface point p_od.
inline Vec3 observer_direction(const Vec3& p_od, const Vec3& p_o) {
  const Vec3 d = p_od - p_o;
  const double n = norm(d);
  if (!(n > 1e-12) || !std::isfinite(n)) throw DomainError("surface point and observer coincide");
  return d / n;
}

/// Per-pass activations kept for backpropagation. a[0] is the encoded input.
struct TrunkCache {
  std::vector<Eigen::MatrixXd> z;
  std::vector<Eigen::MatrixXd> a;
};

struct BatchForward {
  TrunkCache emit, capture;
  Eigen::RowVectorXd s_e, s_c;  // head pre-activations
  Eigen::RowVectorXd e, c;      // softplus(s_e), sigmoid(s_c)
  Eigen::RowVectorXd g;
};

class NergModel {
 public:
  using Matrix = Eigen::MatrixXd;
  using MatMap = Eigen::Map<Matrix>;
  using ConstMatMap = Eigen::Map<const Matrix>;
  using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

  NergModel() : NergModel(ModelConfig{}, 0) {}

  /// Seeded He-uniform weights, zero biases.
  NergModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
    cfg_.validate();
    build_layout();
    params_.assign(param_count_, 0.0);
    std::mt19937_64 rng(seed);
    for (const auto& layer : layers_) {
      const bool head = layer.name == "head_e" || layer.name == "head_c";
      if (head && cfg_.zero_init_heads) continue;
      const double bound = std::sqrt(6.0 / layer.cols);
      std::uniform_real_distribution<double> u(-bound, bound);
      for (std::size_t i = 0; i < static_cast<std::size_t>(layer.rows) * layer.cols; ++i)
        params_[layer.weight_offset + i] = u(rng);
    }
  }

  /// Rebuilds a model around existing parameters (checkpoint loading).
  NergModel(const ModelConfig& cfg, std::uint64_t seed, std::vector<double> params) : cfg_(cfg), seed_(seed) {
    cfg_.validate();
    build_layout();
    if (params.size() != param_count_) throw ConfigError("parameter count does not match model layout");
    params_.assign(params.begin(), params.end());
  }

  const ModelConfig& config() const { return cfg_; }
  Variant variant() const { return cfg_.variant; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<LayerShape>& layers() const { return layers_; }
  std::size_t param_count() const { return param_count_; }
  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }
  std::size_t feature_size() const { return cfg_.encoding.size(); }

  const LayerShape& layer(std::string_view name) const {
    for (const auto& l : layers_)
      if (l.name == name) return l;
    throw ConfigError("model has no layer '" + std::string(name) + "'");
  }

  Vec3 normalize_position(const Vec3& p) const {
    const Aabb& b = cfg_.bounds;
    Vec3 out;
    for (int a = 0; a < 3; ++a) out[a] = 2.0 * (p[a] - b.lo[a]) / (b.hi[a] - b.lo[a]) - 1.0;
    return out;
  }

  void encode_column(const Vec3& p, const Vec3& dir, double* out) const {
    encode_into(normalize_position(p), dir, cfg_.encoding, out);
  }

  // --- single-point inference ---

  /// Emit signal at surface point p_od seen along dir (dir points from the
  /// surface back toward the observer, i.e. -r_o).
  double forward_emit(const Vec3& p_od, const UnitDir& dir) const {
    if (!uses_emit(cfg_.variant)) throw ConfigError("capture-only model has no emit head");
    return softplus(head_pre(layer("head_e"), p_od, dir.vec()));
  }

  /// Capture probability for an observer at p_o looking along dir.
  double forward_capture(const Vec3& p_o, const UnitDir& dir) const {
    if (!uses_capture(cfg_.variant)) throw ConfigError("emit-only model has no capture head");
    return sigmoid(head_pre(layer("head_c"), p_o, dir.vec()));
  }

  /// Gaze density at surface point p_od for an observer at p_o.
  double predict_gaze(const Vec3& p_od, const Vec3& p_o) const {
    const Vec3 r = observer_direction(p_od, p_o);
    double g = 1.0;
    if (uses_emit(cfg_.variant)) g *= softplus(head_pre(layer("head_e"), p_od, -r));
    if (uses_capture(cfg_.variant)) g *= sigmoid(head_pre(layer("head_c"), p_o, r));
    return g;
  }

  // --- batched inference and training ---

  /// Encoded emit and capture inputs, one column per query.
  void build_inputs(std::span<const Vec3> p_od, std::span<const Vec3> p_o, Matrix& x_emit, Matrix& x_capture) const {
    if (p_od.size() != p_o.size()) throw DomainError("batch inputs differ in length");
    const auto n = static_cast<Eigen::Index>(p_od.size());
    const auto f = static_cast<Eigen::Index>(feature_size());
    if (uses_emit(cfg_.variant)) x_emit.resize(f, n);
    if (uses_capture(cfg_.variant)) x_capture.resize(f, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec3 r = observer_direction(p_od[i], p_o[i]);
      if (uses_emit(cfg_.variant)) encode_column(p_od[i], -r, x_emit.col(i).data());
      if (uses_capture(cfg_.variant)) encode_column(p_o[i], r, x_capture.col(i).data());
    }
  }

  void forward(const Matrix& x_emit, const Matrix& x_capture, BatchForward& fw) const {
    if (uses_emit(cfg_.variant)) {
      const Matrix& h = trunk_forward(x_emit, fw.emit);
      fw.s_e = head_apply(layer("head_e"), h);
      fw.e = fw.s_e.unaryExpr([](double z) { return softplus(z); });
    }
    if (uses_capture(cfg_.variant)) {
      const Matrix& h = trunk_forward(x_capture, fw.capture);
      fw.s_c = head_apply(layer("head_c"), h);
      fw.c = fw.s_c.unaryExpr([](double z) { return sigmoid(z); });
    }
    switch (cfg_.variant) {
      case Variant::Emit: fw.g = fw.e; break;
      case Variant::Capture: fw.g = fw.c; break;
      case Variant::EmitCapture: fw.g = fw.e.cwiseProduct(fw.c); break;
    }
  }

  /// Batched predict_gaze; same arithmetic as the single-point path up to
  /// matrix-product summation order.
  void predict_batch(std::span<const Vec3> p_od, std::span<const Vec3> p_o, std::span<double> out) const {
    if (out.size() != p_od.size()) throw DomainError("output buffer has the wrong length");
    if (p_od.empty()) return;
    Matrix xe, xc;
    build_inputs(p_od, p_o, xe, xc);
    BatchForward fw;
    forward(xe, xc, fw);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fw.g[static_cast<Eigen::Index>(i)];
  }

  /// Accumulates dL/dtheta into grad given dL/dg per batch column.
  void backward(const BatchForward& fw, std::span<const double> dg, std::span<double> grad) const {
    if (grad.size() != param_count_) throw DomainError("gradient buffer has the wrong length");
    const Eigen::Map<const Eigen::RowVectorXd> dgv(dg.data(), static_cast<Eigen::Index>(dg.size()));
    if (uses_emit(cfg_.variant)) {
      Eigen::RowVectorXd ds = dgv.cwiseProduct(fw.s_e.unaryExpr([](double z) { return sigmoid(z); }));
      if (cfg_.variant == Variant::EmitCapture) ds = ds.cwiseProduct(fw.c);
      head_and_trunk_backward(layer("head_e"), fw.emit, ds, grad);
    }
    if (uses_capture(cfg_.variant)) {
      Eigen::RowVectorXd ds = dgv.cwiseProduct(fw.c.cwiseProduct((1.0 - fw.c.array()).matrix()));
      if (cfg_.variant == Variant::EmitCapture) ds = ds.cwiseProduct(fw.e);
      head_and_trunk_backward(layer("head_c"), fw.capture, ds, grad);
    }
  }

  /// Sign pattern of every ReLU pre-activation in a forward pass; used to
  /// detect finite-difference steps that cross a kink.
  std::vector<bool> relu_mask(const BatchForward& fw) const {
    std::vector<bool> mask;
    if (cfg_.activation != Activation::Relu) return mask;
    for (const TrunkCache* c : {&fw.emit, &fw.capture})
      for (const auto& z : c->z)
        for (Eigen::Index i = 0; i < z.size(); ++i) mask.push_back(z.data()[i] > 0.0);
    return mask;
  }

 private:
  void build_layout() {
    layers_.clear();
    std::size_t off = 0;
    auto add = [&](std::string name, int rows, int cols) {
      LayerShape l{std::move(name), rows, cols, off, off + static_cast<std::size_t>(rows) * cols};
      off += l.count();
      layers_.push_back(std::move(l));
    };
    int in = static_cast<int>(feature_size());
    for (int i = 0; i < cfg_.depth; ++i) {
      add("trunk_" + std::to_string(i), cfg_.width, in);
      in = cfg_.width;
    }
    if (uses_emit(cfg_.variant)) add("head_e", 1, in);
    if (uses_capture(cfg_.variant)) add("head_c", 1, in);
    param_count_ = off;
  }

  ConstMatMap weights(const LayerShape& l) const { return {params_.data() + l.weight_offset, l.rows, l.cols}; }
  ConstVecMap bias(const LayerShape& l) const { return {params_.data() + l.bias_offset, l.rows}; }

  double activate(double z) const {
    switch (cfg_.activation) {
      case Activation::Relu: return z > 0.0 ? z : 0.0;
      case Activation::Softplus: return softplus(z);
      case Activation::Tanh: return std::tanh(z);
    }
    return z;
  }

  double activate_grad(double z, double a) const {
    switch (cfg_.activation) {
      case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
      case Activation::Softplus: return sigmoid(z);
      case Activation::Tanh: return 1.0 - a * a;
    }
    return 1.0;
  }

  const Matrix& trunk_forward(const Matrix& x, TrunkCache& cache) const {
    cache.z.resize(static_cast<std::size_t>(cfg_.depth));
    cache.a.resize(static_cast<std::size_t>(cfg_.depth) + 1);
    cache.a[0] = x;
    for (int i = 0; i < cfg_.depth; ++i) {
      const LayerShape& l = layers_[static_cast<std::size_t>(i)];
      Matrix& z = cache.z[static_cast<std::size_t>(i)];
      z.noalias() = weights(l) * cache.a[static_cast<std::size_t>(i)];
      z.colwise() += bias(l);
      cache.a[static_cast<std::size_t>(i) + 1] = z.unaryExpr([this](double v) { return activate(v); });
    }
    return cache.a.back();
  }

  Eigen::RowVectorXd head_apply(const LayerShape& l, const Matrix& h) const {
    Eigen::RowVectorXd s = weights(l) * h;
    s.array() += params_[l.bias_offset];
    return s;
  }

  double head_pre(const LayerShape& head, const Vec3& p, const Vec3& dir) const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(feature_size()));
    encode_column(p, dir, x.data());
    for (int i = 0; i < cfg_.depth; ++i) {
      const LayerShape& l = layers_[static_cast<std::size_t>(i)];
      Eigen::VectorXd z = weights(l) * x + bias(l);
      x = z.unaryExpr([this](double v) { return activate(v); });
    }
    return (weights(head) * x)(0) + params_[head.bias_offset];
  }

  void head_and_trunk_backward(const LayerShape& head, const TrunkCache& cache, const Eigen::RowVectorXd& ds,
                               std::span<double> grad) const {
    const Matrix& top = cache.a.back();
    Eigen::Map<Matrix> dw_head(grad.data() + head.weight_offset, head.rows, head.cols);
    dw_head.noalias() += ds * top.transpose();
    grad[head.bias_offset] += ds.sum();
    if (cfg_.depth == 0) return;
    Matrix delta = weights(head).transpose() * ds;  // dL/da at the top layer
    for (int i = cfg_.depth - 1; i >= 0; --i) {
      const auto iu = static_cast<std::size_t>(i);
      const LayerShape& l = layers_[iu];
      const Matrix& z = cache.z[iu];
      const Matrix& a = cache.a[iu + 1];
      for (Eigen::Index k = 0; k < delta.size(); ++k) delta.data()[k] *= activate_grad(z.data()[k], a.data()[k]);
      Eigen::Map<Matrix> dw(grad.data() + l.weight_offset, l.rows, l.cols);
      dw.noalias() += delta * cache.a[iu].transpose();
      Eigen::Map<Eigen::VectorXd> db(grad.data() + l.bias_offset, l.rows);
      db += delta.rowwise().sum();
      if (i > 0) delta = weights(l).transpose() * delta;
    }
  }

  ModelConfig cfg_;
  std::uint64_t seed_ = 0;
  std::vector<LayerShape> layers_;
  std::size_t param_count_ = 0;
  ParamVector params_;
};

}  // namespace nerg
