// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "nerg/model.hpp"

namespace nerg {
namespace {

ModelConfig small(Variant v, Activation a = Activation::Relu) {
  ModelConfig c;
  c.variant = v;
  c.depth = 2;
  c.width = 16;
  c.activation = a;
  c.encoding.l_pos = 3;
  c.encoding.l_dir = 2;
  c.bounds = {{-2, -2, 0}, {2, 2, 3}};
  return c;
}

TEST(Encoding, DefaultLength) {
  EncodingConfig e;
  EXPECT_EQ(e.size(), 90u);
  EXPECT_EQ(encode({0.1, 0.2, 0.3}, {0, 0, 1}, e).size(), 90u);
}

TEST(Encoding, RawOnlyIsIdentity) {
  EncodingConfig e{0, 0, true};
  EXPECT_EQ(encode({0.1, -0.2, 0.3}, {0, 1, 0}, e), (std::vector<double>{0.1, -0.2, 0.3, 0, 1, 0}));
}

TEST(Encoding, OriginFeatures) {
  EncodingConfig e{4, 2, true};
  const auto f = encode({0, 0, 0}, {0, 0, 1}, e);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(f[i], 0.0);
  for (int k = 0; k < 4; ++k)
    for (int a = 0; a < 3; ++a) {
      EXPECT_EQ(f[3 + 6 * k + 2 * a], 0.0);      // sin(0)
      EXPECT_EQ(f[3 + 6 * k + 2 * a + 1], 1.0);  // cos(0)
    }
}

TEST(Encoding, BandsMatchClosedForm) {
  EncodingConfig e{5, 0, false};
  const Vec3 p{0.37, -0.81, 0.05};
  const auto f = encode(p, {1, 0, 0}, e);
  for (int k = 0; k < 5; ++k)
    for (int a = 0; a < 3; ++a) {
      EXPECT_NEAR(f[6 * k + 2 * a], std::sin(std::pow(2.0, k) * kPi * p[a]), 1e-13);
      EXPECT_NEAR(f[6 * k + 2 * a + 1], std::cos(std::pow(2.0, k) * kPi * p[a]), 1e-13);
    }
}

TEST(Encoding, Validation) {
  EXPECT_THROW((EncodingConfig{0, 0, false}.validate()), ConfigError);
  EXPECT_THROW((EncodingConfig{-1, 4, true}.validate()), ConfigError);
}

TEST(Model, LayoutHasOnlyUsedHeads) {
  NergModel e(small(Variant::Emit), 1), c(small(Variant::Capture), 1), ec(small(Variant::EmitCapture), 1);
  EXPECT_NO_THROW(e.layer("head_e"));
  EXPECT_THROW(e.layer("head_c"), ConfigError);
  EXPECT_THROW(c.layer("head_e"), ConfigError);
  EXPECT_EQ(ec.param_count(), e.param_count() + 17);
  const std::size_t f = ec.feature_size();
  EXPECT_EQ(e.param_count(), 16 * f + 16 + 16 * 16 + 16 + 17);
}

TEST(Model, ZeroHeadsGiveNeutralOutputs) {
  ModelConfig cfg = small(Variant::EmitCapture);
  cfg.zero_init_heads = true;
  const NergModel m(cfg, 3);
  EXPECT_NEAR(m.forward_emit({0, 0, 1}, UnitDir()), std::log(2.0), 1e-15);
  EXPECT_EQ(m.forward_capture({0, 0, 1}, UnitDir()), 0.5);
  EXPECT_NEAR(m.predict_gaze({1, 1, 1}, {0, 0, 1}), 0.5 * std::log(2.0), 1e-15);
}

TEST(Model, OutputRanges) {
  const NergModel m(small(Variant::EmitCapture), 4);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p{u(rng), u(rng), u(rng) + 1}, o{u(rng), u(rng), u(rng) + 1};
    const UnitDir d = UnitDir::normalize(p - o);
    EXPECT_GE(m.forward_emit(p, d), 0.0);
    const double c = m.forward_capture(o, d);
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 1.0);
  }
}

TEST(Model, HeadBiasIsMonotone) {
  NergModel m(small(Variant::EmitCapture), 5);
  const Vec3 p{0.3, 0.2, 1.0}, o{-1, -1, 1.5};
  double prev = m.predict_gaze(p, o);
  for (int step = 0; step < 5; ++step) {
    m.params()[m.layer("head_e").bias_offset] += 0.5;
    m.params()[m.layer("head_c").bias_offset] += 0.5;
    const double g = m.predict_gaze(p, o);
    EXPECT_GT(g, prev);
    prev = g;
  }
}

TEST(Model, SeededInitIsDeterministic) {
  const NergModel a(small(Variant::EmitCapture), 9), b(small(Variant::EmitCapture), 9), c(small(Variant::EmitCapture), 10);
  EXPECT_TRUE(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  EXPECT_FALSE(std::equal(a.params().begin(), a.params().end(), c.params().begin()));
  // biases start at zero
  const auto& t0 = a.layer("trunk_0");
  for (int i = 0; i < t0.rows; ++i) EXPECT_EQ(a.params()[t0.bias_offset + i], 0.0);
}

TEST(Model, EmitIgnoresObserverAlongRay) {
  const NergModel m(small(Variant::Emit), 6);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.5, 1.5), s(0.2, 3.0);
  for (int i = 0; i < 500; ++i) {
    const Vec3 p{u(rng), u(rng), 1.0 + u(rng)};
    const Vec3 r = normalized({u(rng), u(rng), u(rng)});
    const double g1 = m.predict_gaze(p, p - s(rng) * r);
    const double g2 = m.predict_gaze(p, p - s(rng) * r);
    EXPECT_NEAR(g1, g2, 1e-12);
  }
}

TEST(Model, EmitCaptureIsProductOfHeads) {
  const NergModel m(small(Variant::EmitCapture, Activation::Tanh), 7);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int i = 0; i < 500; ++i) {
    const Vec3 p{u(rng), u(rng), 1.0 + u(rng)}, o{u(rng), u(rng), 1.0 + u(rng)};
    const UnitDir r = UnitDir::normalize(p - o);
    const double expected = m.forward_emit(p, -r) * m.forward_capture(o, r);
    EXPECT_NEAR(m.predict_gaze(p, o), expected, 1e-14 * std::max(1.0, expected));
  }
}

TEST(Model, BatchMatchesSinglePoint) {
  for (Variant v : {Variant::Emit, Variant::Capture, Variant::EmitCapture}) {
    const NergModel m(small(v, Activation::Softplus), 8);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    std::vector<Vec3> p, o;
    for (int i = 0; i < 64; ++i) {
      p.push_back({u(rng), u(rng), 1.0 + u(rng)});
      o.push_back({u(rng), u(rng), 1.0 + u(rng)});
    }
    std::vector<double> out(64);
    m.predict_batch(p, o, out);
    for (int i = 0; i < 64; ++i) EXPECT_NEAR(out[i], m.predict_gaze(p[i], o[i]), 1e-12);
  }
}

TEST(Model, VariantMismatchThrows) {
  const NergModel e(small(Variant::Emit), 1), c(small(Variant::Capture), 1);
  EXPECT_THROW(e.forward_capture({0, 0, 1}, UnitDir()), ConfigError);
  EXPECT_THROW(c.forward_emit({0, 0, 1}, UnitDir()), ConfigError);
  EXPECT_THROW(e.predict_gaze({0, 0, 1}, {0, 0, 1}), DomainError);
}

TEST(Model, StringConversions) {
  for (Variant v : {Variant::Emit, Variant::Capture, Variant::EmitCapture})
    EXPECT_EQ(variant_from_string(to_string(v)), v);
  EXPECT_THROW(variant_from_string("both"), ConfigError);
  EXPECT_EQ(activation_from_string("tanh"), Activation::Tanh);
}

TEST(Model, NormalizesBoundsToUnitCube) {
  const NergModel m(small(Variant::Emit), 1);
  const Vec3 lo = m.normalize_position({-2, -2, 0}), hi = m.normalize_position({2, 2, 3});
  EXPECT_EQ(lo, (Vec3{-1, -1, -1}));
  EXPECT_EQ(hi, (Vec3{1, 1, 1}));
}

TEST(Model, ParamsConstructorChecksCount) {
  EXPECT_THROW(NergModel(small(Variant::Emit), 1, std::vector<double>(3)), ConfigError);
}

}  // namespace
}  // namespace nerg
