// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "../oracles.hpp"
#include "nerg/image_io.hpp"
#include "nerg/render.hpp"

namespace nerg {
namespace {

ModelConfig small_model(const Aabb& bounds, Variant v = Variant::EmitCapture) {
  ModelConfig c;
  c.variant = v;
  c.depth = 2;
  c.width = 16;
  c.encoding = {4, 2, true};
  c.bounds = bounds;
  return c;
}

struct Wall {
  AnalyticScene scene = load_scene(std::string(NERG_ASSET_DIR) + "/demo_wall.json");
  IntegratorConfig integ;
  NergModel model;
  Camera cam;
  Wall() : model(small_model(scene.bounds()), 3) {
    integ.far = 9.0;
    integ.steps = 256;
    cam = Camera::look_at({2.8, -0.9, 2.3}, {-0.3, 3.0, 0.9}, {0, 0, 1}, kPi / 3, 48, 40);
  }
};

TEST(Visibility, WorkedExamples) {
  EXPECT_EQ(visibility_factor(5.0, 5.0, 0.05, 0.0), 1.0);
  EXPECT_NEAR(visibility_factor(4.975, 5.0, 0.05, 0.0), 0.5, 1e-9);
  EXPECT_EQ(visibility_factor(4.94, 5.0, 0.05, 0.0), 0.0);
  EXPECT_EQ(visibility_factor(1.0, 5.0, 0.05, 0.0), 0.0);
  EXPECT_EQ(visibility_factor(4.9, 5.0, 0.05, 0.1), 1.0);
  EXPECT_EQ(visibility_factor(6.0, 5.0, 0.05, 0.0), 1.0);
}

TEST(Visibility, MonotoneInObserverDepth) {
  double prev = -1.0;
  for (double d = 0.0; d <= 5.2; d += 0.001) {
    const double v = visibility_factor(d, 5.0, 0.05, 0.02);
    EXPECT_GE(v, prev);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    prev = v;
  }
}

TEST(Visibility, ConfigValidation) {
  OcclusionConfig c;
  c.falloff = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.falloff = 0.05;
  c.epsilon = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(RenderFrame, CoupledEqualsObserverAtCamera) {
  Wall w;
  const GazeFrame a = render_frame(w.scene, w.model, w.cam, ObserverState::coupled_to_camera(), w.integ, {});
  const GazeFrame b = render_frame(w.scene, w.model, w.cam, ObserverState::at(w.cam.position), w.integ, {});
  EXPECT_EQ(a.gaze, b.gaze);
  EXPECT_EQ(a.visibility, b.visibility);
  for (double v : a.visibility) EXPECT_EQ(v, 1.0);
}

TEST(RenderFrame, ObserverAtCameraIgnoresOcclusionFlag) {
  Wall w;
  OcclusionConfig off;
  off.enabled = false;
  const GazeFrame a = render_frame(w.scene, w.model, w.cam, ObserverState::at(w.cam.position), w.integ, {});
  const GazeFrame b = render_frame(w.scene, w.model, w.cam, ObserverState::at(w.cam.position), w.integ, off);
  EXPECT_EQ(a.gaze, b.gaze);
}

TEST(RenderFrame, GazeIsModelTimesVisibility) {
  Wall w;
  const Vec3 obs{-0.5, 0.3, 1.0};
  const GazeFrame f = render_frame(w.scene, w.model, w.cam, ObserverState::at(obs), w.integ, {});
  int surface = 0;
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      const std::size_t i = f.index(x, y);
      if (!(f.flags[i] & kPixelSurface)) {
        EXPECT_EQ(f.gaze[i], 0.0);
        continue;
      }
      ++surface;
      const Ray r = camera_ray(w.cam, x, y);
      const Vec3 pd = r.at(f.depth[i]);
      EXPECT_NEAR(f.gaze[i], w.model.predict_gaze(pd, obs) * f.visibility[i], 1e-12);
    }
  EXPECT_GT(surface, 100);
}

TEST(RenderFrame, OcclusionAgreesWithSegmentOracle) {
  Wall w;
  const Vec3 obs{-0.5, 0.3, 1.0};
  w.cam = Camera::look_at({2.8, -0.9, 2.3}, {-0.3, 3.0, 0.9}, {0, 0, 1}, kPi / 3, 96, 96);
  const GazeFrame f = render_frame(w.scene, w.model, w.cam, ObserverState::at(obs), w.integ, {});
  int blocked = 0, blocked_ok = 0, clear = 0, clear_ok = 0;
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      const std::size_t i = f.index(x, y);
      if (!(f.flags[i] & kPixelSurface)) continue;
      const Vec3 pd = camera_ray(w.cam, x, y).at(f.depth[i]);
      // classify with a margin so pixels on silhouettes are left out
      const bool hard_block = oracle::segment_blocked(w.scene, obs, pd, 0.2);
      const bool clear_line = !oracle::segment_blocked(w.scene, obs, pd, 0.05);
      if (hard_block) {
        ++blocked;
        blocked_ok += f.visibility[i] < 0.05;
      } else if (clear_line) {
        ++clear;
        clear_ok += f.visibility[i] > 0.95;
      }
    }
  ASSERT_GT(blocked, 100);
  ASSERT_GT(clear, 100);
  EXPECT_GE(blocked_ok, 0.9 * blocked);
  EXPECT_GE(clear_ok, 0.9 * clear);
}

TEST(RenderFrame, VacuumHasNoGaze) {
  const AnalyticScene empty({}, {0.1, 0.2, 0.3}, Aabb{{-1, -1, -1}, {1, 1, 1}});
  const NergModel m(small_model(empty.bounds()), 1);
  const Camera cam = Camera::look_at({0, -0.5, 0}, {0, 1, 0}, {0, 0, 1}, 1.0, 16, 12);
  const GazeFrame f = render_frame(empty, m, cam, ObserverState::at({0.3, 0.0, 0.0}), {}, {});
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_EQ(f.gaze[i], 0.0);
    EXPECT_EQ(f.flags[i], 0);
    EXPECT_DOUBLE_EQ(f.rgb[i].b, 0.3);
  }
}

TEST(RenderFrame, ThreadCountDoesNotChangeOutput) {
  Wall w;
  const GazeFrame a = render_frame(w.scene, w.model, w.cam, ObserverState::at({-0.5, 0.3, 1.0}), w.integ, {}, {1});
  const GazeFrame b = render_frame(w.scene, w.model, w.cam, ObserverState::at({-0.5, 0.3, 1.0}), w.integ, {}, {3});
  EXPECT_EQ(a.gaze, b.gaze);
  EXPECT_EQ(a.depth, b.depth);
}

TEST(Colorize, ZeroGazePassesRgbThrough) {
  GazeFrame f(4, 3);
  for (std::size_t i = 0; i < f.size(); ++i) f.rgb[i] = {0.1 * i / 12.0, 0.5, 0.9};
  for (auto norm : {GazeNormalization::Fixed, GazeNormalization::MinMax}) {
    ColorizeConfig c;
    c.normalization = norm;
    EXPECT_EQ(colorize(f, c).data, rgb_image(f).data);
  }
}

TEST(Colorize, AlphaEndpoints) {
  GazeFrame f(3, 1);
  f.rgb = {{0.2, 0.2, 0.2}, {0.4, 0.4, 0.4}, {0.6, 0.6, 0.6}};
  f.gaze = {0.5, 1.0, 1.5};
  ColorizeConfig c;
  c.alpha = 0.0;
  EXPECT_EQ(colorize(f, c).data, rgb_image(f).data);
  c.alpha = 1.0;
  c.colormap = Colormap::Gray;
  c.g_max = 2.0;
  const Image8 img = colorize(f, c);
  EXPECT_EQ(img.data[0], to_u8(0.25));
  EXPECT_EQ(img.data[3], to_u8(0.5));
  EXPECT_EQ(img.data[6], to_u8(0.75));
  c.normalization = GazeNormalization::MinMax;
  const Image8 mm = colorize(f, c);
  EXPECT_EQ(mm.data[0], 0);
  EXPECT_EQ(mm.data[3], to_u8(0.5));
  EXPECT_EQ(mm.data[6], 255);
}

TEST(Colorize, ConstantGazeMinMaxSaturates) {
  GazeFrame f(2, 1);
  f.gaze = {0.3, 0.3};
  ColorizeConfig c;
  c.alpha = 1.0;
  c.colormap = Colormap::Gray;
  c.normalization = GazeNormalization::MinMax;
  EXPECT_EQ(colorize(f, c).data[0], 255);
}

TEST(Colorize, RejectsNonFinite) {
  GazeFrame f(1, 1);
  f.gaze[0] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(colorize(f, {}), DomainError);
}

TEST(Colormap, EndpointsAndRange) {
  for (Colormap m : {Colormap::Turbo, Colormap::Jet, Colormap::Gray})
    for (double t = -0.5; t <= 1.5; t += 0.01) EXPECT_TRUE(colormap_lookup(m, t).in_unit_range());
  EXPECT_EQ(colormap_lookup(Colormap::Gray, 1.0).r, 1.0);
  // turbo runs from dark blue to dark red
  EXPECT_GT(colormap_lookup(Colormap::Turbo, 0.1).b, colormap_lookup(Colormap::Turbo, 0.1).r);
  EXPECT_GT(colormap_lookup(Colormap::Turbo, 0.9).r, colormap_lookup(Colormap::Turbo, 0.9).b);
  EXPECT_EQ(colormap_from_string("jet"), Colormap::Jet);
  EXPECT_THROW(colormap_from_string("viridis"), ConfigError);
}

TEST(ImageIo, PngRoundTrip) {
  Image8 img{5, 3, {}};
  for (int i = 0; i < 45; ++i) img.data.push_back(static_cast<std::uint8_t>(i * 5));
  const Image8 back = decode_png(encode_png(img));
  EXPECT_EQ(back.width, 5);
  EXPECT_EQ(back.height, 3);
  EXPECT_EQ(back.data, img.data);
  EXPECT_EQ(encode_png(img), encode_png(back));
  EXPECT_THROW(decode_png(bin::Bytes{1, 2, 3}), ParseError);
}

TEST(ImageIo, FrameDumpRoundTrip) {
  Wall w;
  const GazeFrame f = render_frame(w.scene, w.model, w.cam, ObserverState::at({-0.5, 0.3, 1.0}), w.integ, {});
  const GazeFrame back = decode_frame_dump(encode_frame_dump(f));
  ASSERT_EQ(back.size(), f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_EQ(back.gaze[i], static_cast<float>(f.gaze[i]));
    EXPECT_EQ(back.visibility[i], static_cast<float>(f.visibility[i]));
    EXPECT_EQ(back.depth[i], static_cast<float>(f.depth[i]));
    EXPECT_EQ(back.rgb[i].g, static_cast<float>(f.rgb[i].g));
  }
}

TEST(Bench, CamerasAreSeededAndFree) {
  const AnalyticScene scene = load_scene(std::string(NERG_ASSET_DIR) + "/demo_store.json");
  BenchConfig c;
  c.n_cams = 16;
  c.seed = 5;
  const auto a = bench_cameras(scene, c), b = bench_cameras(scene, c);
  ASSERT_EQ(a.size(), 16u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i], b[i]);
    EXPECT_EQ(scene.density(a[i].position), 0.0);
    EXPECT_EQ(a[i].width, 1280);
  }
  c.seed = 6;
  EXPECT_NE(bench_cameras(scene, c)[0].position, a[0].position);
}

TEST(Bench, Percentile) {
  EXPECT_EQ(percentile({3, 1, 2}, 0.5), 2.0);
  EXPECT_EQ(percentile({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_NEAR(percentile({0, 10}, 0.95), 9.5, 1e-12);
  EXPECT_EQ(percentile({}, 0.5), 0.0);
}

TEST(Bench, ReportsEverySeries) {
  const AnalyticScene scene = load_scene(std::string(NERG_ASSET_DIR) + "/demo_store.json");
  const NergModel e(small_model(scene.bounds(), Variant::Emit), 1), ec(small_model(scene.bounds()), 1);
  const BenchModel models[] = {{"emit", &e}, {"emit-capture", &ec}};
  BenchConfig c;
  c.width = 16;
  c.height = 9;
  c.n_cams = 3;
  IntegratorConfig integ;
  integ.steps = 32;
  const BenchReport r = bench_frame_time(scene, models, c, integ);
  ASSERT_EQ(r.series.size(), 2u);
  for (const auto& s : r.series) {
    EXPECT_EQ(s.ms.size(), 3u);
    EXPECT_GT(s.p50, 0.0);
    EXPECT_LE(s.p50, s.p95 + 1e-12);
  }
  const auto j = bench_to_json(r);
  EXPECT_EQ(j.at("models").size(), 2u);
  EXPECT_EQ(j.at("cameras").size(), 3u);
}

}  // namespace
}  // namespace nerg
