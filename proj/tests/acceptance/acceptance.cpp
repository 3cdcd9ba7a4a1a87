// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Heavy stages (ablation, bench) run the real commands against
// configs/demo.json and write into --workdir.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "../oracles.hpp"
#include "nerg/commands.hpp"

namespace fs = std::filesystem;
using namespace nerg;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const std::string kAssets = NERG_ASSET_DIR;
const std::string kConfigs = NERG_CONFIG_DIR;

struct Env {
  fs::path workdir;
  std::ofstream log;
};

// --- criteria --------------------------------------------------------------

Outcome vmf_normalization(Env&) {
  const Vec3 mu = normalized({0.2, -0.7, 0.4});
  double worst = 0.0;
  for (double kappa : {0.5, 5.0, 50.0}) {
    const VmfKernel k(kappa);
    const double q = oracle::sphere_quadrature([&](const Vec3& w) { return vmf_pdf(k, mu, w); }, 400, 800);
    worst = std::max(worst, std::abs(q - 1.0));
  }
  std::mt19937_64 rng(1);
  std::vector<Vec3> rays;
  for (int i = 0; i < 30; ++i) rays.push_back(sample_vmf(normalized({1, 1, 0}), 4.0, rng));
  const GazeProbe probe({0, 0, 0}, rays, VmfKernel(50.0));
  double acc = 0.0;
  const auto dirs = sample_sphere_uniform(50000, 2);
  for (const auto& w : dirs) acc += probe_density(probe, w);
  const double mc = 4.0 * kPi * acc / static_cast<double>(dirs.size());
  return {worst <= 1e-2 && std::abs(mc - 1.0) <= 2e-2,
          fmt("max |quadrature - 1| = %.2e over kappa {0.5, 5, 50}; probe MC integral = %.4f", worst, mc)};
}

Outcome volume_oracle(Env&) {
  double worst_slab = 0.0;
  for (double sigma : {0.5, 2.0, 4.0})
    for (double len : {0.25, 1.0}) {
      AnalyticScene scene({Primitive::slab(0, 1.0, 1.0 + len, sigma, {0, 0, 0})}, {1, 1, 1}, Aabb{{-1, -1, -1}, {4, 1, 1}});
      IntegratorConfig c;
      c.far = 4.0;
      c.steps = 256;
      c.min_transmittance = 0.0;
      const RenderSample s = volume_render(scene, {{0, 0, 0}, UnitDir::normalize({1, 0, 0})}, c);
      const double exact = std::exp(-sigma * len);
      worst_slab = std::max(worst_slab, std::abs(s.color.r - exact) / exact);
    }
  const Primitive ball = Primitive::sphere({0.3, 4.0, -0.2}, 1.0, 1e4, {1, 1, 1});
  AnalyticScene scene({ball}, {0, 0, 0});
  IntegratorConfig c;
  c.far = 8.0;
  c.steps = 256;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  double worst_depth = 0.0;
  for (int i = 0; i < 500; ++i) {
    const Vec3 d = normalized(Vec3{ball.center.x + u(rng), ball.center.y, ball.center.z + u(rng)});
    const auto hit = oracle::hit_sphere({0, 0, 0}, d, ball.center, ball.radius);
    if (!hit) continue;
    const RenderSample s = volume_render(scene, {{0, 0, 0}, UnitDir::normalize(d)}, c);
    worst_depth = std::max(worst_depth, s.surface ? std::abs(s.depth - hit->t0) : 1e9);
  }
  const double steps = worst_depth / c.step_size();
  return {worst_slab <= 0.01 && steps <= 2.0,
          fmt("slab transmittance rel err %.2e at 256 steps; sphere depth err %.2f steps", worst_slab, steps)};
}

Outcome gradient_check(Env&) {
  const AnalyticScene scene = load_scene(kAssets + "/demo_store.json");
  ModelConfig mc;
  mc.variant = Variant::EmitCapture;
  mc.depth = 2;
  mc.width = 16;
  mc.bounds = scene.bounds();
  double worst = 0.0;
  std::size_t checked = 0, params = 0;
  for (Activation a : {Activation::Relu, Activation::Tanh}) {
    mc.activation = a;
    const NergModel model(mc, 3);
    std::mt19937_64 rng(4);
    std::vector<Vec3> rays;
    for (int i = 0; i < 40; ++i) rays.push_back(sample_vmf(normalized({0.2, 1, 0}), 6.0, rng));
    ProbeSet set;
    set.probes.emplace_back(Vec3{0, 0, 1.6}, rays, VmfKernel(50.0));
    auto batch = make_training_samples(set, 64, 5);
    IntegratorConfig integ;
    integ.far = 12.0;
    attach_surface_distances(batch, make_depth_locator(scene, integ));
    const GradCheckReport r = grad_check(model, batch);
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
    params += model.param_count();
  }
  return {worst < 1e-4 && checked * 10 >= params * 9,
          fmt("max rel error %.2e (2x16 EmitCapture, 64 samples, %zu/%zu params checked)", worst, checked, params)};
}

Outcome loss_identities(Env&) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  double self = 0.0, affine = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> y(50), h(50), h2(50);
    for (int i = 0; i < 50; ++i) {
      y[i] = u(rng);
      h[i] = u(rng) + y[i];
      h2[i] = 4.0 * h[i] + 3.0;
    }
    self = std::max(self, std::abs(total_loss(y, y)));
    affine = std::max(affine, std::abs(loss_cc(y, h) - loss_cc(y, h2)));
  }
  const double kld = loss_kld(std::vector<double>{1, 0}, std::vector<double>{0.5, 0.5});
  return {self <= 1e-12 && std::abs(kld - std::log(2.0)) <= 1e-9 && affine <= 1e-9,
          fmt("max total_loss(y,y) %.1e; KLD example %.12f; CC affine drift %.1e", self, kld, affine)};
}

struct WallFixture {
  AnalyticScene scene = load_scene(kAssets + "/demo_wall.json");
  IntegratorConfig integ;
  NergModel model;
  WallFixture() : model(make_cfg(scene), 1) {
    integ.far = 9.0;
    integ.steps = 256;
  }
  static ModelConfig make_cfg(const AnalyticScene& s) {
    ModelConfig mc;
    mc.depth = 2;
    mc.width = 32;
    mc.bounds = s.bounds();
    return mc;
  }
};

Outcome coupling_identity(Env&) {
  WallFixture w;
  const Camera cam = Camera::look_at({2.8, -0.9, 2.3}, {-0.3, 3.0, 0.9}, {0, 0, 1}, kPi / 3, 160, 120);
  OcclusionConfig on, off;
  off.enabled = false;
  const GazeFrame a = render_frame(w.scene, w.model, cam, ObserverState::coupled_to_camera(), w.integ, on);
  const GazeFrame b = render_frame(w.scene, w.model, cam, ObserverState::coupled_to_camera(), w.integ, off);
  const bool same_planes = a.gaze == b.gaze && a.visibility == b.visibility;
  const bool same_png = encode_png(colorize(a, {})) == encode_png(colorize(b, {}));
  std::size_t lit = 0;
  for (double g : a.gaze) lit += g > 0.0;
  return {same_planes && same_png && lit > 0,
          fmt("gaze planes %s, PNG %s (%zu lit pixels)", same_planes ? "identical" : "differ", same_png ? "identical" : "differ", lit)};
}

Outcome occlusion(Env&) {
  WallFixture w;
  const Camera cam = Camera::look_at({2.8, -0.9, 2.3}, {-0.3, 3.0, 0.9}, {0, 0, 1}, kPi / 3, 256, 256);
  const Vec3 obs{-0.5, 0.3, 1.0};
  OcclusionConfig oc;
  oc.falloff = 0.05;
  const auto t0 = std::chrono::steady_clock::now();
  const GazeFrame f = render_frame(w.scene, w.model, cam, ObserverState::at(obs), w.integ, oc, {1});
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::size_t nb = 0, nb_ok = 0, nu = 0, nu_ok = 0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const Ray r = camera_ray(cam, x, y);
      const auto t = oracle::first_hit(w.scene, r.origin, r.dir.vec());
      if (!t) continue;
      const double v = f.visibility[f.index(x, y)];
      if (oracle::segment_blocked(w.scene, obs, r.at(*t), 1e-6)) {
        ++nb;
        nb_ok += v < 0.05;
      } else {
        ++nu;
        nu_ok += v > 0.95;
      }
    }
  const double fb = nb ? static_cast<double>(nb_ok) / nb : 0.0;
  const double fu = nu ? static_cast<double>(nu_ok) / nu : 0.0;
  return {fb >= 0.95 && fu >= 0.95 && sec < 60.0,
          fmt("blocked v<0.05: %.2f%% of %zu; unblocked v>0.95: %.2f%% of %zu; %.2f s at 256x256", 100 * fb, nb, 100 * fu, nu, sec)};
}

CommandContext demo_context(Env& env, const fs::path& out, std::optional<std::string> variant = {}) {
  ConfigOverrides o;
  o.out = out.string();
  o.variant = std::move(variant);
  return make_context(kConfigs + "/demo.json", o, &env.log);
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(bin::read_text(p)); }

Outcome ablation(Env& env) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path emit_dir = env.workdir / "ablation_emit", ec_dir = env.workdir / "ablation_emit_capture";
  cmd_pipeline(demo_context(env, emit_dir, "emit"));
  cmd_pipeline(demo_context(env, ec_dir, "emit-capture"));
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto e = read_json(emit_dir / artifact::kEval), ec = read_json(ec_dir / artifact::kEval);
  const double kld_e = e.at("model").at("kld"), kld_ec = ec.at("model").at("kld");
  const double improvement = ec.at("improvement");
  return {kld_ec < kld_e && improvement >= 0.30 && sec < 15 * 60,
          fmt("test KLD emit %.4f vs emit-capture %.4f; emit-capture total %.4f vs untrained %.4f (%.1f%% better); %.0f s",
              kld_e, kld_ec, ec.at("model").at("total").get<double>(), ec.at("untrained").at("total").get<double>(),
              100 * improvement, sec)};
}

Outcome emit_invariance(Env&) {
  const AnalyticScene scene = load_scene(kAssets + "/demo_store.json");
  ModelConfig mc;
  mc.variant = Variant::Emit;
  mc.bounds = scene.bounds();
  const NergModel model(mc, 8);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ux(-0.8, 0.8), uy(-2.5, 2.0), uz(1.5, 1.7), us(0.05, 3.0);
  std::normal_distribution<double> g;
  double worst = 0.0;
  const int rays = 10, per_ray = 100;
  for (int r = 0; r < rays; ++r) {
    const Vec3 p_od{ux(rng), uy(rng), uz(rng)};
    const Vec3 dir = normalized({g(rng), g(rng), g(rng)});
    const double ref = model.predict_gaze(p_od, p_od - dir);
    for (int k = 0; k < per_ray; ++k) worst = std::max(worst, std::abs(model.predict_gaze(p_od, p_od - us(rng) * dir) - ref));
  }
  return {worst <= 1e-12, fmt("max |g - g_ref| = %.2e over %d observer positions on %d rays", worst, rays * per_ray, rays)};
}

Outcome determinism(Env& env) {
  // Rerun the emit-capture ablation pipeline from its own manifest.
  const fs::path first = env.workdir / "ablation_emit_capture", second = env.workdir / "determinism_rerun";
  if (!fs::is_regular_file(first / "render.manifest.json")) cmd_pipeline(demo_context(env, first, "emit-capture"));
  ConfigOverrides o;
  o.out = second.string();
  cmd_pipeline(make_context(first / "render.manifest.json", o, &env.log));
  std::vector<std::string> differ;
  for (const char* f : {artifact::kCheckpoint, artifact::kEval, artifact::kFrameRgb, artifact::kFrameGaze, artifact::kProbesTrain,
                        artifact::kGaze})
    if (bin::read_file(first / f) != bin::read_file(second / f)) differ.push_back(f);
  std::string list;
  for (const auto& d : differ) list += " " + d;
  return {differ.empty(), differ.empty() ? "checkpoint, eval JSON, PNGs, probes and gaze byte-identical across reruns"
                                         : "differing:" + list};
}

Outcome bench(Env& env) {
  const fs::path dir = env.workdir / "bench";
  const nlohmann::json j = cmd_bench(demo_context(env, dir));
  double p50_emit = -1, p50_ec = -1;
  for (const auto& m : j.at("models")) {
    if (m.at("label") == "emit") p50_emit = m.at("p50_ms");
    if (m.at("label") == "emit-capture") p50_ec = m.at("p50_ms");
  }
  const bool shape = j.at("cameras").size() == 32 && j.at("resolution") == nlohmann::json({1280, 720});
  return {shape && p50_emit > 0 && p50_emit <= p50_ec,
          fmt("32 cameras at 1280x720: p50 emit %.0f ms, emit-capture %.0f ms", p50_emit, p50_ec)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NeRG acceptance suite"};
  std::string workdir = "acceptance_work";
  std::vector<std::string> only;
  app.add_option("--workdir", workdir, "Scratch directory for pipeline runs");
  app.add_option("--only", only, "Run only the named criteria");
  CLI11_PARSE(app, argc, argv);

  Env env;
  env.workdir = fs::absolute(workdir);
  fs::create_directories(env.workdir);
  env.log.open(env.workdir / "acceptance.log");

  const std::vector<std::pair<std::string, std::function<Outcome(Env&)>>> criteria = {
      {"vmf_normalization", vmf_normalization},
      {"volume_render_oracle", volume_oracle},
      {"gradient_check", gradient_check},
      {"loss_identities", loss_identities},
      {"coupling_identity", coupling_identity},
      {"occlusion", occlusion},
      {"ablation_ordering", ablation},
      {"emit_ray_invariance", emit_invariance},
      {"determinism", determinism},
      {"bench_harness", bench},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn(env);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), sec);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
