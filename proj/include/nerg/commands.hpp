// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0
//
// Batch commands. Each reads its inputs from the config and the output
// directory, writes its artifacts there, and records a manifest. Failures
// surface as exceptions; exit_code_for() maps them to process status.
#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <string>

#include "json.hpp"

#include "nerg/checkpoint.hpp"
#include "nerg/config.hpp"
#include "nerg/image_io.hpp"
#include "nerg/manifest.hpp"
#include "nerg/probes_io.hpp"
#include "nerg/render.hpp"
#include "nerg/scene_io.hpp"
#include "nerg/train.hpp"

namespace nerg {

namespace artifact {
inline constexpr const char* kScene = "scene.json";
inline constexpr const char* kVoxels = "scene.vox";
inline constexpr const char* kGaze = "gaze.csv";
inline constexpr const char* kProbesTrain = "probes_train.prb";
inline constexpr const char* kProbesTest = "probes_test.prb";
inline constexpr const char* kCheckpoint = "model.ckpt";
inline constexpr const char* kLossHistory = "loss_history.csv";
inline constexpr const char* kEval = "eval.json";
inline constexpr const char* kFrameRgb = "frame_rgb.png";
inline constexpr const char* kFrameGaze = "frame_gaze.png";
inline constexpr const char* kFrameDump = "frame.frm";
inline constexpr const char* kBench = "bench.json";
}  // namespace artifact

// Seed streams derived from the run seed, one per stage.
enum SeedStream : std::uint64_t {
  kSeedGaze = 1,
  kSeedProbesTrain = 2,
  kSeedProbesTest = 3,
  kSeedInit = 4,
  kSeedShuffle = 5,
  kSeedSamples = 6,
  kSeedEval = 7,
  kSeedBench = 8,
};

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitMissingInput = 3,
  kExitDivergence = 4,
};

struct CommandContext {
  RunConfig cfg;
  nlohmann::json resolved;  // config_to_json(cfg)
  std::ostream* log = &std::cerr;

  std::filesystem::path out(const char* name) const { return cfg.output_dir / name; }
  std::uint64_t seed(SeedStream s) const { return derive_seed(cfg.seed, s); }
};

/// Parses a config file (or manifest), applies flag overrides and resolves
/// relative paths against the file's directory.
inline CommandContext make_context(const std::filesystem::path& config_path, const ConfigOverrides& overrides = {},
                                   std::ostream* log = &std::cerr) {
  nlohmann::json doc = load_config_document(config_path);
  apply_overrides(doc, overrides);
  CommandContext ctx;
  ctx.cfg = config_from_json(doc, std::filesystem::absolute(config_path).parent_path());
  ctx.resolved = config_to_json(ctx.cfg);
  ctx.log = log;
  return ctx;
}

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const MissingInputError*>(&e)) return kExitMissingInput;
  if (dynamic_cast<const DivergenceError*>(&e)) return kExitDivergence;
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  return kExitFailure;
}

namespace detail {

inline void require_file(const std::filesystem::path& p, const std::string& hint) {
  if (!std::filesystem::is_regular_file(p)) throw MissingInputError("missing input " + p.string() + " (" + hint + ")");
}

inline AnalyticScene load_run_scene(const CommandContext& ctx, Manifest& m) {
  require_file(ctx.cfg.scene, "scene file from the config");
  m.add_input(ctx.cfg.scene);
  return load_scene(ctx.cfg.scene);
}

inline ModelConfig model_config_for(const CommandContext& ctx, const SceneField& scene) {
  ModelConfig mc = ctx.cfg.model;
  mc.bounds = scene.bounds();
  return mc;
}

inline SurfaceLocator locator_for(const CommandContext& ctx, const SceneField& scene) {
  if (ctx.cfg.surface == SurfaceMode::Unit) return {};
  return make_depth_locator(scene, ctx.cfg.integrator);
}

inline nlohmann::json report_to_json(const LossReport& r) {
  return {{"kld", r.kld}, {"cc", r.cc}, {"mae", r.mae}, {"total", r.total}, {"count", r.count}};
}

inline void finish(const CommandContext& ctx, Manifest& m) {
  const auto path = m.write(ctx.cfg.output_dir);
  *ctx.log << "wrote " << path.string() << "\n";
}

}  // namespace detail

inline void cmd_scene(const CommandContext& ctx) {
  Manifest m("scene", ctx.resolved);
  const AnalyticScene scene = detail::load_run_scene(ctx, m);
  save_scene(scene, ctx.out(artifact::kScene));
  m.add_output(ctx.out(artifact::kScene));
  if (ctx.cfg.scene_voxels) {
    const VoxelGrid grid = bake_voxel_grid(scene, ctx.cfg.scene_voxels->resolution, ctx.cfg.scene_voxels->trilinear);
    save_voxel_grid(grid, ctx.out(artifact::kVoxels));
    m.add_output(ctx.out(artifact::kVoxels));
  }
  m.extra()["primitives"] = scene.primitives().size();
  *ctx.log << "scene: " << scene.primitives().size() << " primitives\n";
  detail::finish(ctx, m);
}

/// Writes gaze.csv in gaze-world coordinates, from a CSV file or synthesized
/// in scene coordinates and mapped through the world transform.
inline void cmd_gaze(const CommandContext& ctx) {
  Manifest m("gaze", ctx.resolved);
  const WorldTransform* to_gaze = ctx.cfg.world_transform ? &*ctx.cfg.world_transform : nullptr;
  std::vector<GazeRay> scene_rays;
  if (ctx.cfg.gaze.path) {
    detail::require_file(*ctx.cfg.gaze.path, "gaze.path");
    m.add_input(*ctx.cfg.gaze.path);
    GazeLoadResult res = load_gaze_rays(*ctx.cfg.gaze.path, to_gaze);
    nlohmann::json rejected = nlohmann::json::array();
    for (const auto& r : res.rejected) rejected.push_back({{"line", r.line}, {"reason", r.reason}});
    m.extra()["rejected_rows"] = std::move(rejected);
    if (!res.rejected.empty()) *ctx.log << "gaze: rejected " << res.rejected.size() << " rows\n";
    scene_rays = std::move(res.rays);
  } else {
    const AnalyticScene scene = detail::load_run_scene(ctx, m);
    const std::uint64_t base = ctx.seed(kSeedGaze);
    m.set_seed("gaze", base);
    for (std::size_t k = 0; k < ctx.cfg.gaze.groups.size(); ++k) {
      const SynthGroup& g = ctx.cfg.gaze.groups[k];
      auto rays = synth_gaze(scene, g.attractors, g.n, g.observer_volume, ctx.cfg.gaze.noise_kappa, derive_seed(base, k));
      scene_rays.insert(scene_rays.end(), rays.begin(), rays.end());
    }
  }
  if (to_gaze)
    for (auto& r : scene_rays) r = {to_gaze->transform_point(r.position), to_gaze->transform_dir(r.direction)};
  save_gaze_rays(scene_rays, ctx.out(artifact::kGaze));
  m.add_output(ctx.out(artifact::kGaze));
  m.extra()["rays"] = scene_rays.size();
  *ctx.log << "gaze: " << scene_rays.size() << " rays\n";
  detail::finish(ctx, m);
}

inline void cmd_probes(const CommandContext& ctx) {
  Manifest m("probes", ctx.resolved);
  detail::require_file(ctx.out(artifact::kGaze), "run the gaze command first");
  m.add_input(ctx.out(artifact::kGaze));
  const WorldTransform* to_gaze = ctx.cfg.world_transform ? &*ctx.cfg.world_transform : nullptr;
  const GazeLoadResult loaded = load_gaze_rays(ctx.out(artifact::kGaze), to_gaze);
  const auto& pc = ctx.cfg.probes;
  ProbePlacement pl;
  pl.kind = pc.placement;
  pl.volume = pc.volume;
  pl.grid = pc.grid;
  pl.attempts_per_probe = pc.attempts_per_probe;
  ProbeSet train_set, test_set;
  m.set_seed("probes_train", ctx.seed(kSeedProbesTrain));
  m.set_seed("probes_test", ctx.seed(kSeedProbesTest));
  if (pc.placement == PlacementKind::Random) {
    pl.count = pc.train_count;
    train_set = build_probes(loaded.rays, pl, pc.params, ctx.seed(kSeedProbesTrain));
    pl.count = pc.test_count;
    test_set = build_probes(loaded.rays, pl, pc.params, ctx.seed(kSeedProbesTest));
  } else {
    // One grid, split by a seeded shuffle: the first test_count probes are
    // held out, up to train_count of the rest train.
    const ProbeSet all = build_probes(loaded.rays, pl, pc.params, ctx.seed(kSeedProbesTrain));
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(ctx.seed(kSeedProbesTest));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    train_set.record = test_set.record = all.record;
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (k < pc.test_count)
        test_set.probes.push_back(all.probes[order[k]]);
      else if (train_set.size() < pc.train_count)
        train_set.probes.push_back(all.probes[order[k]]);
    }
  }
  if (train_set.empty() || test_set.empty())
    throw std::runtime_error("probes: placement produced an empty train or test set (no gaze rays within the probe radius)");
  save_probe_set(train_set, ctx.out(artifact::kProbesTrain));
  save_probe_set(test_set, ctx.out(artifact::kProbesTest));
  m.add_output(ctx.out(artifact::kProbesTrain));
  m.add_output(ctx.out(artifact::kProbesTest));
  m.extra()["train_probes"] = train_set.size();
  m.extra()["test_probes"] = test_set.size();
  *ctx.log << "probes: " << train_set.size() << " train, " << test_set.size() << " test\n";
  detail::finish(ctx, m);
}

inline void cmd_train(const CommandContext& ctx) {
  Manifest m("train", ctx.resolved);
  const AnalyticScene scene = detail::load_run_scene(ctx, m);
  detail::require_file(ctx.out(artifact::kProbesTrain), "run the probes command first");
  m.add_input(ctx.out(artifact::kProbesTrain));
  const ProbeSet train_set = load_probe_set(ctx.out(artifact::kProbesTrain));
  if (train_set.empty()) throw DomainError("training probe set is empty");
  const NergModel init(detail::model_config_for(ctx, scene), ctx.seed(kSeedInit));
  const SurfaceLocator locate = detail::locator_for(ctx, scene);
  const std::uint64_t sample_seed = ctx.seed(kSeedSamples);
  const std::size_t per_probe = ctx.cfg.train.samples_per_probe;
  m.set_seed("init", ctx.seed(kSeedInit));
  m.set_seed("shuffle", ctx.cfg.train.seed);
  m.set_seed("samples", sample_seed);
  auto sampler = [&](int epoch) {
    auto s = make_training_samples(train_set, per_probe, derive_seed(sample_seed, static_cast<std::uint64_t>(epoch)));
    if (locate) attach_surface_distances(s, locate);
    return s;
  };
  auto progress = [&](int epoch, const LossReport& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %d/%d kld %.5f cc %.5f mae %.5f total %.5f\n", epoch + 1, ctx.cfg.train.epochs,
                  r.kld, r.cc, r.mae, r.total);
    *ctx.log << buf << std::flush;
  };
  const TrainResult res = train(init, sampler, ctx.cfg.train, progress);
  const nlohmann::json meta = {{"epochs_completed", res.history.size()},
                               {"diverged", res.diverged},
                               {"surface", to_string(ctx.cfg.surface)},
                               {"final_total", res.history.empty() ? 0.0 : res.history.back().total}};
  save_checkpoint(res.model, ctx.out(artifact::kCheckpoint), meta);
  bin::write_text(ctx.out(artifact::kLossHistory), format_loss_history(res.history));
  m.add_output(ctx.out(artifact::kCheckpoint));
  m.add_output(ctx.out(artifact::kLossHistory));
  m.extra() = meta;
  detail::finish(ctx, m);
  if (res.diverged)
    throw DivergenceError("training diverged after " + std::to_string(res.history.size()) +
                          " epochs; checkpoint holds the last finite parameters");
}

inline Checkpoint load_run_checkpoint(const CommandContext& ctx, Manifest& m) {
  detail::require_file(ctx.out(artifact::kCheckpoint), "run the train command first");
  m.add_input(ctx.out(artifact::kCheckpoint));
  return load_checkpoint(ctx.out(artifact::kCheckpoint));
}

inline nlohmann::json cmd_eval(const CommandContext& ctx) {
  Manifest m("eval", ctx.resolved);
  const AnalyticScene scene = detail::load_run_scene(ctx, m);
  const Checkpoint ck = load_run_checkpoint(ctx, m);
  detail::require_file(ctx.out(artifact::kProbesTest), "run the probes command first");
  m.add_input(ctx.out(artifact::kProbesTest));
  const ProbeSet test_set = load_probe_set(ctx.out(artifact::kProbesTest));
  const SurfaceLocator locate = detail::locator_for(ctx, scene);
  const std::uint64_t seed = ctx.seed(kSeedEval);
  m.set_seed("eval", seed);
  const LossReport trained = evaluate(ck.model, test_set, ctx.cfg.eval.n_dirs, seed, locate);
  // Same architecture and init seed as the checkpoint, before training.
  const NergModel untrained_model = quantize_f32(NergModel(ck.model.config(), ck.model.seed()));
  const LossReport untrained = evaluate(untrained_model, test_set, ctx.cfg.eval.n_dirs, seed, locate);
  const nlohmann::json out = {{"variant", to_string(ck.model.variant())},
                              {"probes", test_set.size()},
                              {"n_dirs", ctx.cfg.eval.n_dirs},
                              {"seed", seed},
                              {"surface", to_string(ctx.cfg.surface)},
                              {"model", detail::report_to_json(trained)},
                              {"untrained", detail::report_to_json(untrained)},
                              {"improvement", untrained.total > 0 ? 1.0 - trained.total / untrained.total : 0.0}};
  bin::write_text(ctx.out(artifact::kEval), out.dump(2) + "\n");
  m.add_output(ctx.out(artifact::kEval));
  char buf[200];
  std::snprintf(buf, sizeof buf, "eval: kld %.5f cc %.5f mae %.5f total %.5f (untrained total %.5f)\n", trained.kld, trained.cc,
                trained.mae, trained.total, untrained.total);
  *ctx.log << buf;
  detail::finish(ctx, m);
  return out;
}

inline void check_observer(const ObserverState& obs, const SceneField& scene) {
  if (!obs.coupled && !scene.bounds().contains(obs.position)) throw ConfigError("observer position lies outside the scene bounds");
}

inline void cmd_render(const CommandContext& ctx) {
  Manifest m("render", ctx.resolved);
  const AnalyticScene scene = detail::load_run_scene(ctx, m);
  const Checkpoint ck = load_run_checkpoint(ctx, m);
  const Camera cam = ctx.cfg.render.make_camera();
  const ObserverState obs = ctx.cfg.render.observer_state();
  check_observer(obs, scene);
  const auto t0 = std::chrono::steady_clock::now();
  const GazeFrame f = render_frame(scene, ck.model, cam, obs, ctx.cfg.integrator, ctx.cfg.occlusion, {ctx.cfg.render.threads});
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  save_png(rgb_image(f), ctx.out(artifact::kFrameRgb));
  save_png(colorize(f, ctx.cfg.render.colorize), ctx.out(artifact::kFrameGaze));
  save_frame_dump(f, ctx.out(artifact::kFrameDump));
  for (const char* a : {artifact::kFrameRgb, artifact::kFrameGaze, artifact::kFrameDump}) m.add_output(ctx.out(a));
  const GazeRange range = gaze_range(f);
  m.extra() = {{"render_ms", ms}, {"gaze_min", range.min}, {"gaze_max", range.max}};
  *ctx.log << "render: " << f.width << "x" << f.height << " in " << static_cast<long>(ms) << " ms\n";
  detail::finish(ctx, m);
}

/// Frame time per variant on shared cameras. Weights are freshly
/// initialized: the cost of a frame does not depend on their values.
inline nlohmann::json cmd_bench(const CommandContext& ctx) {
  Manifest m("bench", ctx.resolved);
  const AnalyticScene scene = detail::load_run_scene(ctx, m);
  std::vector<NergModel> models;
  for (Variant v : ctx.cfg.bench.variants) {
    ModelConfig mc = detail::model_config_for(ctx, scene);
    mc.variant = v;
    models.emplace_back(mc, ctx.seed(kSeedInit));
  }
  std::vector<BenchModel> entries;
  for (const auto& model : models) entries.push_back({std::string(to_string(model.variant())), &model});
  BenchConfig bc;
  bc.width = ctx.cfg.bench.width;
  bc.height = ctx.cfg.bench.height;
  bc.n_cams = ctx.cfg.bench.n_cams;
  bc.seed = ctx.seed(kSeedBench);
  m.set_seed("bench", bc.seed);
  const BenchReport rep = bench_frame_time(scene, entries, bc, ctx.cfg.integrator, ctx.cfg.occlusion);
  const nlohmann::json j = bench_to_json(rep);
  bin::write_text(ctx.out(artifact::kBench), j.dump(2) + "\n");
  m.add_output(ctx.out(artifact::kBench));
  for (const auto& s : rep.series) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "bench %-13s mean %.1f ms  p50 %.1f ms  p95 %.1f ms\n", s.label.c_str(), s.mean, s.p50, s.p95);
    *ctx.log << buf;
  }
  detail::finish(ctx, m);
  return j;
}

/// scene -> gaze -> probes -> train -> eval -> render.
inline void cmd_pipeline(const CommandContext& ctx) {
  cmd_scene(ctx);
  cmd_gaze(ctx);
  cmd_probes(ctx);
  cmd_train(ctx);
  cmd_eval(ctx);
  cmd_render(ctx);
}

}  // namespace nerg
