// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0
//
// nerg: command-line entry point. See README.md for usage.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <thread>

#include "CLI11.hpp"

#include "nerg/commands.hpp"
#include "nerg/service.hpp"

namespace {

struct CommonFlags {
  std::string config;
  nerg::ConfigOverrides overrides;
  std::uint64_t seed = 0;
  std::string out, variant, resolution, observer, camera;
  double falloff = 0.0;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Run config (JSON) or a command manifest")->required()->envname("NERG_CONFIG");
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--variant", f.variant, "Model variant")->check(CLI::IsMember({"emit", "capture", "emit-capture"}));
  cmd->add_option("--resolution", f.resolution, "Render resolution WxH");
  cmd->add_option("--observer", f.observer, "Observer x,y,z or 'coupled'");
  cmd->add_option("--camera", f.camera, "Camera px,py,pz:lx,ly,lz[:fov_deg]");
  cmd->add_option("--falloff", f.falloff, "Occlusion fall-off d_f (scene units)");
  cmd->add_flag("--no-occlusion", f.overrides.no_occlusion, "Disable gaze occlusion");
}

nerg::ConfigOverrides collect(CLI::App* cmd, CommonFlags& f) {
  nerg::ConfigOverrides o = f.overrides;
  if (cmd->count("--seed")) o.seed = f.seed;
  if (cmd->count("--out")) o.out = f.out;
  if (cmd->count("--variant")) o.variant = f.variant;
  if (cmd->count("--resolution")) o.resolution = f.resolution;
  if (cmd->count("--observer")) o.observer = f.observer;
  if (cmd->count("--camera")) o.camera = f.camera;
  if (cmd->count("--falloff")) o.falloff = f.falloff;
  return o;
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int serve(const nerg::CommandContext& ctx, const std::string& host, int port, const std::string& max_res, std::size_t queue_depth) {
  nerg::ServiceLimits limits;
  limits.max_width = ctx.cfg.service.max_width;
  limits.max_height = ctx.cfg.service.max_height;
  if (!max_res.empty()) {
    int w = 0, h = 0;
    if (std::sscanf(max_res.c_str(), "%dx%d", &w, &h) != 2 || w < 1 || h < 1)
      throw nerg::ConfigError("--max-resolution: expected WxH");
    limits.max_width = w;
    limits.max_height = h;
  }
  limits.queue_depth = queue_depth;
  limits.render_threads = ctx.cfg.service.threads;
  nerg::FrameService service(limits);
  httplib::Server server;
  nerg::install_routes(server, service);
  const std::size_t workers = queue_depth + 2;  // headroom so overflow is answered with 429
  server.new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
  if (!server.bind_to_port(host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::exception_ptr load_error;
  std::thread loader([&] {
    try {
      service.load(nerg::session_from_run(ctx.cfg));
      *ctx.log << "serving on http://" << host << ":" << port << "\n" << std::flush;
    } catch (...) {
      load_error = std::current_exception();
      server.stop();
    }
  });
  server.listen_after_bind();
  loader.join();
  g_server = nullptr;
  if (load_error) std::rethrow_exception(load_error);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NeRG: gaze density fields over radiance-field scenes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(nerg::kToolVersion));

  struct Sub {
    const char* name;
    const char* help;
    CLI::App* app = nullptr;
    CommonFlags flags{};
  };
  std::vector<Sub> subs = {{"scene", "Validate the scene and write its canonical form"},
                           {"gaze", "Load or synthesize gaze rays"},
                           {"probes", "Aggregate gaze rays into train and test probes"},
                           {"train", "Train the gaze network"},
                           {"eval", "Evaluate a checkpoint on held-out probes"},
                           {"render", "Render color and gaze frames"},
                           {"bench", "Measure frame time across model variants"},
                           {"serve", "Run the HTTP frame service"},
                           {"pipeline", "scene, gaze, probes, train, eval and render in sequence"}};
  for (auto& s : subs) {
    s.app = app.add_subcommand(s.name, s.help);
    add_common(s.app, s.flags);
  }
  std::string host;
  int port = 0;
  std::string max_res;
  std::size_t queue_depth = 0;
  CLI::App* serve_cmd = subs[7].app;
  serve_cmd->add_option("--host", host, "Bind address")->envname("NERG_HOST");
  serve_cmd->add_option("--port", port, "Listen port")->envname("NERG_PORT");
  serve_cmd->add_option("--max-resolution", max_res, "Largest accepted frame WxH")->envname("NERG_MAX_RESOLUTION");
  serve_cmd->add_option("--queue-depth", queue_depth, "Concurrent renders before 429")->envname("NERG_QUEUE_DEPTH");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return nerg::kExitConfig;
  }

  for (auto& s : subs) {
    if (!s.app->parsed()) continue;
    try {
      const nerg::CommandContext ctx = nerg::make_context(s.flags.config, collect(s.app, s.flags));
      const std::string name = s.name;
      if (name == "scene") nerg::cmd_scene(ctx);
      else if (name == "gaze") nerg::cmd_gaze(ctx);
      else if (name == "probes") nerg::cmd_probes(ctx);
      else if (name == "train") nerg::cmd_train(ctx);
      else if (name == "eval") nerg::cmd_eval(ctx);
      else if (name == "render") nerg::cmd_render(ctx);
      else if (name == "bench") nerg::cmd_bench(ctx);
      else if (name == "pipeline") nerg::cmd_pipeline(ctx);
      else if (name == "serve")
        return serve(ctx, serve_cmd->count("--host") ? host : ctx.cfg.service.host,
                     serve_cmd->count("--port") ? port : ctx.cfg.service.port, max_res,
                     serve_cmd->count("--queue-depth") ? queue_depth : ctx.cfg.service.queue_depth);
      return nerg::kExitOk;
    } catch (const std::exception& e) {
      std::cerr << "nerg " << s.name << ": " << e.what() << "\n";
      return nerg::exit_code_for(e);
    }
  }
  return nerg::kExitFailure;
}
