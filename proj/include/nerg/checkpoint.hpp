// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0
//
// NERGCKPT model checkpoints and loss-history CSV.
//
// Layout: magic "NERGCKPT", u64 JSON length, JSON envelope, then the
// parameters as little-endian float32. Each envelope layer lists its shape
// and the float offsets of its weight and bias blocks in that section.
#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "nerg/binary_io.hpp"
#include "nerg/model.hpp"
#include "nerg/scene_io.hpp"
#include "nerg/train.hpp"

namespace nerg {

inline constexpr std::string_view kCheckpointMagic = "NERGCKPT";
inline constexpr int kCheckpointFormat = 1;

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  using json_util::from_vec3;
  return {{"variant", to_string(cfg.variant)},
          {"depth", cfg.depth},
          {"width", cfg.width},
          {"activation", to_string(cfg.activation)},
          {"encoding", {{"l_pos", cfg.encoding.l_pos}, {"l_dir", cfg.encoding.l_dir}, {"include_raw", cfg.encoding.include_raw}}},
          {"bounds", {{"min", from_vec3(cfg.bounds.lo)}, {"max", from_vec3(cfg.bounds.hi)}}}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  using json_util::to_vec3;
  ModelConfig cfg;
  cfg.variant = variant_from_string(j.at("variant").get<std::string>());
  cfg.depth = j.at("depth").get<int>();
  cfg.width = j.at("width").get<int>();
  cfg.activation = activation_from_string(j.at("activation").get<std::string>());
  const auto& e = j.at("encoding");
  cfg.encoding.l_pos = e.at("l_pos").get<int>();
  cfg.encoding.l_dir = e.at("l_dir").get<int>();
  cfg.encoding.include_raw = e.at("include_raw").get<bool>();
  cfg.bounds = {to_vec3(j.at("bounds").at("min"), "bounds.min"), to_vec3(j.at("bounds").at("max"), "bounds.max")};
  return cfg;
}

inline bin::Bytes encode_checkpoint(const NergModel& model, const nlohmann::json& metadata = nlohmann::json::object()) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : model.layers())
    layers.push_back({{"name", l.name},
                      {"shape", {l.rows, l.cols}},
                      {"weight_offset", l.weight_offset},
                      {"bias_offset", l.bias_offset},
                      {"count", l.count()}});
  const nlohmann::json env = {{"format", kCheckpointFormat},
                              {"model", model_config_to_json(model.config())},
                              {"layers", std::move(layers)},
                              {"param_count", model.param_count()},
                              {"dtype", "float32"},
                              {"seed", model.seed()},
                              {"metadata", metadata}};
  const std::string text = env.dump();
  bin::Bytes out;
  bin::put_magic(out, kCheckpointMagic);
  bin::put_u64(out, text.size());
  bin::put_bytes(out, text);
  for (double p : model.params()) bin::put_f32(out, static_cast<float>(p));
  return out;
}

struct Checkpoint {
  NergModel model;
  nlohmann::json metadata;
};

inline Checkpoint decode_checkpoint(const bin::Bytes& data) {
  bin::Reader in(data, "checkpoint");
  in.expect_magic(kCheckpointMagic);
  const std::uint64_t len = in.u64();
  if (len > in.remaining()) throw ParseError("checkpoint: header length out of range");
  try {
    const auto env = nlohmann::json::parse(in.string(static_cast<std::size_t>(len)));
    if (env.at("format").get<int>() != kCheckpointFormat) throw ParseError("checkpoint: unsupported format version");
    if (env.at("dtype").get<std::string>() != "float32") throw ParseError("checkpoint: unsupported dtype");
    const ModelConfig cfg = model_config_from_json(env.at("model"));
    const auto count = env.at("param_count").get<std::size_t>();
    if (in.remaining() != 4 * count) throw ParseError("checkpoint: parameter section size mismatch");
    std::vector<double> params(count);
    for (auto& p : params) p = in.f32();
    Checkpoint ck{NergModel(cfg, env.at("seed").get<std::uint64_t>(), std::move(params)), env.value("metadata", nlohmann::json::object())};
    // The stored layout must agree with the one the config implies.
    const auto& layers = env.at("layers");
    if (layers.size() != ck.model.layers().size()) throw ParseError("checkpoint: layer list mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = ck.model.layers()[i];
      if (layers[i].at("name").get<std::string>() != l.name || layers[i].at("weight_offset").get<std::size_t>() != l.weight_offset ||
          layers[i].at("bias_offset").get<std::size_t>() != l.bias_offset)
        throw ParseError("checkpoint: layer '" + l.name + "' does not match the model layout");
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what());
  }
}

inline void save_checkpoint(const NergModel& model, const std::filesystem::path& path,
                            const nlohmann::json& metadata = nlohmann::json::object()) {
  bin::write_file(path, encode_checkpoint(model, metadata));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(bin::read_file(path)); }

/// Rounds parameters through float32, matching a save/load round trip.
inline NergModel quantize_f32(const NergModel& model) {
  NergModel out = model;
  for (double& p : out.params()) p = static_cast<float>(p);
  return out;
}

inline std::string format_loss_history(std::span<const LossReport> history) {
  std::string out = "epoch,kld,cc,mae,total\n";
  char buf[160];
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& r = history[i];
    const int n = std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g\n", i + 1, r.kld, r.cc, r.mae, r.total);
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

}  // namespace nerg
