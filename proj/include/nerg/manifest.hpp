// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run manifests: the resolved config, seeds, tool version, and SHA-256 of
// every input and output file. Timestamps live only here.
#pragma once

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "nerg/binary_io.hpp"

namespace nerg {

inline constexpr std::string_view kToolVersion = "0.1.0";

inline std::string sha256_hex(std::span<const std::uint8_t> data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

inline std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(bin::read_file(path)); }

class Manifest {
 public:
  Manifest(std::string command, nlohmann::json config)
      : command_(std::move(command)), config_(std::move(config)), start_(std::chrono::steady_clock::now()) {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    started_at_ = buf;
  }

  void add_input(const std::filesystem::path& p) { inputs_.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}}); }
  void add_output(const std::filesystem::path& p) { outputs_.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}}); }
  void set_seed(const std::string& name, std::uint64_t seed) { seeds_[name] = seed; }
  nlohmann::json& extra() { return extra_; }

  nlohmann::json to_json() const {
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    nlohmann::json j = {{"command", command_},
                        {"version", kToolVersion},
                        {"config", config_},
                        {"seeds", seeds_},
                        {"inputs", inputs_},
                        {"outputs", outputs_},
                        {"started_at", started_at_},
                        {"elapsed_ms", ms}};
    if (!extra_.empty()) j["details"] = extra_;
    return j;
  }

  std::filesystem::path write(const std::filesystem::path& dir) const {
    const auto path = dir / (command_ + ".manifest.json");
    bin::write_text(path, to_json().dump(2) + "\n");
    return path;
  }

 private:
  std::string command_;
  nlohmann::json config_;
  nlohmann::json seeds_ = nlohmann::json::object();
  nlohmann::json inputs_ = nlohmann::json::array();
  nlohmann::json outputs_ = nlohmann::json::array();
  nlohmann::json extra_ = nlohmann::json::object();
  std::string started_at_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace nerg
