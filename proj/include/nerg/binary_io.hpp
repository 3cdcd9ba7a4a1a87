// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0
//
// Little-endian byte helpers shared by the binary file formats
// (NERGVOX1, NERGPRB1, NERGCKPT, NERGFRM1).
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "nerg/error.hpp"

namespace nerg::bin {

using Bytes = std::vector<std::uint8_t>;

template <typename T>
inline void put_le(Bytes& out, T value) {
  static_assert(std::is_trivially_copyable_v<T> && (sizeof(T) == 4 || sizeof(T) == 8));
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U u = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

inline void put_u32(Bytes& out, std::uint32_t v) { put_le(out, v); }
inline void put_u64(Bytes& out, std::uint64_t v) { put_le(out, v); }
inline void put_f32(Bytes& out, float v) { put_le(out, v); }

inline void put_magic(Bytes& out, std::string_view magic) { out.insert(out.end(), magic.begin(), magic.end()); }

inline void put_bytes(Bytes& out, std::string_view s) { out.insert(out.end(), s.begin(), s.end()); }

/// Bounds-checked sequential reader over a byte buffer.
class Reader {
 public:
  explicit Reader(const Bytes& data, std::string what = "file") : data_(data), what_(std::move(what)) {}

  void expect_magic(std::string_view magic) {
    need(magic.size());
    if (std::memcmp(data_.data() + pos_, magic.data(), magic.size()) != 0)
      throw ParseError(what_ + ": bad magic, expected " + std::string(magic));
    pos_ += magic.size();
  }

  template <typename T>
  T get_le() {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    need(sizeof(T));
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(data_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return std::bit_cast<T>(u);
  }

  std::uint32_t u32() { return get_le<std::uint32_t>(); }
  std::uint64_t u64() { return get_le<std::uint64_t>(); }
  float f32() { return get_le<float>(); }

  std::string string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  void seek(std::size_t pos) {
    if (pos > data_.size()) throw ParseError(what_ + ": offset out of range");
    pos_ = pos;
  }

 private:
  void need(std::size_t n) const {
    if (n > data_.size() - pos_) throw ParseError(what_ + ": truncated");
  }

  const Bytes& data_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, const Bytes& data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  return std::string(b.begin(), b.end());
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, Bytes(text.begin(), text.end()));
}

}  // namespace nerg::bin
