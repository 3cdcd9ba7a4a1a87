// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0
//
// In-memory PNG encode/decode (8-bit RGB) and the NERGFRM1 frame dump.
//
// NERGFRM1 layout: magic, u32 width, u32 height, then six little-endian
// float32 planes of width*height values, row-major: r, g, b, depth, gaze,
// visibility.
#pragma once

#include <png.h>

#include <cstring>
#include <filesystem>
#include <string>

#include "nerg/binary_io.hpp"
#include "nerg/render.hpp"

namespace nerg {

namespace detail {

struct PngWriteState {
  bin::Bytes* out;
};

inline void png_write_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* st = static_cast<PngWriteState*>(png_get_io_ptr(png));
  st->out->insert(st->out->end(), data, data + len);
}

inline void png_flush_cb(png_structp) {}

struct PngReadState {
  const bin::Bytes* in;
  std::size_t pos;
};

inline void png_read_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->pos + len > st->in->size()) png_error(png, "truncated PNG");
  std::memcpy(data, st->in->data() + st->pos, len);
  st->pos += len;
}

[[noreturn]] inline void png_error_cb(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  png_longjmp(png, 1);
}

inline void png_warning_cb(png_structp, png_const_charp) {}

}  // namespace detail

inline bin::Bytes encode_png(const Image8& img) {
  if (img.width < 1 || img.height < 1 || img.data.size() != 3 * static_cast<std::size_t>(img.width) * img.height)
    throw DomainError("png: image buffer does not match its dimensions");
  bin::Bytes out;
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_error_cb, detail::png_warning_cb);
  if (!png) throw std::runtime_error("png: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    throw std::runtime_error("png encode failed: " + err);
  }
  detail::PngWriteState st{&out};
  png_set_write_fn(png, &st, detail::png_write_cb, detail::png_flush_cb);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    png_write_row(png, const_cast<png_bytep>(img.data.data() + 3 * static_cast<std::size_t>(y) * img.width));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

/// Decodes any 8-bit PNG to RGB (alpha and palettes are expanded/dropped).
inline Image8 decode_png(const bin::Bytes& data) {
  if (data.size() < 8 || png_sig_cmp(data.data(), 0, 8) != 0) throw ParseError("png: bad signature");
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_error_cb, detail::png_warning_cb);
  if (!png) throw std::runtime_error("png: cannot create read struct");
  png_infop info = png_create_info_struct(png);
  Image8 img;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    throw ParseError("png decode failed: " + err);
  }
  detail::PngReadState st{&data, 0};
  png_set_read_fn(png, &st, detail::png_read_cb);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.data.resize(3 * static_cast<std::size_t>(img.width) * img.height);
  for (int y = 0; y < img.height; ++y) png_read_row(png, img.data.data() + 3 * static_cast<std::size_t>(y) * img.width, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

inline void save_png(const Image8& img, const std::filesystem::path& path) { bin::write_file(path, encode_png(img)); }

inline constexpr std::string_view kFrameMagic = "NERGFRM1";

inline bin::Bytes encode_frame_dump(const GazeFrame& f) {
  bin::Bytes out;
  out.reserve(16 + 24 * f.size());
  bin::put_magic(out, kFrameMagic);
  bin::put_u32(out, static_cast<std::uint32_t>(f.width));
  bin::put_u32(out, static_cast<std::uint32_t>(f.height));
  for (const Rgb& c : f.rgb) bin::put_f32(out, static_cast<float>(c.r));
  for (const Rgb& c : f.rgb) bin::put_f32(out, static_cast<float>(c.g));
  for (const Rgb& c : f.rgb) bin::put_f32(out, static_cast<float>(c.b));
  for (const auto* plane : {&f.depth, &f.gaze, &f.visibility})
    for (double v : *plane) bin::put_f32(out, static_cast<float>(v));
  return out;
}

/// Planes come back as float32-rounded doubles; flags are not stored.
inline GazeFrame decode_frame_dump(const bin::Bytes& data) {
  bin::Reader in(data, "frame dump");
  in.expect_magic(kFrameMagic);
  const auto w = in.u32();
  const auto h = in.u32();
  if (w == 0 || h == 0 || w > 65536 || h > 65536) throw ParseError("frame dump: bad dimensions");
  GazeFrame f(static_cast<int>(w), static_cast<int>(h));
  if (in.remaining() != 24 * f.size()) throw ParseError("frame dump: payload size does not match dimensions");
  for (Rgb& c : f.rgb) c.r = in.f32();
  for (Rgb& c : f.rgb) c.g = in.f32();
  for (Rgb& c : f.rgb) c.b = in.f32();
  for (auto* plane : {&f.depth, &f.gaze, &f.visibility})
    for (double& v : *plane) v = in.f32();
  return f;
}

inline void save_frame_dump(const GazeFrame& f, const std::filesystem::path& path) { bin::write_file(path, encode_frame_dump(f)); }

}  // namespace nerg
