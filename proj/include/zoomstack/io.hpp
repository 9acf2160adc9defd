#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "zoomstack/errors.hpp"
#include "zoomstack/image.hpp"
#include "zoomstack/protocol.hpp"
#include "zoomstack/zoom.hpp"

namespace zoomstack {

// ---------------------------------------------------------------------------
// 8-bit PNG. [-1, 1] maps linearly onto [0, 255].

inline std::uint8_t to_byte(double v) {
  const double s = std::round((std::clamp(v, -1.0, 1.0) + 1.0) * 127.5);
  return static_cast<std::uint8_t>(s);
}

inline double from_byte(std::uint8_t b) { return b / 127.5 - 1.0; }

/// Writes a 1-channel image as grayscale, 3 channels as RGB, 4 as RGBA.
inline void write_png(const std::filesystem::path& path, const Image& x) {
  const int color = [&] {
    switch (x.channels()) {
      case 1: return PNG_COLOR_TYPE_GRAY;
      case 3: return PNG_COLOR_TYPE_RGB;
      case 4: return PNG_COLOR_TYPE_RGBA;
      default: throw ValidationError("PNG output supports 1, 3 or 4 channels, got " + std::to_string(x.channels()));
    }
  }();
  std::unique_ptr<FILE, decltype(&std::fclose)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw ValidationError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw ValidationError("libpng initialisation failed");
  }
  std::vector<std::uint8_t> rows(x.size());
  auto v = x.values();
  for (std::size_t k = 0; k < v.size(); ++k) rows[k] = to_byte(v[k]);
  std::vector<png_bytep> row_ptrs(x.height());
  for (int r = 0; r < x.height(); ++r)
    row_ptrs[r] = rows.data() + static_cast<std::size_t>(r) * x.width() * x.channels();
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ValidationError("failed writing PNG " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, x.width(), x.height(), 8, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Reads any 8/16-bit PNG and converts it to `channels` (1 = gray, 3 = RGB).
inline Image read_png(const std::filesystem::path& path, int channels = 3) {
  if (channels != 1 && channels != 3) throw ValidationError("PNG input supports 1 or 3 channels");
  std::unique_ptr<FILE, decltype(&std::fclose)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!fp) throw ValidationError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError("libpng initialisation failed");
  }
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError("failed reading PNG " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  const bool gray_in = color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA;
  if (channels == 3 && gray_in) png_set_gray_to_rgb(png);
  if (channels == 1 && !gray_in) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);
  const auto rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != static_cast<std::size_t>(w) * channels) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError("unexpected PNG layout in " + path.string());
  }
  pixels.resize(rowbytes * h);
  row_ptrs.resize(h);
  for (int r = 0; r < h; ++r) row_ptrs[r] = pixels.data() + rowbytes * r;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image x(h, w, channels);
  auto v = x.values();
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = from_byte(pixels[k]);
  return x;
}

// ---------------------------------------------------------------------------
// ZSTK: "ZSTK", u32 version, u32 N, H, W, C, p, then N*H*W*C f32,
// level-major, row-major, channel-last, all little-endian.

inline constexpr std::uint32_t kZstkVersion = 1;

inline std::vector<std::uint8_t> encode_zstk(const ZoomStack& stack) {
  const auto& s = stack.schedule();
  wire::ByteWriter w;
  const std::uint8_t magic[4] = {'Z', 'S', 'T', 'K'};
  w.bytes(magic);
  w.u32(kZstkVersion);
  w.u32(static_cast<std::uint32_t>(s.levels()));
  w.u32(static_cast<std::uint32_t>(s.height()));
  w.u32(static_cast<std::uint32_t>(s.width()));
  w.u32(static_cast<std::uint32_t>(s.channels()));
  w.u32(static_cast<std::uint32_t>(s.p()));
  for (const auto& layer : stack.layers())
    for (double v : layer.values()) w.f32(static_cast<float>(v));
  return w.take();
}

inline ZoomStack decode_zstk(std::span<const std::uint8_t> bytes) {
  wire::BufferSource src(bytes);
  try {
    std::array<std::uint8_t, 4> magic;
    src.read_exact(magic);
    if (magic != std::array<std::uint8_t, 4>{'Z', 'S', 'T', 'K'}) throw ValidationError("not a ZSTK file");
    const std::uint32_t version = src.u32();
    if (version != kZstkVersion) throw ValidationError("unsupported ZSTK version " + std::to_string(version));
    const auto n = src.u32(), h = src.u32(), w = src.u32(), c = src.u32(), p = src.u32();
    if (n > 64 || h > (1u << 16) || w > (1u << 16) || c > 16 || p > (1u << 16))
      throw ValidationError("ZSTK header out of range");
    const ZoomSchedule sched(static_cast<int>(p), static_cast<int>(n), static_cast<int>(h), static_cast<int>(w),
                             static_cast<int>(c));
    const std::size_t per_layer = static_cast<std::size_t>(h) * w * c;
    if (src.remaining() != per_layer * n * 4)
      throw ValidationError("ZSTK payload size " + std::to_string(src.remaining()) + " does not match header");
    std::vector<Image> layers;
    for (std::uint32_t i = 0; i < n; ++i)
      layers.push_back(wire::from_wire(src.floats(per_layer), static_cast<int>(h), static_cast<int>(w),
                                       static_cast<int>(c)));
    return ZoomStack(sched, std::move(layers));
  } catch (const ProtocolError& e) {
    throw ValidationError(std::string("truncated ZSTK data: ") + e.what());
  }
}

inline void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw ValidationError("failed writing " + path.string());
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline void write_zstk(const std::filesystem::path& path, const ZoomStack& stack) {
  write_bytes(path, encode_zstk(stack));
}

inline ZoomStack read_zstk(const std::filesystem::path& path) { return decode_zstk(read_bytes(path)); }

}  // namespace zoomstack
