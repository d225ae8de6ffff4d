#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "gir/image.hpp"

namespace gir {

namespace io_detail {

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    fail(ErrorCode::FileNotFound, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::FileNotFound, path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

/// Writes next to the destination and renames, so readers never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const void* bytes, std::size_t n) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot open " + tmp.string() + " for writing");
    out.write(static_cast<const char*>(bytes), static_cast<std::streamsize>(n));
    out.flush();
    if (!out) fail(ErrorCode::IoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorCode::IoError, "cannot rename into " + path.string());
  }
}

inline std::uint8_t quantize8(float s) noexcept {
  const double v = std::nearbyint(static_cast<double>(std::clamp(s, 0.0f, 1.0f)) * 255.0);
  return static_cast<std::uint8_t>(v);
}

struct PngReadState {
  const unsigned char* data;
  std::size_t size;
  std::size_t pos;
};

inline void png_read_cb(png_structp png, png_bytep out, png_size_t n) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->pos + n > st->size) png_error(png, "truncated PNG stream");
  std::memcpy(out, st->data + st->pos, n);
  st->pos += n;
}

inline void png_write_cb(png_structp png, png_bytep in, png_size_t n) {
  auto* buf = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(png));
  buf->insert(buf->end(), in, in + n);
}

inline void png_flush_cb(png_structp) {}

[[noreturn]] inline void png_error_cb(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  png_longjmp(png, 1);
}

inline void png_warning_cb(png_structp, png_const_charp) {}

inline ImageF32 decode_png(const std::vector<unsigned char>& bytes, const std::string& name) {
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_cb, png_warning_cb);
  if (!png) fail(ErrorCode::IoError, "libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  PngReadState st{bytes.data(), bytes.size(), 0};
  std::vector<unsigned char> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 w = 0, h = 0;
  int depth = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::CorruptStream, name + ": " + err);
  }
  png_set_read_fn(png, &st, png_read_cb);
  png_read_info(png, info);
  int color_type = 0;
  png_get_IHDR(png, info, &w, &h, &depth, &color_type, nullptr, nullptr, nullptr);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  if (png_get_channels(png, info) != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::UnsupportedFormat, name + ": unexpected channel layout");
  }
  pixels.resize(rowbytes * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  ImageF32 img(static_cast<int>(w), static_cast<int>(h));
  auto out = img.data();
  if (out_depth == 16) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      const unsigned v = (pixels[2 * i] << 8) | pixels[2 * i + 1];  // PNG is big-endian
      out[i] = static_cast<float>(v / 65535.0);
    }
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(pixels[i] / 255.0);
  }
  return img;
}

inline std::vector<unsigned char> encode_png(const ImageF32& img) {
  std::string err;
  std::vector<unsigned char> buf;
  std::vector<unsigned char> pixels(img.size());
  const auto in = img.data();
  for (std::size_t i = 0; i < in.size(); ++i) pixels[i] = quantize8(in[i]);
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height()));
  for (int y = 0; y < img.height(); ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * img.width() * 3;

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_cb, png_warning_cb);
  if (!png) fail(ErrorCode::IoError, "libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::IoError, "PNG encoding failed: " + err);
  }
  png_set_write_fn(png, &buf, png_write_cb, png_flush_cb);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return buf;
}

inline ImageF32 decode_ppm(const std::vector<unsigned char>& bytes, const std::string& name) {
  std::size_t pos = 2;
  auto skip_ws = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_ws();
    long v = 0;
    int digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (++digits > 9) fail(ErrorCode::CorruptStream, name + ": PPM header value too large");
    }
    if (digits == 0) fail(ErrorCode::CorruptStream, name + ": malformed PPM header");
    return v;
  };
  const long w = read_int();
  const long h = read_int();
  const long maxval = read_int();
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) fail(ErrorCode::CorruptStream, name + ": malformed PPM header");
  ++pos;
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) fail(ErrorCode::CorruptStream, name + ": invalid PPM header");
  const std::size_t bps = maxval > 255 ? 2 : 1;
  const std::size_t need = static_cast<std::size_t>(w) * h * 3 * bps;
  if (bytes.size() - pos < need) fail(ErrorCode::CorruptStream, name + ": truncated PPM raster");
  ImageF32 img(static_cast<int>(w), static_cast<int>(h));
  auto out = img.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    unsigned v = bps == 2 ? (bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1] : bytes[pos + i];
    out[i] = static_cast<float>(static_cast<double>(v) / maxval);
  }
  img.clamp01();
  return img;
}

inline std::vector<unsigned char> encode_ppm(const ImageF32& img) {
  const std::string header = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<unsigned char> buf(header.begin(), header.end());
  buf.reserve(buf.size() + img.size());
  for (float s : img.data()) buf.push_back(quantize8(s));
  return buf;
}

inline bool has_ppm_extension(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext == ".ppm" || ext == ".pnm";
}

}  // namespace io_detail

/// Reads PNG (8/16-bit, gray or RGB) or binary PPM, sniffing the signature.
inline ImageF32 load_image(const std::filesystem::path& path) {
  const auto bytes = io_detail::read_file(path);
  static constexpr unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) {
    return io_detail::decode_png(bytes, path.string());
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') {
    return io_detail::decode_ppm(bytes, path.string());
  }
  fail(ErrorCode::UnsupportedFormat, path.string() + ": not a PNG or binary PPM file");
}

/// Writes an 8-bit file (PNG, or PPM when the extension says so). Samples
/// quantize as round(s*255) with ties to even.
inline void save_image(const ImageF32& img, const std::filesystem::path& path) {
  const auto bytes = io_detail::has_ppm_extension(path) ? io_detail::encode_ppm(img) : io_detail::encode_png(img);
  io_detail::write_file_atomic(path, bytes.data(), bytes.size());
}

/// Snaps every sample to the nearest 8-bit level, i.e. what a save/load round trip produces.
inline ImageF32 quantize_to_8bit(const ImageF32& img) {
  ImageF32 out = img;
  for (float& s : out.data()) s = static_cast<float>(io_detail::quantize8(s) / 255.0);
  return out;
}

}  // namespace gir
