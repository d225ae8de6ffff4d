#pragma once

// Baseline sequential JPEG (JFIF) encoder and decoder.
//
// The encoder always produces 4:2:0 streams with the example quantization
// and Huffman tables from ITU-T T.81 Annex K. The decoder accepts baseline
// Huffman streams with 8-bit precision: our own output, plus foreign 4:2:0,
// 4:2:2, 4:4:4 and grayscale files, including restart intervals.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "gir/image.hpp"
#include "gir/imaging.hpp"

namespace gir::jpeg {

/// kZigzag[i] is the natural (row-major) index of the i-th zig-zag coefficient.
inline constexpr std::array<int, 64> kZigzag = {
    0,  1,  8,  16, 9,  2,  3,  10, 17, 24, 32, 25, 18, 11, 4,  5,  12, 19, 26, 33, 40, 48,
    41, 34, 27, 20, 13, 6,  7,  14, 21, 28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23,
    30, 37, 44, 51, 58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63};

// Annex K example tables, natural order.
inline constexpr std::array<int, 64> kLumaBase = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

inline constexpr std::array<int, 64> kChromaBase = {
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

/// Quantizer steps in zig-zag order, as they appear in a DQT segment.
struct QuantTables {
  std::array<int, 64> luma{};
  std::array<int, 64> chroma{};
  friend bool operator==(const QuantTables&, const QuantTables&) = default;
};

inline QuantTables quality_to_tables(int quality) {
  if (quality < 1 || quality > 100) {
    fail(ErrorCode::InvalidParam, "JPEG quality must be in [1,100], got " + std::to_string(quality));
  }
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  QuantTables t;
  for (int i = 0; i < 64; ++i) {
    const int nat = kZigzag[i];
    t.luma[i] = std::clamp((kLumaBase[nat] * scale + 50) / 100, 1, 255);
    t.chroma[i] = std::clamp((kChromaBase[nat] * scale + 50) / 100, 1, 255);
  }
  return t;
}

using Block = std::array<double, 64>;

namespace detail {

inline const std::array<double, 64>& dct_basis() {
  // basis[u*8 + x] = C(u)/2 * cos((2x+1) u pi / 16)
  static const std::array<double, 64> basis = [] {
    std::array<double, 64> b{};
    for (int u = 0; u < 8; ++u) {
      const double cu = u == 0 ? std::numbers::sqrt2 / 2.0 : 1.0;
      for (int x = 0; x < 8; ++x) {
        b[u * 8 + x] = 0.5 * cu * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
      }
    }
    return b;
  }();
  return basis;
}

}  // namespace detail

/// Orthonormal 8x8 type-II DCT; input and output in natural order.
inline Block forward_dct(const Block& f) {
  const auto& b = detail::dct_basis();
  Block tmp{}, out{};
  for (int y = 0; y < 8; ++y)
    for (int u = 0; u < 8; ++u) {
      double acc = 0.0;
      for (int x = 0; x < 8; ++x) acc += b[u * 8 + x] * f[y * 8 + x];
      tmp[y * 8 + u] = acc;
    }
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      double acc = 0.0;
      for (int y = 0; y < 8; ++y) acc += b[v * 8 + y] * tmp[y * 8 + u];
      out[v * 8 + u] = acc;
    }
  return out;
}

inline Block inverse_dct(const Block& F) {
  const auto& b = detail::dct_basis();
  Block tmp{}, out{};
  for (int v = 0; v < 8; ++v)
    for (int x = 0; x < 8; ++x) {
      double acc = 0.0;
      for (int u = 0; u < 8; ++u) acc += b[u * 8 + x] * F[v * 8 + u];
      tmp[v * 8 + x] = acc;
    }
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      double acc = 0.0;
      for (int v = 0; v < 8; ++v) acc += b[v * 8 + y] * tmp[v * 8 + x];
      out[y * 8 + x] = acc;
    }
  return out;
}

/// Huffman table in DHT form: code counts per length 1..16 and symbols.
struct HuffmanSpec {
  std::array<std::uint8_t, 16> bits{};
  std::vector<std::uint8_t> values;
};

inline const HuffmanSpec& dc_luma_spec() {
  static const HuffmanSpec s{{0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0},
                             {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}};
  return s;
}

inline const HuffmanSpec& dc_chroma_spec() {
  static const HuffmanSpec s{{0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0},
                             {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}};
  return s;
}

inline const HuffmanSpec& ac_luma_spec() {
  static const HuffmanSpec s{
      {0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7d},
      {0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61, 0x07, 0x22,
       0x71, 0x14, 0x32, 0x81, 0x91, 0xa1, 0x08, 0x23, 0x42, 0xb1, 0xc1, 0x15, 0x52, 0xd1, 0xf0, 0x24, 0x33,
       0x62, 0x72, 0x82, 0x09, 0x0a, 0x16, 0x17, 0x18, 0x19, 0x1a, 0x25, 0x26, 0x27, 0x28, 0x29, 0x2a, 0x34,
       0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55,
       0x56, 0x57, 0x58, 0x59, 0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75, 0x76,
       0x77, 0x78, 0x79, 0x7a, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89, 0x8a, 0x92, 0x93, 0x94, 0x95, 0x96,
       0x97, 0x98, 0x99, 0x9a, 0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5,
       0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3, 0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3, 0xd4,
       0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe1, 0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf1,
       0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa}};
  return s;
}

inline const HuffmanSpec& ac_chroma_spec() {
  static const HuffmanSpec s{
      {0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77},
      {0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21, 0x31, 0x06, 0x12, 0x41, 0x51, 0x07, 0x61, 0x71, 0x13,
       0x22, 0x32, 0x81, 0x08, 0x14, 0x42, 0x91, 0xa1, 0xb1, 0xc1, 0x09, 0x23, 0x33, 0x52, 0xf0, 0x15, 0x62,
       0x72, 0xd1, 0x0a, 0x16, 0x24, 0x34, 0xe1, 0x25, 0xf1, 0x17, 0x18, 0x19, 0x1a, 0x26, 0x27, 0x28, 0x29,
       0x2a, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54,
       0x55, 0x56, 0x57, 0x58, 0x59, 0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75,
       0x76, 0x77, 0x78, 0x79, 0x7a, 0x82, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89, 0x8a, 0x92, 0x93, 0x94,
       0x95, 0x96, 0x97, 0x98, 0x99, 0x9a, 0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3,
       0xb4, 0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3, 0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2,
       0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea,
       0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa}};
  return s;
}

/// Code words for each symbol, derived canonically from a spec.
class HuffmanEncoder {
 public:
  explicit HuffmanEncoder(const HuffmanSpec& spec) {
    std::uint32_t code = 0;
    std::size_t k = 0;
    for (int len = 1; len <= 16; ++len) {
      for (int i = 0; i < spec.bits[len - 1]; ++i, ++k) {
        code_[spec.values.at(k)] = code++;
        length_[spec.values.at(k)] = static_cast<std::uint8_t>(len);
      }
      code <<= 1;
    }
  }
  std::uint32_t code(std::uint8_t sym) const { return code_[sym]; }
  int length(std::uint8_t sym) const { return length_[sym]; }

 private:
  std::array<std::uint32_t, 256> code_{};
  std::array<std::uint8_t, 256> length_{};
};

class HuffmanDecoder {
 public:
  HuffmanDecoder() = default;
  explicit HuffmanDecoder(const HuffmanSpec& spec) : values_(spec.values) {
    std::int32_t code = 0;
    std::int32_t k = 0;
    for (int len = 1; len <= 16; ++len) {
      const int n = spec.bits[len - 1];
      valptr_[len] = k;
      mincode_[len] = code;
      code += n;
      k += n;
      maxcode_[len] = n ? code - 1 : -1;
      code <<= 1;
    }
    if (static_cast<std::size_t>(k) != values_.size()) {
      fail(ErrorCode::CorruptStream, "Huffman table symbol count mismatch");
    }
    valid_ = true;
  }

  bool valid() const noexcept { return valid_; }

  template <typename Reader>
  std::uint8_t decode(Reader& in) const {
    std::int32_t code = 0;
    for (int len = 1; len <= 16; ++len) {
      code = (code << 1) | in.read_bit();
      if (code <= maxcode_[len]) return values_[valptr_[len] + code - mincode_[len]];
    }
    fail(ErrorCode::CorruptStream, "invalid Huffman code");
  }

 private:
  std::vector<std::uint8_t> values_;
  std::array<std::int32_t, 17> mincode_{};
  std::array<std::int32_t, 17> maxcode_{};
  std::array<std::int32_t, 17> valptr_{};
  bool valid_ = false;
};

/// MSB-first bit packer with 0xFF byte stuffing.
class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void put(std::uint32_t bits, int count) {
    for (int i = count - 1; i >= 0; --i) {
      acc_ = static_cast<std::uint8_t>((acc_ << 1) | ((bits >> i) & 1u));
      if (++filled_ == 8) emit();
    }
  }

  /// Pads the final partial byte with 1-bits.
  void flush() {
    while (filled_ != 0) put(1, 1);
  }

 private:
  void emit() {
    out_.push_back(acc_);
    if (acc_ == 0xFF) out_.push_back(0x00);
    acc_ = 0;
    filled_ = 0;
  }

  std::vector<std::uint8_t>& out_;
  std::uint8_t acc_ = 0;
  int filled_ = 0;
};

/// Reads entropy-coded bits; stops at any marker and refuses to read past it.
class BitReader {
 public:
  BitReader(std::span<const std::uint8_t> data, std::size_t pos) : data_(data), pos_(pos) {}

  int read_bit() {
    if (count_ == 0) fill();
    --count_;
    return (byte_ >> count_) & 1;
  }

  std::int32_t read_bits(int n) {
    std::int32_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 1) | read_bit();
    return v;
  }

  /// Discards buffered bits and consumes an expected RSTn marker.
  void restart(int expected) {
    count_ = 0;
    if (pos_ + 1 >= data_.size() || data_[pos_] != 0xFF || data_[pos_ + 1] != 0xD0 + (expected & 7)) {
      fail(ErrorCode::CorruptStream, "missing restart marker");
    }
    pos_ += 2;
  }

  std::size_t position() const noexcept { return pos_; }

 private:
  void fill() {
    if (pos_ >= data_.size()) fail(ErrorCode::CorruptStream, "Huffman data underflow (stream truncated)");
    const std::uint8_t b = data_[pos_];
    if (b == 0xFF) {
      if (pos_ + 1 >= data_.size()) fail(ErrorCode::CorruptStream, "Huffman data underflow (stream truncated)");
      if (data_[pos_ + 1] != 0x00) fail(ErrorCode::CorruptStream, "Huffman data underflow (marker reached)");
      pos_ += 2;
    } else {
      pos_ += 1;
    }
    byte_ = b;
    count_ = 8;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_;
  std::uint8_t byte_ = 0;
  int count_ = 0;
};

namespace detail {

inline int magnitude_category(int v) noexcept {
  unsigned a = static_cast<unsigned>(v < 0 ? -v : v);
  int n = 0;
  while (a) {
    ++n;
    a >>= 1;
  }
  return n;
}

inline std::uint32_t magnitude_bits(int v, int n) noexcept {
  return static_cast<std::uint32_t>(v < 0 ? v + (1 << n) - 1 : v) & ((1u << n) - 1);
}

inline int extend(std::int32_t bits, int n) noexcept {
  return bits < (1 << (n - 1)) ? bits - (1 << n) + 1 : bits;
}

}  // namespace detail

/// Entropy-codes one block of quantized coefficients given in zig-zag order.
inline void encode_block(const std::array<int, 64>& zz, int& dc_pred, const HuffmanEncoder& dc,
                         const HuffmanEncoder& ac, BitWriter& out) {
  const int diff = zz[0] - dc_pred;
  dc_pred = zz[0];
  const int dn = detail::magnitude_category(diff);
  out.put(dc.code(static_cast<std::uint8_t>(dn)), dc.length(static_cast<std::uint8_t>(dn)));
  if (dn) out.put(detail::magnitude_bits(diff, dn), dn);
  int run = 0;
  for (int i = 1; i < 64; ++i) {
    const int v = zz[i];
    if (v == 0) {
      ++run;
      continue;
    }
    while (run > 15) {
      out.put(ac.code(0xF0), ac.length(0xF0));
      run -= 16;
    }
    const int n = detail::magnitude_category(v);
    const auto sym = static_cast<std::uint8_t>((run << 4) | n);
    out.put(ac.code(sym), ac.length(sym));
    out.put(detail::magnitude_bits(v, n), n);
    run = 0;
  }
  if (run > 0) out.put(ac.code(0x00), ac.length(0x00));
}

inline std::array<int, 64> decode_block(BitReader& in, int& dc_pred, const HuffmanDecoder& dc,
                                        const HuffmanDecoder& ac) {
  std::array<int, 64> zz{};
  const int dn = dc.decode(in);
  if (dn > 11) fail(ErrorCode::CorruptStream, "DC magnitude category out of range");
  const int diff = dn ? detail::extend(in.read_bits(dn), dn) : 0;
  dc_pred += diff;
  zz[0] = dc_pred;
  for (int i = 1; i < 64;) {
    const int sym = ac.decode(in);
    const int run = sym >> 4;
    const int n = sym & 15;
    if (n == 0) {
      if (run == 15) {
        i += 16;
        continue;
      }
      break;  // EOB
    }
    i += run;
    if (i > 63) fail(ErrorCode::CorruptStream, "AC run exceeds block");
    zz[i++] = detail::extend(in.read_bits(n), n);
  }
  return zz;
}

/// A complete JFIF byte stream.
struct JpegStream {
  std::vector<std::uint8_t> bytes;
};

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, int v) {
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

inline void put_marker(std::vector<std::uint8_t>& out, std::uint8_t m) {
  out.push_back(0xFF);
  out.push_back(m);
}

inline void put_dht(std::vector<std::uint8_t>& out, int cls_id, const HuffmanSpec& s) {
  out.push_back(static_cast<std::uint8_t>(cls_id));
  out.insert(out.end(), s.bits.begin(), s.bits.end());
  out.insert(out.end(), s.values.begin(), s.values.end());
}

struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> v;
  double at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

inline std::array<int, 64> quantize_block(const Plane& p, int bx, int by, const std::array<int, 64>& q_zz) {
  Block f{};
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) f[y * 8 + x] = p.at(bx * 8 + x, by * 8 + y) - 128.0;
  const Block F = forward_dct(f);
  std::array<int, 64> zz{};
  for (int i = 0; i < 64; ++i) {
    const int limit = i == 0 ? 2047 : 1023;
    const double q = std::nearbyint(F[kZigzag[i]] / q_zz[i]);
    zz[i] = std::clamp(static_cast<int>(q), -limit, limit);
  }
  return zz;
}

}  // namespace detail

inline JpegStream jpeg_encode(const ImageF32& img, int quality) {
  const QuantTables qt = quality_to_tables(quality);
  const int w = img.width();
  const int h = img.height();
  const int mcu_x = (w + 15) / 16;
  const int mcu_y = (h + 15) / 16;
  const int pw = mcu_x * 16;
  const int ph = mcu_y * 16;

  // 8-bit RGB -> YCbCr on the 0..255 scale, edge-replicated to whole MCUs.
  detail::Plane Y{pw, ph, std::vector<double>(static_cast<std::size_t>(pw) * ph)};
  detail::Plane Cb = Y, Cr = Y;
  for (int y = 0; y < ph; ++y) {
    const int sy = std::min(y, h - 1);
    for (int x = 0; x < pw; ++x) {
      const int sx = std::min(x, w - 1);
      std::array<double, 3> rgb{};
      for (int c = 0; c < 3; ++c) {
        rgb[c] = std::nearbyint(static_cast<double>(std::clamp(img.at(sx, sy, c), 0.0f, 1.0f)) * 255.0) / 255.0;
      }
      const auto ycc = color::rgb_to_ycc(rgb[0], rgb[1], rgb[2]);
      const std::size_t i = static_cast<std::size_t>(y) * pw + x;
      Y.v[i] = ycc[0] * 255.0;
      Cb.v[i] = ycc[1] * 255.0;
      Cr.v[i] = ycc[2] * 255.0;
    }
  }
  auto subsample = [&](const detail::Plane& p) {
    detail::Plane s{pw / 2, ph / 2, std::vector<double>(static_cast<std::size_t>(pw / 2) * (ph / 2))};
    for (int y = 0; y < s.height; ++y)
      for (int x = 0; x < s.width; ++x)
        s.v[static_cast<std::size_t>(y) * s.width + x] =
            0.25 * (p.at(2 * x, 2 * y) + p.at(2 * x + 1, 2 * y) + p.at(2 * x, 2 * y + 1) + p.at(2 * x + 1, 2 * y + 1));
    return s;
  };
  const detail::Plane Cb2 = subsample(Cb);
  const detail::Plane Cr2 = subsample(Cr);

  JpegStream js;
  auto& out = js.bytes;
  detail::put_marker(out, 0xD8);
  detail::put_marker(out, 0xE0);
  detail::put_u16(out, 16);
  for (char ch : std::string_view("JFIF\0", 5)) out.push_back(static_cast<std::uint8_t>(ch));
  out.insert(out.end(), {1, 1, 0, 0, 1, 0, 1, 0, 0});

  detail::put_marker(out, 0xDB);
  detail::put_u16(out, 2 + 2 * 65);
  out.push_back(0x00);
  for (int v : qt.luma) out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(0x01);
  for (int v : qt.chroma) out.push_back(static_cast<std::uint8_t>(v));

  detail::put_marker(out, 0xC0);
  detail::put_u16(out, 17);
  out.push_back(8);
  detail::put_u16(out, h);
  detail::put_u16(out, w);
  out.insert(out.end(), {3, 1, 0x22, 0, 2, 0x11, 1, 3, 0x11, 1});

  detail::put_marker(out, 0xC4);
  const auto dht_len = [](const HuffmanSpec& s) { return 17 + static_cast<int>(s.values.size()); };
  detail::put_u16(out, 2 + dht_len(dc_luma_spec()) + dht_len(ac_luma_spec()) + dht_len(dc_chroma_spec()) +
                           dht_len(ac_chroma_spec()));
  detail::put_dht(out, 0x00, dc_luma_spec());
  detail::put_dht(out, 0x10, ac_luma_spec());
  detail::put_dht(out, 0x01, dc_chroma_spec());
  detail::put_dht(out, 0x11, ac_chroma_spec());

  detail::put_marker(out, 0xDA);
  detail::put_u16(out, 12);
  out.insert(out.end(), {3, 1, 0x00, 2, 0x11, 3, 0x11, 0, 63, 0});

  const HuffmanEncoder dcl(dc_luma_spec()), acl(ac_luma_spec());
  const HuffmanEncoder dcc(dc_chroma_spec()), acc(ac_chroma_spec());
  BitWriter bw(out);
  int pred_y = 0, pred_cb = 0, pred_cr = 0;
  for (int my = 0; my < mcu_y; ++my) {
    for (int mx = 0; mx < mcu_x; ++mx) {
      for (int b = 0; b < 4; ++b) {
        encode_block(detail::quantize_block(Y, mx * 2 + (b & 1), my * 2 + (b >> 1), qt.luma), pred_y, dcl, acl, bw);
      }
      encode_block(detail::quantize_block(Cb2, mx, my, qt.chroma), pred_cb, dcc, acc, bw);
      encode_block(detail::quantize_block(Cr2, mx, my, qt.chroma), pred_cr, dcc, acc, bw);
    }
  }
  bw.flush();
  detail::put_marker(out, 0xD9);
  return js;
}

namespace detail {

struct FrameComponent {
  int id = 0;
  int h = 1;
  int v = 1;
  int tq = 0;
  int td = 0;
  int ta = 0;
  int bw = 0;  // blocks per line (MCU-padded)
  int bh = 0;
  std::vector<double> samples;
};

class SegmentReader {
 public:
  explicit SegmentReader(std::span<const std::uint8_t> d) : d_(d) {}
  std::uint8_t u8() {
    if (pos_ >= d_.size()) fail(ErrorCode::CorruptStream, "unexpected end of JPEG stream");
    return d_[pos_++];
  }
  int u16() {
    const int hi = u8();
    return (hi << 8) | u8();
  }
  void skip(std::size_t n) {
    if (d_.size() - pos_ < n) fail(ErrorCode::CorruptStream, "segment runs past end of stream");
    pos_ += n;
  }
  std::size_t& position() { return pos_; }

 private:
  std::span<const std::uint8_t> d_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline ImageF32 jpeg_decode(std::span<const std::uint8_t> data) {
  if (data.size() < 4 || data[0] != 0xFF || data[1] != 0xD8) fail(ErrorCode::CorruptStream, "missing SOI marker");
  detail::SegmentReader rd(data);
  rd.skip(2);

  std::array<std::array<int, 64>, 4> qtab{};
  std::array<bool, 4> qtab_set{};
  std::array<HuffmanDecoder, 4> dc_tab, ac_tab;
  std::vector<detail::FrameComponent> comps;
  int width = 0, height = 0, hmax = 1, vmax = 1;
  int restart_interval = 0;
  bool frame_seen = false, scan_done = false;

  for (;;) {
    std::uint8_t b = rd.u8();
    if (b != 0xFF) fail(ErrorCode::CorruptStream, "expected marker");
    std::uint8_t m = rd.u8();
    while (m == 0xFF) m = rd.u8();
    if (m == 0xD9) break;
    if (m == 0xD8 || (m >= 0xD0 && m <= 0xD7) || m == 0x01) fail(ErrorCode::CorruptStream, "unexpected marker");
    const int len = rd.u16();
    if (len < 2) fail(ErrorCode::CorruptStream, "bad segment length");
    const std::size_t seg_end = rd.position() + len - 2;
    if (seg_end > data.size()) fail(ErrorCode::CorruptStream, "segment runs past end of stream");

    if (m == 0xDB) {
      while (rd.position() < seg_end) {
        const int pq_tq = rd.u8();
        if ((pq_tq >> 4) != 0) fail(ErrorCode::UnsupportedFormat, "16-bit quantization tables");
        const int id = pq_tq & 15;
        if (id > 3) fail(ErrorCode::CorruptStream, "bad quantization table id");
        for (int i = 0; i < 64; ++i) qtab[id][i] = rd.u8();
        qtab_set[id] = true;
      }
    } else if (m == 0xC4) {
      while (rd.position() < seg_end) {
        const int tc_th = rd.u8();
        const int cls = tc_th >> 4, id = tc_th & 15;
        if (cls > 1 || id > 3) fail(ErrorCode::CorruptStream, "bad Huffman table id");
        HuffmanSpec s;
        int total = 0;
        for (auto& n : s.bits) total += (n = rd.u8());
        if (total > 256) fail(ErrorCode::CorruptStream, "Huffman table too large");
        for (int i = 0; i < total; ++i) s.values.push_back(rd.u8());
        (cls == 0 ? dc_tab : ac_tab)[id] = HuffmanDecoder(s);
      }
    } else if (m == 0xC0 || m == 0xC1) {
      if (frame_seen) fail(ErrorCode::CorruptStream, "multiple frames");
      frame_seen = true;
      if (rd.u8() != 8) fail(ErrorCode::UnsupportedFormat, "only 8-bit sample precision is supported");
      height = rd.u16();
      width = rd.u16();
      const int nc = rd.u8();
      if (width < 1 || height < 1) fail(ErrorCode::CorruptStream, "invalid frame dimensions");
      if (nc != 1 && nc != 3) fail(ErrorCode::UnsupportedFormat, "unsupported component count");
      for (int i = 0; i < nc; ++i) {
        detail::FrameComponent c;
        c.id = rd.u8();
        const int hv = rd.u8();
        c.h = hv >> 4;
        c.v = hv & 15;
        c.tq = rd.u8();
        if (c.h < 1 || c.h > 4 || c.v < 1 || c.v > 4 || c.tq > 3) fail(ErrorCode::CorruptStream, "bad component spec");
        hmax = std::max(hmax, c.h);
        vmax = std::max(vmax, c.v);
        comps.push_back(c);
      }
    } else if (m == 0xC2 || m == 0xC3 || (m >= 0xC5 && m <= 0xCF && m != 0xC8 && m != 0xCC)) {
      fail(ErrorCode::UnsupportedFormat, "only baseline sequential JPEG is supported");
    } else if (m == 0xDD) {
      restart_interval = rd.u16();
    } else if (m == 0xDA) {
      if (!frame_seen) fail(ErrorCode::CorruptStream, "scan before frame header");
      if (scan_done) fail(ErrorCode::UnsupportedFormat, "multi-scan JPEG");
      const int ns = rd.u8();
      if (ns != static_cast<int>(comps.size())) fail(ErrorCode::UnsupportedFormat, "non-interleaved multi-scan JPEG");
      std::vector<detail::FrameComponent*> order;
      for (int i = 0; i < ns; ++i) {
        const int cid = rd.u8();
        const int tables = rd.u8();
        detail::FrameComponent* found = nullptr;
        for (auto& c : comps)
          if (c.id == cid) found = &c;
        if (!found) fail(ErrorCode::CorruptStream, "scan references unknown component");
        found->td = tables >> 4;
        found->ta = tables & 15;
        if (found->td > 3 || found->ta > 3) fail(ErrorCode::CorruptStream, "bad table selector");
        order.push_back(found);
      }
      rd.skip(3);  // Ss, Se, Ah/Al: fixed for baseline
      if (rd.position() != seg_end) fail(ErrorCode::CorruptStream, "bad SOS length");

      const bool single = ns == 1;
      const int mcus_x = single ? (width + 7) / 8 : (width + 8 * hmax - 1) / (8 * hmax);
      const int mcus_y = single ? (height + 7) / 8 : (height + 8 * vmax - 1) / (8 * vmax);
      for (auto* c : order) {
        if (!qtab_set[c->tq]) fail(ErrorCode::CorruptStream, "missing quantization table");
        if (!dc_tab[c->td].valid() || !ac_tab[c->ta].valid()) fail(ErrorCode::CorruptStream, "missing Huffman table");
        c->bw = single ? mcus_x : mcus_x * c->h;
        c->bh = single ? mcus_y : mcus_y * c->v;
        c->samples.assign(static_cast<std::size_t>(c->bw) * 8 * c->bh * 8, 0.0);
      }
      BitReader br(data, rd.position());
      std::vector<int> pred(order.size(), 0);
      int restarts = 0;
      const int total = mcus_x * mcus_y;
      for (int mcu = 0; mcu < total; ++mcu) {
        if (restart_interval > 0 && mcu > 0 && mcu % restart_interval == 0) {
          br.restart(restarts++);
          std::fill(pred.begin(), pred.end(), 0);
        }
        const int mx = mcu % mcus_x, my = mcu / mcus_x;
        for (std::size_t ci = 0; ci < order.size(); ++ci) {
          auto& c = *order[ci];
          const int nh = single ? 1 : c.h, nv = single ? 1 : c.v;
          for (int by = 0; by < nv; ++by) {
            for (int bx = 0; bx < nh; ++bx) {
              const auto zz = decode_block(br, pred[ci], dc_tab[c.td], ac_tab[c.ta]);
              Block F{};
              for (int i = 0; i < 64; ++i) F[kZigzag[i]] = static_cast<double>(zz[i]) * qtab[c.tq][i];
              const Block f = inverse_dct(F);
              const int x0 = (mx * nh + bx) * 8, y0 = (my * nv + by) * 8;
              const int stride = c.bw * 8;
              for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                  c.samples[static_cast<std::size_t>(y0 + y) * stride + x0 + x] =
                      std::clamp(std::nearbyint(f[y * 8 + x] + 128.0), 0.0, 255.0);
            }
          }
        }
      }
      // Skip any trailing fill up to the next marker.
      std::size_t p = br.position();
      while (p + 1 < data.size() && !(data[p] == 0xFF && data[p + 1] != 0x00 && (data[p + 1] < 0xD0 || data[p + 1] > 0xD7))) ++p;
      if (p + 1 >= data.size()) fail(ErrorCode::CorruptStream, "missing EOI marker");
      rd.position() = p;
      scan_done = true;
      continue;
    }
    rd.position() = seg_end;
  }
  if (!scan_done) fail(ErrorCode::CorruptStream, "stream has no image data");

  ImageF32 img(width, height);
  auto sample = [&](const detail::FrameComponent& c, int x, int y) {
    const int sx = x * c.h / hmax;
    const int sy = y * c.v / vmax;
    return c.samples[static_cast<std::size_t>(sy) * c.bw * 8 + sx];
  };
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (comps.size() == 1) {
        const float g = static_cast<float>(sample(comps[0], x, y) / 255.0);
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = g;
        continue;
      }
      const auto rgb = color::ycc_to_rgb(sample(comps[0], x, y) / 255.0, sample(comps[1], x, y) / 255.0,
                                         sample(comps[2], x, y) / 255.0);
      for (int c = 0; c < 3; ++c) {
        img.at(x, y, c) = static_cast<float>(std::clamp(std::nearbyint(rgb[c] * 255.0), 0.0, 255.0) / 255.0);
      }
    }
  }
  return img;
}

inline ImageF32 jpeg_decode(const JpegStream& stream) { return jpeg_decode(std::span<const std::uint8_t>(stream.bytes)); }

}  // namespace gir::jpeg
