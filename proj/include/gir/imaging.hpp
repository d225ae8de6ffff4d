#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "gir/image.hpp"

namespace gir {

/// Border index for reflect-101 padding: ... 2 1 | 0 1 2 ... n-1 | n-2 ...
inline int reflect101(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

namespace detail {

/// Unclamped 2-D correlation of a single strided plane. T is the accumulator
/// and storage type; the output must not alias the input.
template <typename T, typename Src>
void correlate_plane(const Src* src, T* dst, int width, int height, int stride,
                     const Kernel2D& k) {
  const int r = k.radius();
  const int size = k.size();
  std::vector<int> xs(static_cast<std::size_t>(width) + 2 * r);
  for (int i = -r; i < width + r; ++i) xs[i + r] = reflect101(i, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int ky = 0; ky < size; ++ky) {
        const int sy = reflect101(y + ky - r, height);
        const Src* row = src + static_cast<std::ptrdiff_t>(sy) * width * stride;
        for (int kx = 0; kx < size; ++kx) {
          acc += k.at(ky, kx) * static_cast<double>(row[static_cast<std::ptrdiff_t>(xs[x + kx]) * stride]);
        }
      }
      dst[(static_cast<std::ptrdiff_t>(y) * width + x) * stride] = static_cast<T>(acc);
    }
  }
}

}  // namespace detail

/// Per-channel correlation with reflect-101 borders; output clamped to [0,1].
inline ImageF32 convolve2d(const ImageF32& img, const Kernel2D& k) {
  ImageF32 out(img.width(), img.height());
  for (int c = 0; c < ImageF32::kChannels; ++c) {
    detail::correlate_plane<float>(img.data().data() + c, out.data().data() + c, img.width(),
                                   img.height(), ImageF32::kChannels, k);
  }
  out.clamp01();
  return out;
}

enum class ResampleFilter { Nearest, Bilinear, Bicubic };

namespace detail {

inline double keys_cubic(double x) noexcept {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

inline double triangle(double x) noexcept {
  x = std::abs(x);
  return x < 1.0 ? 1.0 - x : 0.0;
}

struct Contribution {
  std::vector<int> index;
  std::vector<double> weight;
};

/// Tap positions and normalized weights for one axis. When shrinking, the
/// kernel is stretched by the scale factor so it also acts as the
/// anti-aliasing prefilter.
inline std::vector<Contribution> axis_contributions(int in_size, int out_size, ResampleFilter f) {
  std::vector<Contribution> out(static_cast<std::size_t>(out_size));
  const double scale = static_cast<double>(in_size) / out_size;
  if (f == ResampleFilter::Nearest) {
    for (int o = 0; o < out_size; ++o) {
      int i = static_cast<int>(std::floor((o + 0.5) * scale));
      i = std::min(std::max(i, 0), in_size - 1);
      out[o].index = {i};
      out[o].weight = {1.0};
    }
    return out;
  }
  const double support = f == ResampleFilter::Bicubic ? 2.0 : 1.0;
  const double stretch = std::max(scale, 1.0);
  for (int o = 0; o < out_size; ++o) {
    const double center = (o + 0.5) * scale - 0.5;
    const int lo = static_cast<int>(std::floor(center - support * stretch));
    const int hi = static_cast<int>(std::ceil(center + support * stretch));
    double total = 0.0;
    for (int i = lo; i <= hi; ++i) {
      const double d = (i - center) / stretch;
      const double w = f == ResampleFilter::Bicubic ? keys_cubic(d) : triangle(d);
      if (w == 0.0) continue;
      out[o].index.push_back(reflect101(i, in_size));
      out[o].weight.push_back(w);
      total += w;
    }
    for (double& w : out[o].weight) w /= total;
  }
  return out;
}

}  // namespace detail

/// Separable resampling with half-pixel-centered coordinates. Bicubic uses
/// the Keys kernel with a = -0.5.
inline ImageF32 resample(const ImageF32& img, int out_w, int out_h, ResampleFilter filter) {
  if (out_w < 1 || out_h < 1) fail(ErrorCode::InvalidParam, "resample target must be at least 1x1");
  const auto cols = detail::axis_contributions(img.width(), out_w, filter);
  const auto rows = detail::axis_contributions(img.height(), out_h, filter);
  constexpr int C = ImageF32::kChannels;

  // Horizontal pass into a double buffer of size out_w x in_h.
  std::vector<double> tmp(static_cast<std::size_t>(out_w) * img.height() * C);
  const auto src = img.data();
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < out_w; ++x) {
      const auto& con = cols[x];
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t t = 0; t < con.index.size(); ++t) {
          acc += con.weight[t] * src[img.index(con.index[t], y, c)];
        }
        tmp[(static_cast<std::size_t>(y) * out_w + x) * C + c] = acc;
      }
    }
  }
  ImageF32 out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    const auto& con = rows[y];
    for (int x = 0; x < out_w; ++x) {
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t t = 0; t < con.index.size(); ++t) {
          acc += con.weight[t] * tmp[(static_cast<std::size_t>(con.index[t]) * out_w + x) * C + c];
        }
        out.at(x, y, c) = static_cast<float>(acc);
      }
    }
  }
  out.clamp01();
  return out;
}

namespace color {

/// Full-range BT.601 (JFIF) forward matrix; chroma rows get +0.5 offset.
inline constexpr std::array<std::array<double, 3>, 3> kRgbToYcc{{
    {0.299, 0.587, 0.114},
    {-0.168735891647856, -0.331264108352144, 0.5},
    {0.5, -0.418687589158345, -0.081312410841655},
}};

constexpr std::array<std::array<double, 3>, 3> invert3(const std::array<std::array<double, 3>, 3>& m) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  std::array<std::array<double, 3>, 3> r{};
  r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
  r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
  r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
  r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return r;
}

inline constexpr auto kYccToRgb = invert3(kRgbToYcc);

inline std::array<double, 3> rgb_to_ycc(double r, double g, double b) noexcept {
  const auto& m = kRgbToYcc;
  return {m[0][0] * r + m[0][1] * g + m[0][2] * b,
          m[1][0] * r + m[1][1] * g + m[1][2] * b + 0.5,
          m[2][0] * r + m[2][1] * g + m[2][2] * b + 0.5};
}

inline std::array<double, 3> ycc_to_rgb(double y, double cb, double cr) noexcept {
  const auto& m = kYccToRgb;
  cb -= 0.5;
  cr -= 0.5;
  return {m[0][0] * y + m[0][1] * cb + m[0][2] * cr,
          m[1][0] * y + m[1][1] * cb + m[1][2] * cr,
          m[2][0] * y + m[2][1] * cb + m[2][2] * cr};
}

}  // namespace color

inline ImageF32 rgb_to_ycbcr(const ImageF32& img) {
  ImageF32 out(img.width(), img.height());
  const auto in = img.data();
  auto o = out.data();
  for (std::size_t p = 0; p < in.size(); p += 3) {
    const auto ycc = color::rgb_to_ycc(in[p], in[p + 1], in[p + 2]);
    for (int c = 0; c < 3; ++c) o[p + c] = static_cast<float>(ycc[c]);
  }
  out.clamp01();
  return out;
}

inline ImageF32 ycbcr_to_rgb(const ImageF32& img) {
  ImageF32 out(img.width(), img.height());
  const auto in = img.data();
  auto o = out.data();
  for (std::size_t p = 0; p < in.size(); p += 3) {
    const auto rgb = color::ycc_to_rgb(in[p], in[p + 1], in[p + 2]);
    for (int c = 0; c < 3; ++c) o[p + c] = static_cast<float>(rgb[c]);
  }
  out.clamp01();
  return out;
}

/// Central crop to at most w x h (smaller inputs are returned unchanged on that axis).
inline ImageF32 center_crop(const ImageF32& img, int w, int h) {
  const int cw = std::min(w, img.width());
  const int ch = std::min(h, img.height());
  const int x0 = (img.width() - cw) / 2;
  const int y0 = (img.height() - ch) / 2;
  ImageF32 out(cw, ch);
  for (int y = 0; y < ch; ++y)
    for (int x = 0; x < cw; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(x0 + x, y0 + y, c);
  return out;
}

}  // namespace gir
