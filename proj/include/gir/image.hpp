#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gir/error.hpp"

namespace gir {

/// Interleaved RGB image with float samples in [0,1], row-major.
class ImageF32 {
 public:
  static constexpr int kChannels = 3;

  ImageF32(int width, int height, float fill = 0.0f) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      fail(ErrorCode::InvalidParam,
           "image dimensions must be positive, got " + std::to_string(width) + "x" +
               std::to_string(height));
    }
    data_.assign(static_cast<std::size_t>(width) * height * kChannels, fill);
  }

  ImageF32(int width, int height, std::vector<float> samples) : ImageF32(width, height) {
    if (samples.size() != data_.size()) {
      fail(ErrorCode::DimensionMismatch, "sample count does not match " +
                                             std::to_string(width) + "x" +
                                             std::to_string(height) + "x3");
    }
    data_ = std::move(samples);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  float& at(int x, int y, int c) noexcept { return data_[index(x, y, c)]; }
  float at(int x, int y, int c) const noexcept { return data_[index(x, y, c)]; }

  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * kChannels + c;
  }

  bool same_shape(const ImageF32& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  void clamp01() noexcept {
    for (float& s : data_) s = std::clamp(s, 0.0f, 1.0f);
  }

  friend bool operator==(const ImageF32&, const ImageF32&) = default;

 private:
  int width_;
  int height_;
  std::vector<float> data_;
};

/// Per-pixel scene depth, non-negative, same grid as the paired image.
class DepthMap {
 public:
  DepthMap(int width, int height, float fill = 0.0f) : width_(width), height_(height) {
    if (width < 1 || height < 1) fail(ErrorCode::InvalidParam, "depth map dimensions must be positive");
    if (!(fill >= 0.0f) || !std::isfinite(fill)) fail(ErrorCode::InvalidParam, "depth must be finite and >= 0");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  DepthMap(int width, int height, std::vector<float> values) : DepthMap(width, height) {
    if (values.size() != data_.size()) fail(ErrorCode::DimensionMismatch, "depth value count mismatch");
    for (float v : values) {
      if (!(v >= 0.0f) || !std::isfinite(v)) fail(ErrorCode::InvalidParam, "depth must be finite and >= 0");
    }
    data_ = std::move(values);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::span<const float> data() const noexcept { return data_; }
  float at(int x, int y) const noexcept { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  bool matches(const ImageF32& img) const noexcept {
    return width_ == img.width() && height_ == img.height();
  }

  friend bool operator==(const DepthMap&, const DepthMap&) = default;

 private:
  int width_;
  int height_;
  std::vector<float> data_;
};

/// Square, odd-sized filter taps normalized to unit sum.
class Kernel2D {
 public:
  /// Takes raw taps and normalizes them. Throws when the size is even or the taps sum to zero.
  static Kernel2D normalized(int size, std::vector<double> taps) {
    if (size < 1 || size % 2 == 0) fail(ErrorCode::InvalidParam, "kernel size must be odd and >= 1");
    if (taps.size() != static_cast<std::size_t>(size) * size) {
      fail(ErrorCode::InvalidParam, "kernel tap count does not match size");
    }
    const double total = std::accumulate(taps.begin(), taps.end(), 0.0);
    if (!std::isfinite(total) || std::abs(total) < 1e-300) {
      fail(ErrorCode::InvalidParam, "kernel taps sum to zero");
    }
    for (double& t : taps) t /= total;
    return Kernel2D(size, std::move(taps));
  }

  static Kernel2D identity() { return Kernel2D(1, {1.0}); }

  int size() const noexcept { return size_; }
  int radius() const noexcept { return size_ / 2; }
  std::span<const double> weights() const noexcept { return weights_; }
  double at(int row, int col) const noexcept { return weights_[static_cast<std::size_t>(row) * size_ + col]; }

  /// Point reflection through the center (the adjoint of correlation).
  Kernel2D flipped() const {
    std::vector<double> w(weights_.rbegin(), weights_.rend());
    return Kernel2D(size_, std::move(w));
  }

 private:
  Kernel2D(int size, std::vector<double> w) : size_(size), weights_(std::move(w)) {}

  int size_;
  std::vector<double> weights_;
};

}  // namespace gir
