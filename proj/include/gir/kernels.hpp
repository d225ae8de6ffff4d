#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "gir/image.hpp"

namespace gir {

/// Isotropic Gaussian taps exp(-(x^2+y^2) / (2 sigma^2)), normalized.
inline Kernel2D gaussian_kernel(int ksize, double sigma) {
  if (ksize < 1 || ksize % 2 == 0) fail(ErrorCode::InvalidParam, "gaussian kernel size must be odd");
  if (!(sigma > 0.0)) fail(ErrorCode::InvalidParam, "gaussian sigma must be positive");
  const int r = ksize / 2;
  std::vector<double> taps;
  taps.reserve(static_cast<std::size_t>(ksize) * ksize);
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x) taps.push_back(std::exp(-(x * x + y * y) / (2.0 * sigma * sigma)));
  return Kernel2D::normalized(ksize, std::move(taps));
}

/// Unnormalized circular ideal low-pass response at radius r for cutoff omega.
inline double sinc_tap(double r, double omega) {
  if (r == 0.0) return omega * omega / (4.0 * std::numbers::pi);
  return omega / (2.0 * std::numbers::pi * r) * std::cyl_bessel_j(1.0, omega * r);
}

/// Circular sinc (ideal low-pass) kernel, the ringing/overshoot generator.
inline Kernel2D sinc_kernel(int ksize, double omega) {
  if (ksize < 1 || ksize % 2 == 0) fail(ErrorCode::InvalidParam, "sinc kernel size must be odd");
  if (!(omega > 0.0) || omega > std::numbers::pi + 1e-12) {
    fail(ErrorCode::InvalidParam, "sinc cutoff must lie in (0, pi]");
  }
  const int r = ksize / 2;
  std::vector<double> taps;
  taps.reserve(static_cast<std::size_t>(ksize) * ksize);
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x) taps.push_back(sinc_tap(std::hypot(x, y), omega));
  return Kernel2D::normalized(ksize, std::move(taps));
}

}  // namespace gir
