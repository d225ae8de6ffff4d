#pragma once

// The ten basic degradation operators and their parameter spaces.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "gir/image.hpp"
#include "gir/imaging.hpp"
#include "gir/jpeg.hpp"
#include "gir/kernels.hpp"
#include "gir/rng.hpp"

namespace gir {

enum class DegradationKind { Resize, Blur, Noise, Compression, Ringing, AlgArtifact, Damage, Rain, Haze, Snow };

inline constexpr std::array<DegradationKind, 10> kAllKinds = {
    DegradationKind::Resize,  DegradationKind::Blur,        DegradationKind::Noise, DegradationKind::Compression,
    DegradationKind::Ringing, DegradationKind::AlgArtifact, DegradationKind::Damage, DegradationKind::Rain,
    DegradationKind::Haze,    DegradationKind::Snow};

/// Weather happens at acquisition time, so it may only open a chain.
constexpr bool weather_only_first(DegradationKind k) noexcept {
  return k == DegradationKind::Rain || k == DegradationKind::Haze || k == DegradationKind::Snow;
}

constexpr std::string_view kind_name(DegradationKind k) noexcept {
  switch (k) {
    case DegradationKind::Resize: return "resize";
    case DegradationKind::Blur: return "blur";
    case DegradationKind::Noise: return "noise";
    case DegradationKind::Compression: return "compression";
    case DegradationKind::Ringing: return "ringing";
    case DegradationKind::AlgArtifact: return "alg_artifact";
    case DegradationKind::Damage: return "damage";
    case DegradationKind::Rain: return "rain";
    case DegradationKind::Haze: return "haze";
    case DegradationKind::Snow: return "snow";
  }
  return "unknown";
}

/// Case-insensitive; also accepts "jpeg" and "alg.artifact".
inline std::optional<DegradationKind> parse_kind(std::string_view name) {
  std::string lower(name);
  for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (lower == "jpeg") return DegradationKind::Compression;
  if (lower == "alg.artifact" || lower == "algartifact") return DegradationKind::AlgArtifact;
  for (auto k : kAllKinds)
    if (kind_name(k) == lower) return k;
  return std::nullopt;
}

struct ResizeParams {
  int scale = 4;
  friend bool operator==(const ResizeParams&, const ResizeParams&) = default;
};
struct BlurParams {
  int ksize = 15;
  double sigma = 2.0;
  friend bool operator==(const BlurParams&, const BlurParams&) = default;
};
struct NoiseParams {
  double sigma255 = 20.0;  // standard deviation on the 0..255 scale
  friend bool operator==(const NoiseParams&, const NoiseParams&) = default;
};
struct CompressionParams {
  int quality = 50;
  friend bool operator==(const CompressionParams&, const CompressionParams&) = default;
};
struct RingingParams {
  int ksize = 15;
  double omega = 1.2;
  friend bool operator==(const RingingParams&, const RingingParams&) = default;
};
struct AlgArtifactParams {
  double psf_sigma = 1.5;  // 0 selects a delta PSF
  int iterations = 10;
  friend bool operator==(const AlgArtifactParams&, const AlgArtifactParams&) = default;
};
enum class LineColor { White, Black };
struct DamageParams {
  int n_lines = 10;
  int thickness = 7;
  LineColor color = LineColor::White;
  friend bool operator==(const DamageParams&, const DamageParams&) = default;
};
struct RainParams {
  double strength = 75.0;
  friend bool operator==(const RainParams&, const RainParams&) = default;
};
struct HazeParams {
  double A = 0.9;
  double beta = 1.8;
  friend bool operator==(const HazeParams&, const HazeParams&) = default;
};
struct SnowParams {
  double A = 0.9;
  double beta = 0.75;
  double flakes_per_mpx = 200.0;
  friend bool operator==(const SnowParams&, const SnowParams&) = default;
};

/// Alternative index equals the DegradationKind value.
using DegradationParams = std::variant<ResizeParams, BlurParams, NoiseParams, CompressionParams, RingingParams,
                                       AlgArtifactParams, DamageParams, RainParams, HazeParams, SnowParams>;

inline DegradationKind kind_of(const DegradationParams& p) noexcept {
  return static_cast<DegradationKind>(p.index());
}

namespace ranges {
inline constexpr int kKsizeMin = 7, kKsizeMax = 23;
inline constexpr double kBlurSigmaMin = 0.2, kBlurSigmaMax = 3.0;
inline constexpr double kNoiseMin = 1.0, kNoiseMax = 30.0;
inline constexpr int kQualityMin = 30, kQualityMax = 95;
inline constexpr double kOmegaMin = std::numbers::pi / 3.0, kOmegaMax = std::numbers::pi;
inline constexpr double kPsfSigmaMin = 0.8, kPsfSigmaMax = 2.0;
inline constexpr int kIterationsMin = 5, kIterationsMax = 30;
inline constexpr int kLinesMin = 5, kLinesMax = 10;
inline constexpr int kThicknessMin = 5, kThicknessMax = 10;
inline constexpr double kRainMin = 50.0, kRainMax = 100.0;
inline constexpr double kHazeAMin = 0.8, kHazeAMax = 1.0, kHazeBetaMin = 0.5, kHazeBetaMax = 2.5;
inline constexpr double kSnowAMin = 0.8, kSnowAMax = 0.95, kSnowBetaMin = 0.5, kSnowBetaMax = 1.0;
}  // namespace ranges

/// Operator preconditions. Looser than the sampling ranges: e.g. zero noise
/// or zero rain strength are valid (identity) inputs.
inline void validate_params(const DegradationParams& params) {
  auto bad = [&](const std::string& what) {
    fail(ErrorCode::InvalidParam, std::string(kind_name(kind_of(params))) + ": " + what);
  };
  auto finite = [](double v) { return std::isfinite(v); };
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ResizeParams>) {
          if (p.scale < 1) bad("scale must be >= 1");
        } else if constexpr (std::is_same_v<T, BlurParams>) {
          if (p.ksize < 1 || p.ksize % 2 == 0) bad("ksize must be odd and >= 1");
          if (!finite(p.sigma) || p.sigma <= 0.0) bad("sigma must be positive");
        } else if constexpr (std::is_same_v<T, NoiseParams>) {
          if (!finite(p.sigma255) || p.sigma255 < 0.0) bad("sigma255 must be >= 0");
        } else if constexpr (std::is_same_v<T, CompressionParams>) {
          if (p.quality < 1 || p.quality > 100) bad("quality must be in [1,100]");
        } else if constexpr (std::is_same_v<T, RingingParams>) {
          if (p.ksize < 1 || p.ksize % 2 == 0) bad("ksize must be odd and >= 1");
          if (!finite(p.omega) || p.omega <= 0.0 || p.omega > std::numbers::pi + 1e-12) bad("omega must be in (0, pi]");
        } else if constexpr (std::is_same_v<T, AlgArtifactParams>) {
          if (!finite(p.psf_sigma) || p.psf_sigma < 0.0) bad("psf_sigma must be >= 0");
          if (p.iterations < 1) bad("iterations must be >= 1");
        } else if constexpr (std::is_same_v<T, DamageParams>) {
          if (p.n_lines < 0) bad("n_lines must be >= 0");
          if (p.thickness < 1) bad("thickness must be >= 1");
        } else if constexpr (std::is_same_v<T, RainParams>) {
          if (!finite(p.strength) || p.strength < 0.0) bad("strength must be >= 0");
        } else if constexpr (std::is_same_v<T, HazeParams>) {
          if (!finite(p.A) || p.A < 0.0 || p.A > 1.0) bad("A must be in [0,1]");
          if (!finite(p.beta) || p.beta < 0.0) bad("beta must be >= 0");
        } else if constexpr (std::is_same_v<T, SnowParams>) {
          if (!finite(p.A) || p.A < 0.0 || p.A > 1.0) bad("A must be in [0,1]");
          if (!finite(p.beta) || p.beta < 0.0) bad("beta must be >= 0");
          if (!finite(p.flakes_per_mpx) || p.flakes_per_mpx < 0.0) bad("flakes_per_mpx must be >= 0");
        }
      },
      params);
}

/// True when every field lies in the random-task sampling range.
inline bool in_sampling_range(const DegradationParams& params) {
  using namespace ranges;
  auto odd_in = [](int k) { return k % 2 == 1 && k >= kKsizeMin && k <= kKsizeMax; };
  auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  return std::visit(
      [&](const auto& p) -> bool {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ResizeParams>) return p.scale == 4;
        else if constexpr (std::is_same_v<T, BlurParams>) return odd_in(p.ksize) && in(p.sigma, kBlurSigmaMin, kBlurSigmaMax);
        else if constexpr (std::is_same_v<T, NoiseParams>) return in(p.sigma255, kNoiseMin, kNoiseMax);
        else if constexpr (std::is_same_v<T, CompressionParams>) return p.quality >= kQualityMin && p.quality <= kQualityMax;
        else if constexpr (std::is_same_v<T, RingingParams>) return odd_in(p.ksize) && in(p.omega, kOmegaMin, kOmegaMax);
        else if constexpr (std::is_same_v<T, AlgArtifactParams>)
          return in(p.psf_sigma, kPsfSigmaMin, kPsfSigmaMax) && p.iterations >= kIterationsMin && p.iterations <= kIterationsMax;
        else if constexpr (std::is_same_v<T, DamageParams>)
          return p.n_lines >= kLinesMin && p.n_lines <= kLinesMax && p.thickness >= kThicknessMin && p.thickness <= kThicknessMax;
        else if constexpr (std::is_same_v<T, RainParams>) return in(p.strength, kRainMin, kRainMax);
        else if constexpr (std::is_same_v<T, HazeParams>) return in(p.A, kHazeAMin, kHazeAMax) && in(p.beta, kHazeBetaMin, kHazeBetaMax);
        else return in(p.A, kSnowAMin, kSnowAMax) && in(p.beta, kSnowBetaMin, kSnowBetaMax) && p.flakes_per_mpx == 200.0;
      },
      params);
}

/// Draws parameters uniformly from the random-task ranges.
inline DegradationParams sample_params(DegradationKind kind, RngStream& rng) {
  using namespace ranges;
  auto odd_ksize = [&] { return static_cast<int>(kKsizeMin + 2 * rng.uniform_int(0, (kKsizeMax - kKsizeMin) / 2)); };
  switch (kind) {
    case DegradationKind::Resize: return ResizeParams{4};
    case DegradationKind::Blur: {
      const int k = odd_ksize();
      return BlurParams{k, rng.uniform(kBlurSigmaMin, kBlurSigmaMax)};
    }
    case DegradationKind::Noise: return NoiseParams{rng.uniform(kNoiseMin, kNoiseMax)};
    case DegradationKind::Compression: return CompressionParams{static_cast<int>(rng.uniform_int(kQualityMin, kQualityMax))};
    case DegradationKind::Ringing: {
      const int k = odd_ksize();
      return RingingParams{k, rng.uniform(kOmegaMin, kOmegaMax)};
    }
    case DegradationKind::AlgArtifact: {
      const double s = rng.uniform(kPsfSigmaMin, kPsfSigmaMax);
      return AlgArtifactParams{s, static_cast<int>(rng.uniform_int(kIterationsMin, kIterationsMax))};
    }
    case DegradationKind::Damage: {
      const int n = static_cast<int>(rng.uniform_int(kLinesMin, kLinesMax));
      const int t = static_cast<int>(rng.uniform_int(kThicknessMin, kThicknessMax));
      return DamageParams{n, t, rng.uniform_int(0, 1) ? LineColor::Black : LineColor::White};
    }
    case DegradationKind::Rain: return RainParams{rng.uniform(kRainMin, kRainMax)};
    case DegradationKind::Haze: {
      const double a = rng.uniform(kHazeAMin, kHazeAMax);
      return HazeParams{a, rng.uniform(kHazeBetaMin, kHazeBetaMax)};
    }
    case DegradationKind::Snow: {
      const double a = rng.uniform(kSnowAMin, kSnowAMax);
      return SnowParams{a, rng.uniform(kSnowBetaMin, kSnowBetaMax), 200.0};
    }
  }
  fail(ErrorCode::InvalidParam, "unknown degradation kind");
}

/// Fixed strengths used by the single and representative tasks.
inline DegradationParams representative_params(DegradationKind kind) {
  switch (kind) {
    case DegradationKind::Resize: return ResizeParams{4};
    case DegradationKind::Blur: return BlurParams{15, 2.0};
    case DegradationKind::Noise: return NoiseParams{20.0};
    case DegradationKind::Compression: return CompressionParams{50};
    case DegradationKind::Ringing: return RingingParams{15, 1.2};
    case DegradationKind::AlgArtifact: return AlgArtifactParams{1.5, 10};
    case DegradationKind::Damage: return DamageParams{10, 7, LineColor::White};
    case DegradationKind::Rain: return RainParams{75.0};
    case DegradationKind::Haze: return HazeParams{0.9, 1.8};
    case DegradationKind::Snow: return SnowParams{0.9, 0.75, 200.0};
  }
  fail(ErrorCode::InvalidParam, "unknown degradation kind");
}

// ---------------------------------------------------------------------------
// Operators

inline ImageF32 degrade_blur(const ImageF32& img, const BlurParams& p) {
  return convolve2d(img, gaussian_kernel(p.ksize, p.sigma));
}

inline ImageF32 degrade_ringing(const ImageF32& img, const RingingParams& p) {
  return convolve2d(img, sinc_kernel(p.ksize, p.omega));
}

/// Down-then-up bicubic resampling; dimensions are preserved.
inline ImageF32 degrade_resize(const ImageF32& img, const ResizeParams& p) {
  validate_params(p);
  if (img.width() < p.scale || img.height() < p.scale) {
    fail(ErrorCode::ImageTooSmall, "resize needs at least " + std::to_string(p.scale) + " pixels per side");
  }
  const ImageF32 lo = resample(img, img.width() / p.scale, img.height() / p.scale, ResampleFilter::Bicubic);
  return resample(lo, img.width(), img.height(), ResampleFilter::Bicubic);
}

/// Additive white Gaussian noise; draws one normal per sample in storage order.
inline ImageF32 degrade_noise(const ImageF32& img, const NoiseParams& p, RngStream& rng) {
  validate_params(p);
  ImageF32 out = img;
  if (p.sigma255 == 0.0) return out;
  const double sigma = p.sigma255 / 255.0;
  for (float& s : out.data()) s = static_cast<float>(s + sigma * rng.normal());
  out.clamp01();
  return out;
}

inline ImageF32 degrade_jpeg(const ImageF32& img, const CompressionParams& p) {
  return jpeg::jpeg_decode(jpeg::jpeg_encode(img, p.quality));
}

/// Support size used for the deconvolution PSF.
inline int psf_ksize(double psf_sigma) { return 2 * static_cast<int>(std::ceil(3.0 * psf_sigma)) + 1; }

/// Richardson-Lucy deconvolution run on an image that was never blurred by
/// the PSF: the multiplicative updates over-sharpen, producing grain and
/// smearing. Initialized with the observation itself.
inline ImageF32 degrade_alg_artifact(const ImageF32& img, const AlgArtifactParams& p) {
  validate_params(p);
  const Kernel2D psf = p.psf_sigma == 0.0 ? Kernel2D::identity() : gaussian_kernel(psf_ksize(p.psf_sigma), p.psf_sigma);
  const Kernel2D psf_flip = psf.flipped();
  constexpr double eps = 1e-6;
  constexpr int C = ImageF32::kChannels;
  const int w = img.width(), h = img.height();
  const std::size_t n = img.size();

  std::vector<double> observed(img.data().begin(), img.data().end());
  std::vector<double> u = observed, blurred(n), ratio(n), correction(n);
  for (int it = 0; it < p.iterations; ++it) {
    for (int c = 0; c < C; ++c) detail::correlate_plane<double>(u.data() + c, blurred.data() + c, w, h, C, psf);
    for (std::size_t i = 0; i < n; ++i) ratio[i] = observed[i] / std::max(blurred[i], eps);
    for (int c = 0; c < C; ++c) detail::correlate_plane<double>(ratio.data() + c, correction.data() + c, w, h, C, psf_flip);
    for (std::size_t i = 0; i < n; ++i) u[i] *= correction[i];
  }
  ImageF32 out(w, h);
  auto o = out.data();
  for (std::size_t i = 0; i < n; ++i) o[i] = static_cast<float>(u[i]);
  out.clamp01();
  return out;
}

/// Binary coverage mask of straight thick lines with random endpoints.
inline std::vector<std::uint8_t> damage_mask(int width, int height, const DamageParams& p, RngStream& rng) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(width) * height, 0);
  const double radius = p.thickness / 2.0;
  for (int line = 0; line < p.n_lines; ++line) {
    const double x0 = rng.uniform(0.0, width - 1.0), y0 = rng.uniform(0.0, height - 1.0);
    const double x1 = rng.uniform(0.0, width - 1.0), y1 = rng.uniform(0.0, height - 1.0);
    const double dx = x1 - x0, dy = y1 - y0;
    const double len2 = dx * dx + dy * dy;
    const int xmin = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - radius)));
    const int xmax = std::min(width - 1, static_cast<int>(std::ceil(std::max(x0, x1) + radius)));
    const int ymin = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - radius)));
    const int ymax = std::min(height - 1, static_cast<int>(std::ceil(std::max(y0, y1) + radius)));
    for (int y = ymin; y <= ymax; ++y) {
      for (int x = xmin; x <= xmax; ++x) {
        double t = len2 > 0.0 ? ((x - x0) * dx + (y - y0) * dy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double ex = x - (x0 + t * dx), ey = y - (y0 + t * dy);
        if (ex * ex + ey * ey <= radius * radius) mask[static_cast<std::size_t>(y) * width + x] = 1;
      }
    }
  }
  return mask;
}

inline ImageF32 degrade_damage(const ImageF32& img, const DamageParams& p, RngStream& rng) {
  validate_params(p);
  ImageF32 out = img;
  const auto mask = damage_mask(img.width(), img.height(), p, rng);
  const float value = p.color == LineColor::White ? 1.0f : 0.0f;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    for (int c = 0; c < 3; ++c) out.data()[i * 3 + c] = value;
  }
  return out;
}

namespace rain {
inline constexpr double kSeedDensityAtFull = 0.025;  // droplet fraction at strength 100
inline constexpr double kOpacity = 0.8;
inline constexpr double kAngleMinDeg = 60.0, kAngleMaxDeg = 120.0;

inline int streak_length(double strength) { return static_cast<int>(std::nearbyint(strength / 5.0)); }

/// Normalized line kernel of the given length through the center.
inline Kernel2D motion_kernel(int length, double angle_deg) {
  const int size = length % 2 == 0 ? length + 1 : length;
  const int r = size / 2;
  std::vector<double> taps(static_cast<std::size_t>(size) * size, 0.0);
  const double a = angle_deg * std::numbers::pi / 180.0;
  const double cx = std::cos(a), cy = -std::sin(a);
  const int samples = 4 * length + 1;
  const double half = (length - 1) / 2.0;
  for (int i = 0; i < samples; ++i) {
    const double t = samples == 1 ? 0.0 : -half + 2.0 * half * i / (samples - 1);
    const int x = std::clamp(static_cast<int>(std::nearbyint(t * cx)), -r, r);
    const int y = std::clamp(static_cast<int>(std::nearbyint(t * cy)), -r, r);
    taps[static_cast<std::size_t>(y + r) * size + (x + r)] += 1.0;
  }
  return Kernel2D::normalized(size, std::move(taps));
}

/// Streak intensity layer in [0,1], one value per pixel.
inline std::vector<double> streak_layer(int width, int height, const RainParams& p, RngStream& rng) {
  const double angle = rng.uniform(kAngleMinDeg, kAngleMaxDeg);
  const double density = kSeedDensityAtFull * p.strength / 100.0;
  const int length = streak_length(p.strength);
  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<double> seeds(n, 0.0);
  bool any = false;
  for (auto& s : seeds) {
    if (rng.uniform() < density) {
      s = 1.0;
      any = true;
    }
  }
  if (!any || length < 1) return std::vector<double>(n, 0.0);
  std::vector<double> streak(n);
  detail::correlate_plane<double>(seeds.data(), streak.data(), width, height, 1, motion_kernel(length, angle));
  // Levels stretch: a lone droplet smeared over the streak becomes full white.
  for (auto& s : streak) s = std::clamp(s * length, 0.0, 1.0);
  return streak;
}
}  // namespace rain

/// Screen-blends white motion-blurred droplet streaks over the image.
inline ImageF32 degrade_rain(const ImageF32& img, const RainParams& p, RngStream& rng) {
  validate_params(p);
  ImageF32 out = img;
  if (p.strength == 0.0) return out;
  const auto streak = rain::streak_layer(img.width(), img.height(), p, rng);
  auto o = out.data();
  for (std::size_t i = 0; i < streak.size(); ++i) {
    if (streak[i] == 0.0) continue;
    const double b = streak[i] * rain::kOpacity;
    for (int c = 0; c < 3; ++c) {
      const double a = o[i * 3 + c];
      o[i * 3 + c] = static_cast<float>(a + b * (1.0 - a));  // == 1 - (1-a)(1-b)
    }
  }
  out.clamp01();
  return out;
}

namespace detail {

/// Atmospheric scattering: I*t + A*(1-t) with t = exp(-beta*d), in place.
inline void apply_veil(ImageF32& img, const DepthMap& depth, double A, double beta) {
  if (!depth.matches(img)) fail(ErrorCode::DimensionMismatch, "depth map does not match image dimensions");
  auto o = img.data();
  const auto d = depth.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double t = std::exp(-beta * d[i]);
    if (t == 1.0) continue;
    for (int c = 0; c < 3; ++c) o[i * 3 + c] = static_cast<float>(o[i * 3 + c] * t + A * (1.0 - t));
  }
  img.clamp01();
}

}  // namespace detail

inline ImageF32 degrade_haze(const ImageF32& img, const DepthMap& depth, const HazeParams& p) {
  validate_params(p);
  ImageF32 out = img;
  detail::apply_veil(out, depth, p.A, p.beta);
  return out;
}

namespace snow {
inline constexpr std::array<double, 3> kFlakeColor = {0.95, 0.97, 1.0};
inline constexpr double kRadiusMin = 1.0, kRadiusMax = 4.0;
inline constexpr double kIntensityMin = 0.6, kIntensityMax = 1.0;
inline constexpr double kMinSpacing = 3.0;
inline constexpr int kPlacementAttempts = 30;

/// Binary location mask R and per-pixel flake intensity Z (zero off-flake).
struct SnowField {
  std::vector<std::uint8_t> mask;
  std::vector<double> intensity;
  int flakes = 0;
};

inline int flake_count(int width, int height, double per_mpx) {
  return static_cast<int>(std::nearbyint(per_mpx * width * height / 1e6));
}

/// Dart-throwing flake placement with a minimum center spacing; each flake
/// is a Gaussian blob of random radius thresholded at 0.5.
inline SnowField make_field(int width, int height, double per_mpx, RngStream& rng) {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  SnowField f{std::vector<std::uint8_t>(n, 0), std::vector<double>(n, 0.0), 0};
  const int target = flake_count(width, height, per_mpx);
  std::vector<std::array<double, 2>> centers;
  for (int k = 0; k < target; ++k) {
    double cx = 0, cy = 0;
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      cx = rng.uniform(0.0, width);
      cy = rng.uniform(0.0, height);
      placed = true;
      for (const auto& c : centers) {
        if (std::hypot(c[0] - cx, c[1] - cy) < kMinSpacing) {
          placed = false;
          break;
        }
      }
    }
    const double radius = rng.uniform(kRadiusMin, kRadiusMax);
    const double z = rng.uniform(kIntensityMin, kIntensityMax);
    if (!placed) continue;
    centers.push_back({cx, cy});
    ++f.flakes;
    const double reach = radius * std::sqrt(2.0 * std::numbers::ln2);  // blob >= 0.5 inside
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(cx + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(cy + reach)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        if (std::exp(-(dx * dx + dy * dy) / (2.0 * radius * radius)) < 0.5) continue;
        const std::size_t i = static_cast<std::size_t>(y) * width + x;
        f.mask[i] = 1;
        f.intensity[i] = std::max(f.intensity[i], z);
      }
    }
  }
  return f;
}
}  // namespace snow

/// Composites procedural flakes (I_s = I(1 - Z R) + C Z R) and then applies
/// the same veiling as haze.
inline ImageF32 degrade_snow(const ImageF32& img, const DepthMap& depth, const SnowParams& p, RngStream& rng) {
  validate_params(p);
  if (!depth.matches(img)) fail(ErrorCode::DimensionMismatch, "depth map does not match image dimensions");
  ImageF32 out = img;
  const auto field = snow::make_field(img.width(), img.height(), p.flakes_per_mpx, rng);
  auto o = out.data();
  for (std::size_t i = 0; i < field.mask.size(); ++i) {
    if (!field.mask[i]) continue;
    const double z = field.intensity[i];
    for (int c = 0; c < 3; ++c) {
      o[i * 3 + c] = static_cast<float>(o[i * 3 + c] * (1.0 - z) + snow::kFlakeColor[c] * z);
    }
  }
  detail::apply_veil(out, depth, p.A, p.beta);
  return out;
}

}  // namespace gir
