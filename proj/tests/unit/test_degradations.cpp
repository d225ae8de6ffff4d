#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"

using namespace gir;
using gir::test::random_image;

namespace {

double mean(const ImageF32& img) {
  double s = 0;
  for (float v : img.data()) s += v;
  return s / static_cast<double>(img.size());
}

double psnr_raw(const ImageF32& a, const ImageF32& b) {
  double mse = 0;
  for (std::size_t i = 0; i < a.size(); ++i) mse += std::pow(double(a.data()[i]) - b.data()[i], 2);
  return 10 * std::log10(static_cast<double>(a.size()) / mse);
}

// Single-plane correlation with reflect-101 borders, in double.
std::vector<double> brute_plane(const std::vector<double>& src, int w, int h, const std::vector<double>& k, int size) {
  auto refl = [](int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
  };
  const int r = size / 2;
  std::vector<double> out(src.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) s += k[(dy + r) * size + dx + r] * src[refl(y + dy, h) * w + refl(x + dx, w)];
      out[y * w + x] = s;
    }
  return out;
}

ImageF32 stripes(int w, int h) {
  ImageF32 img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = (x % 2) ? 1.0f : 0.0f;
  return img;
}

double variance(const ImageF32& img) {
  const double m = mean(img);
  double s = 0;
  for (float v : img.data()) s += (v - m) * (v - m);
  return s / static_cast<double>(img.size());
}

}  // namespace

TEST(Degradations, WeatherFlagAndNames) {
  int weather = 0;
  for (auto k : kAllKinds) {
    weather += weather_only_first(k);
    EXPECT_EQ(parse_kind(kind_name(k)), k);
  }
  EXPECT_EQ(weather, 3);
  EXPECT_TRUE(weather_only_first(DegradationKind::Rain));
  EXPECT_TRUE(weather_only_first(DegradationKind::Haze));
  EXPECT_TRUE(weather_only_first(DegradationKind::Snow));
  EXPECT_EQ(parse_kind("JPEG"), DegradationKind::Compression);
  EXPECT_FALSE(parse_kind("fog"));
}

TEST(Degradations, RepresentativeParameters) {
  EXPECT_EQ(std::get<NoiseParams>(representative_params(DegradationKind::Noise)).sigma255, 20.0);
  const auto haze = std::get<HazeParams>(representative_params(DegradationKind::Haze));
  EXPECT_EQ(haze.A, 0.9);
  EXPECT_EQ(haze.beta, 1.8);
  const auto ring = std::get<RingingParams>(representative_params(DegradationKind::Ringing));
  EXPECT_EQ(ring.ksize, 15);
  EXPECT_EQ(ring.omega, 1.2);
  const auto blur = std::get<BlurParams>(representative_params(DegradationKind::Blur));
  EXPECT_EQ(blur.ksize, 15);
  EXPECT_EQ(blur.sigma, 2.0);
  EXPECT_EQ(std::get<CompressionParams>(representative_params(DegradationKind::Compression)).quality, 50);
  const auto dmg = std::get<DamageParams>(representative_params(DegradationKind::Damage));
  EXPECT_EQ(dmg.n_lines, 10);
  EXPECT_EQ(dmg.thickness, 7);
  EXPECT_EQ(std::get<RainParams>(representative_params(DegradationKind::Rain)).strength, 75.0);
  const auto snow = std::get<SnowParams>(representative_params(DegradationKind::Snow));
  EXPECT_EQ(snow.A, 0.9);
  EXPECT_EQ(snow.beta, 0.75);
  for (auto k : kAllKinds) EXPECT_EQ(kind_of(representative_params(k)), k);
}

TEST(Degradations, SampledParametersStayInRange) {
  RngStream rng(17);
  for (auto k : kAllKinds) {
    for (int i = 0; i < 100000; ++i) {
      const auto p = sample_params(k, rng);
      ASSERT_EQ(kind_of(p), k);
      ASSERT_TRUE(in_sampling_range(p)) << kind_name(k);
      ASSERT_NO_THROW(validate_params(p));
    }
  }
}

TEST(Degradations, CompressionQualityMean) {
  RngStream rng(3);
  double s = 0;
  for (int i = 0; i < 10000; ++i) s += std::get<CompressionParams>(sample_params(DegradationKind::Compression, rng)).quality;
  EXPECT_NEAR(s / 10000, 62.5, 2.0);
}

TEST(Degradations, SamplingIsDeterministic) {
  RngStream a(99), b(99);
  for (int i = 0; i < 1000; ++i) {
    const auto k = kAllKinds[static_cast<std::size_t>(i % 10)];
    ASSERT_EQ(sample_params(k, a), sample_params(k, b));
  }
}

TEST(Degradations, GaussianKernelFormula) {
  EXPECT_EQ(gaussian_kernel(1, 2.0).at(0, 0), 1.0);
  const auto wide = gaussian_kernel(3, 1e6);
  for (double w : wide.weights()) EXPECT_NEAR(w, 1.0 / 9, 1e-6);
  const auto k = gaussian_kernel(15, 2.0);
  double total = 0;
  for (int y = -7; y <= 7; ++y)
    for (int x = -7; x <= 7; ++x) total += std::exp(-(x * x + y * y) / 8.0);
  for (int y = -7; y <= 7; ++y)
    for (int x = -7; x <= 7; ++x) EXPECT_NEAR(k.at(y + 7, x + 7), std::exp(-(x * x + y * y) / 8.0) / total, 1e-9);
}

TEST(Degradations, SincCenterTap) {
  EXPECT_NEAR(sinc_tap(0.0, std::numbers::pi), std::numbers::pi / 4, 1e-12);
  EXPECT_EQ(sinc_kernel(1, 2.0).at(0, 0), 1.0);
}

TEST(Degradations, BlurProperties) {
  const ImageF32 flat(20, 20, 0.4f);
  {
    const auto result = degrade_blur(flat, {15, 2.0});
    for (float s : result.data()) EXPECT_NEAR(s, 0.4f, 1e-6);
  }
  const auto img = random_image(32, 32, 1);
  EXPECT_EQ(degrade_blur(img, {9, 1.3}), convolve2d(img, gaussian_kernel(9, 1.3)));
  EXPECT_GT(psnr_raw(degrade_blur(img, {7, 0.2}), img), psnr_raw(degrade_blur(img, {7, 3.0}), img));
}

TEST(Degradations, RingingOvershootsAtStepEdge) {
  ImageF32 step(48, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 48; ++x)
      for (int c = 0; c < 3; ++c) step.at(x, y, c) = x < 24 ? 0.0f : 1.0f;
  const auto k = sinc_kernel(15, 1.2);
  std::vector<double> plane(48 * 16), out(48 * 16);
  for (int i = 0; i < 48 * 16; ++i) plane[i] = step.data()[i * 3];
  detail::correlate_plane<double>(plane.data(), out.data(), 48, 16, 1, k);
  const double peak = *std::max_element(out.begin(), out.end());
  EXPECT_GE(peak - 1.0, 0.02);
  const ImageF32 flat(20, 20, 0.6f);
  {
    const auto result = degrade_ringing(flat, {15, 1.2});
    for (float s : result.data()) EXPECT_NEAR(s, 0.6f, 1e-6);
  }
  EXPECT_EQ(degrade_ringing(step, {15, 1.2}), convolve2d(step, k));
}

TEST(Degradations, ResizeContract) {
  const ImageF32 flat(37, 21, 0.35f);
  const auto out = degrade_resize(flat, {});
  ASSERT_TRUE(out.same_shape(flat));
  for (float s : out.data()) EXPECT_NEAR(s, 0.35f, 1e-6);
  for (auto [w, h] : {std::pair{4, 4}, std::pair{5, 9}, std::pair{63, 17}}) {
    EXPECT_TRUE(degrade_resize(random_image(w, h, 2), {}).same_shape(ImageF32(w, h)));
  }
  try {
    degrade_resize(ImageF32(3, 10), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ImageTooSmall);
  }
  const auto st = stripes(64, 64);
  EXPECT_LT(variance(degrade_resize(st, {})), 0.1 * variance(st));
}

TEST(Degradations, NoiseStatisticsAndIdentity) {
  const auto img = random_image(16, 16, 4);
  RngStream r0(1);
  EXPECT_EQ(degrade_noise(img, {0.0}, r0), img);
  const ImageF32 gray(1024, 1024, 0.5f);
  RngStream r1(7);
  const auto out = degrade_noise(gray, {20.0}, r1);
  double s = 0, s2 = 0;
  for (float v : out.data()) s += v - 0.5, s2 += (v - 0.5) * (v - 0.5);
  const double n = static_cast<double>(out.size());
  const double sd = std::sqrt(s2 / n - (s / n) * (s / n));
  EXPECT_GE(sd, 0.0768);
  EXPECT_LE(sd, 0.0800);
  RngStream a(5), b(5);
  EXPECT_EQ(degrade_noise(img, {20.0}, a), degrade_noise(img, {20.0}, b));
}

TEST(Degradations, JpegDegradation) {
  const ImageF32 gray(40, 24, 0.5f);
  for (int q : {30, 50, 95})
    {
      const auto result = degrade_jpeg(gray, {q});
      for (float s : result.data()) ASSERT_LE(std::abs(s - 0.5f), 2.0f / 255.0f + 1e-6f);
    }
  for (unsigned i = 0; i < 10; ++i) {
    const auto img = gir::test::scene_image(48, 40, 20 + i);
    EXPECT_GE(psnr_raw(degrade_jpeg(img, {95}), img), psnr_raw(degrade_jpeg(img, {30}), img));
  }
  // Blockiness: mean jump across 8-pixel column boundaries minus mean jump elsewhere.
  auto blockiness = [](const ImageF32& img) {
    double edge = 0, inner = 0;
    int ne = 0, ni = 0;
    for (int y = 0; y < img.height(); ++y)
      for (int x = 1; x < img.width(); ++x) {
        const double d = std::abs(img.at(x, y, 0) - img.at(x - 1, y, 0));
        if (x % 8 == 0) edge += d, ++ne;
        else inner += d, ++ni;
      }
    return edge / ne - inner / ni;
  };
  const auto img = gir::test::scene_image(96, 96, 5);
  EXPECT_GT(blockiness(degrade_jpeg(img, {30})), blockiness(degrade_jpeg(img, {95})));
}

TEST(Degradations, RichardsonLucyFixedPoints) {
  const auto img = random_image(16, 16, 6);
  for (int it : {1, 5, 20}) EXPECT_EQ(degrade_alg_artifact(img, {0.0, it}), img);
  const ImageF32 flat(16, 16, 0.45f);
  {
    const auto result = degrade_alg_artifact(flat, {1.5, 10});
    for (float s : result.data()) EXPECT_NEAR(s, 0.45f, 1e-6);
  }
  EXPECT_EQ(psf_ksize(1.5), 11);
  EXPECT_THROW(degrade_alg_artifact(img, {1.0, 0}), Error);
}

TEST(Degradations, RichardsonLucyOneIterationTranscription) {
  const auto img = random_image(16, 16, 8);
  const double sigma = 1.2;
  const int size = psf_ksize(sigma);
  const auto psf = gaussian_kernel(size, sigma);
  std::vector<double> p(psf.weights().begin(), psf.weights().end());
  std::vector<double> pf(p.rbegin(), p.rend());
  const auto out = degrade_alg_artifact(img, {sigma, 1});
  for (int c = 0; c < 3; ++c) {
    std::vector<double> u(256);
    for (int i = 0; i < 256; ++i) u[i] = img.data()[i * 3 + c];
    const auto blurred = brute_plane(u, 16, 16, p, size);
    std::vector<double> ratio(256);
    for (int i = 0; i < 256; ++i) ratio[i] = u[i] / std::max(blurred[i], 1e-6);
    const auto corr = brute_plane(ratio, 16, 16, pf, size);
    for (int i = 0; i < 256; ++i) ASSERT_NEAR(out.data()[i * 3 + c], std::clamp(u[i] * corr[i], 0.0, 1.0), 1e-6);
  }
}

TEST(Degradations, DamageContract) {
  const auto img = random_image(40, 30, 9);
  RngStream r0(1);
  EXPECT_EQ(degrade_damage(img, {0, 7, LineColor::White}, r0), img);
  for (auto color : {LineColor::White, LineColor::Black}) {
    RngStream r(2);
    const auto out = degrade_damage(img, {10, 7, color}, r);
    const float v = color == LineColor::White ? 1.0f : 0.0f;
    for (int i = 0; i < 40 * 30; ++i) {
      const bool changed = out.data()[i * 3] != img.data()[i * 3] || out.data()[i * 3 + 1] != img.data()[i * 3 + 1] ||
                           out.data()[i * 3 + 2] != img.data()[i * 3 + 2];
      if (!changed) continue;
      for (int c = 0; c < 3; ++c) ASSERT_EQ(out.data()[i * 3 + c], v);
    }
  }
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RngStream r(seed);
    const auto mask = damage_mask(480, 320, {10, 7, LineColor::White}, r);
    const double frac = std::count(mask.begin(), mask.end(), 1) / double(mask.size());
    ASSERT_GT(frac, 0.005);
    ASSERT_LT(frac, 0.30);
  }
}

TEST(Degradations, RainContract) {
  const auto img = random_image(64, 48, 10);
  RngStream r0(1);
  EXPECT_EQ(degrade_rain(img, {0.0}, r0), img);
  RngStream a(3), b(3);
  const auto out = degrade_rain(img, {75.0}, a);
  EXPECT_EQ(out, degrade_rain(img, {75.0}, b));
  for (std::size_t i = 0; i < img.size(); ++i) ASSERT_GE(out.data()[i], img.data()[i]);
  const ImageF32 gray(128, 128, 0.5f);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    RngStream r(seed);
    const double lift = mean(degrade_rain(gray, {75.0}, r)) - 0.5;
    ASSERT_GT(lift, 0.001);
    ASSERT_LT(lift, 0.15);
  }
  EXPECT_EQ(rain::streak_length(75.0), 15);
  EXPECT_EQ(rain::motion_kernel(4, 90).size(), 5);
}

TEST(Degradations, HazeAnalyticCases) {
  const auto img = random_image(12, 10, 11);
  EXPECT_EQ(degrade_haze(img, DepthMap(12, 10, 0.0f), {0.9, 1.8}), img);
  const auto half = degrade_haze(ImageF32(8, 8, 0.5f), DepthMap(8, 8, 1.0f), {1.0, std::numbers::ln2});
  for (float s : half.data()) EXPECT_EQ(s, 0.75f);
  const auto veiled = degrade_haze(img, DepthMap(12, 10, 10.0f), {0.85, 2.5});
  for (float s : veiled.data()) EXPECT_NEAR(s, 0.85, 1e-6);
  try {
    degrade_haze(img, DepthMap(11, 10), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(Degradations, SnowReducesToHazeWithoutFlakes) {
  const auto img = random_image(32, 24, 12);
  RngStream pr(4);
  const auto depth = synth_depth(32, 24, pr);
  RngStream r(5);
  EXPECT_EQ(degrade_snow(img, depth, {0.9, 0.75, 0.0}, r), degrade_haze(img, depth, {0.9, 0.75}));
  RngStream r2(6);
  EXPECT_EQ(degrade_snow(img, DepthMap(32, 24, 0.0f), {0.9, 0.75, 0.0}, r2), img);
}

TEST(Degradations, SnowFieldCoverage) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    RngStream a(seed), b(seed);
    const auto f = snow::make_field(512, 512, 200.0, a);
    const auto g = snow::make_field(512, 512, 200.0, b);
    ASSERT_EQ(f.mask, g.mask);
    const double frac = std::count(f.mask.begin(), f.mask.end(), 1) / double(f.mask.size());
    ASSERT_GT(frac, 0.002);
    ASSERT_LT(frac, 0.08);
    for (std::size_t i = 0; i < f.mask.size(); ++i)
      ASSERT_TRUE(!f.mask[i] || (f.intensity[i] >= 0.6 && f.intensity[i] <= 1.0));
  }
  EXPECT_EQ(snow::flake_count(1000, 1000, 200.0), 200);
}

TEST(Degradations, EveryOperatorPreservesDimensionsAndRange) {
  const auto img = random_image(29, 23, 13);
  const DepthMap depth(29, 23, 0.5f);
  RngStream rng(14);
  for (auto k : kAllKinds) {
    for (int i = 0; i < 5; ++i) {
      const auto p = i == 0 ? representative_params(k) : sample_params(k, rng);
      RngStream op(static_cast<std::uint64_t>(i));
      const auto out = apply_step(img, depth, p, op);
      ASSERT_TRUE(out.same_shape(img)) << kind_name(k);
      for (float s : out.data()) ASSERT_TRUE(s >= 0.0f && s <= 1.0f) << kind_name(k);
    }
  }
}
