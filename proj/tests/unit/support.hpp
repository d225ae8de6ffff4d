#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "gir/gir.hpp"

namespace gir::test {

/// Uniform random image from a seeded std::mt19937 (kept independent of the
/// library's own RNG so tests do not share its bugs).
inline ImageF32 random_image(int w, int h, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ImageF32 img(w, h);
  for (float& s : img.data()) s = u(gen);
  return img;
}

/// Smooth synthetic scene: gradients plus a few soft discs.
inline ImageF32 scene_image(int w, int h, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double fx = 1 + 4 * u(gen), fy = 1 + 4 * u(gen), ph = 6.28 * u(gen);
  ImageF32 img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = 0.5 + 0.35 * std::sin(fx * x / w * 6.28 + ph + c) * std::cos(fy * y / h * 6.28 - c);
        img.at(x, y, c) = static_cast<float>(v);
      }
  for (int k = 0; k < 4; ++k) {
    const double cx = u(gen) * w, cy = u(gen) * h, r = (0.05 + 0.15 * u(gen)) * w;
    const double col[3] = {u(gen), u(gen), u(gen)};
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (std::hypot(x - cx, y - cy) < r)
          for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>(col[c]);
  }
  return img;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("gir_test_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

/// Writes `count` scene images named gt0.png, gt1.png, ... into `dir`.
inline void write_gt_dir(const std::filesystem::path& dir, int count, int w, int h, unsigned seed = 1) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < count; ++i) save_image(scene_image(w, h, seed + i), dir / ("gt" + std::to_string(i) + ".png"));
}

inline double max_abs_diff(const ImageF32& a, const ImageF32& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a.data()[i]) - b.data()[i]));
  return m;
}

/// Every regular file under `dir`, keyed by relative path, with its bytes.
inline std::map<std::string, std::string> read_tree(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[std::filesystem::relative(e.path(), dir).generic_string()] = ss.str();
  }
  return out;
}

}  // namespace gir::test
