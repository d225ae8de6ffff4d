// Acceptance gate: one PASS/FAIL line per primary criterion. Exit status is
// nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "../unit/support.hpp"

using namespace gir;

namespace {

const std::filesystem::path kFixtures = GIR_FIXTURE_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string g3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string f4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol + 1e-12; }

Outcome fixture_reproduction() {
  Outcome o;
  const auto base = kFixtures / "appendix_baseline.csv";
  const auto models = kFixtures / "appendix_gir_rrdb.csv";
  const auto acc = load_score_table(base, "acceptance");
  const auto exc = load_score_table(base, "excellence");
  struct Expect {
    const char* column;
    double ar, ar_tol, er, er_tol, avg, avg_tol;
  };
  for (const Expect& e : {Expect{"df2k_all", 0.46, 0.03, 0.0, 0.0, 25.67, 0.02},
                          Expect{"batch32", 0.57, 0.03, 0.03, 0.02, 26.39, 0.02}}) {
    const auto m = load_score_table(models, e.column);
    const double ar = acceptance_ratio(m, acc), er = excellence_ratio(m, exc), avg = average_score(m);
    o.note(std::string(e.column) + " AR " + f4(ar) + " ER " + f4(er) + " avg " + f4(avg));
    o.check(near(ar, e.ar, e.ar_tol), std::string(e.column) + " AR");
    o.check(near(er, e.er, e.er_tol), std::string(e.column) + " ER");
    o.check(near(avg, e.avg, e.avg_tol), std::string(e.column) + " avg PSNR");
  }
  return o;
}

Outcome psnr_exactness() {
  Outcome o;
  const ImageF32 a(64, 64, 0.0f), b(64, 64, 0.1f);
  const double p = psnr(a, b);
  o.note("offset-0.1 " + f4(p) + " dB");
  o.check(near(p, 20.0, 1e-6), "constant offset 0.1 gives 20 dB");
  double worst = 0;
  for (unsigned s = 0; s < 100; ++s) {
    const auto x = gir::test::random_image(23, 19, s), y = gir::test::random_image(23, 19, 5000 + s);
    long double sum = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const long double d = static_cast<long double>(x.data()[i]) - y.data()[i];
      sum += d * d;
    }
    const double ref = static_cast<double>(10.0L * std::log10(static_cast<long double>(x.size()) / sum));
    worst = std::max(worst, std::abs(psnr(x, y) - ref));
  }
  o.note("oracle max diff " + g3(worst));
  o.check(worst < 1e-9, "brute-force MSE oracle within 1e-9 dB");
  o.check(psnr(a, a) == kInfinity, "identical images give +inf");
  return o;
}

Outcome determinism() {
  Outcome o;
  gir::test::TempDir tmp("acceptance_det");
  gir::test::write_gt_dir(tmp / "gt", 2, 256, 256, 21);
  const auto full = default_task_bank(0);
  const std::vector<TaskSpec> bank = {full[1], full[23], full[77]};
  build_testset(tmp / "gt", bank, tmp / "a", 2024, 1);
  build_testset(tmp / "gt", bank, tmp / "b", 2024, 1);
  build_testset(tmp / "gt", bank, tmp / "c", 2024, 8);
  const auto ta = gir::test::read_tree(tmp / "a");
  o.note(std::to_string(ta.size()) + " files per tree");
  o.check(ta.size() == 7, "3 tasks x 2 images + manifest");
  o.check(ta == gir::test::read_tree(tmp / "b"), "rebuild byte-identical");
  o.check(ta == gir::test::read_tree(tmp / "c"), "8-thread build byte-identical");
  return o;
}

Outcome degradation_analytics() {
  Outcome o;
  const auto img = gir::test::random_image(32, 32, 3);
  o.check(degrade_haze(img, DepthMap(32, 32, 0.0f), {0.9, 1.8}) == img, "haze d=0 identity");
  bool exact = true;
  {
    const auto result = degrade_haze(ImageF32(16, 16, 0.5f), DepthMap(16, 16, 1.0f), {1.0, std::numbers::ln2});
    for (float s : result.data())
      exact = exact && s == 0.75f;
  }
  o.check(exact, "haze d=1 beta=ln2 A=1 gives 0.75");
  RngStream pr(9);
  const auto depth = synth_depth(32, 32, pr);
  RngStream sr(1);
  o.check(degrade_snow(img, depth, {0.9, 0.75, 0.0}, sr) == degrade_haze(img, depth, {0.9, 0.75}), "snow without flakes equals haze");
  RngStream nr(2);
  o.check(degrade_noise(img, {0.0}, nr) == img, "noise sigma=0 identity");
  o.check(degrade_alg_artifact(img, {0.0, 10}) == img, "R-L delta PSF identity");
  double ksum_err = 0;
  for (int size : {1, 3, 7, 15, 23}) {
    for (double p : {0.2, 1.0, 3.0}) {  // gaussian sigma and sinc cutoff
      for (const auto& k : {gaussian_kernel(size, p), sinc_kernel(size, p)}) {
        double s = 0;
        for (double w : k.weights()) s += w;
        ksum_err = std::max(ksum_err, std::abs(s - 1.0));
      }
    }
  }
  o.check(ksum_err < 1e-6, "kernel normalization");
  double conv_err = 0;
  for (unsigned t = 0; t < 5; ++t) {
    const auto src = gir::test::random_image(32, 32, 100 + t);
    const auto k = gaussian_kernel(7, 0.8 + t * 0.4);
    const auto out = convolve2d(src, k);
    auto refl = [](int i, int n) {
      while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
      return i;
    };
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        for (int c = 0; c < 3; ++c) {
          double s = 0;
          for (int dy = -3; dy <= 3; ++dy)
            for (int dx = -3; dx <= 3; ++dx) s += k.at(dy + 3, dx + 3) * src.at(refl(x + dx, 32), refl(y + dy, 32), c);
          conv_err = std::max(conv_err, std::abs(std::clamp(s, 0.0, 1.0) - out.at(x, y, c)));
        }
  }
  o.check(conv_err < 1e-6, "convolution brute-force oracle");
  o.note("kernel sum err " + g3(ksum_err) + ", conv err " + g3(conv_err));
  return o;
}

Outcome jpeg_suite() {
  using namespace gir::jpeg;
  Outcome o;
  std::mt19937 gen(11);
  std::uniform_real_distribution<double> u(-128, 127);
  double worst = 0;
  for (int t = 0; t < 500; ++t) {
    Block f;
    for (auto& v : f) v = u(gen);
    const auto back = inverse_dct(forward_dct(f));
    for (int i = 0; i < 64; ++i) worst = std::max(worst, std::abs(back[i] - f[i]));
  }
  o.check(worst < 1e-4, "DCT/IDCT round trip");

  const HuffmanEncoder dce(dc_luma_spec()), ace(ac_luma_spec());
  const HuffmanDecoder dcd(dc_luma_spec()), acd(ac_luma_spec());
  std::vector<std::array<int, 64>> blocks;
  for (int b = 0; b < 1000; ++b) {
    std::array<int, 64> zz{};
    zz[0] = static_cast<int>(gen() % 2047) - 1023;
    for (int i = 1; i < 64; ++i)
      if (gen() % 4 == 0) zz[i] = static_cast<int>(gen() % 2047) - 1023;
    blocks.push_back(zz);
  }
  std::vector<std::uint8_t> bytes;
  BitWriter bw(bytes);
  int pred = 0;
  for (const auto& zz : blocks) encode_block(zz, pred, dce, ace, bw);
  bw.flush();
  bytes.push_back(0xFF);
  bytes.push_back(0xD9);
  BitReader br(bytes, 0);
  pred = 0;
  bool lossless = true;
  for (const auto& zz : blocks) lossless = lossless && decode_block(br, pred, dcd, acd) == zz;
  o.check(lossless, "Huffman lossless");

  // Annex K tables, listed here in natural (row-major) order.
  constexpr std::array<int, 64> luma = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                                        14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                                        18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                                        49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
  constexpr std::array<int, 64> chroma = {17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
                                          24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
                                          99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
                                          99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};
  const auto t50 = quality_to_tables(50);
  bool tables = true;
  for (int i = 0; i < 64; ++i) {
    tables = tables && t50.luma[static_cast<std::size_t>(i)] == luma[static_cast<std::size_t>(kZigzag[static_cast<std::size_t>(i)])];
    tables = tables && t50.chroma[static_cast<std::size_t>(i)] == chroma[static_cast<std::size_t>(kZigzag[static_cast<std::size_t>(i)])];
  }
  o.check(tables, "quality-50 tables equal Annex K");

  std::vector<double> means;
  for (int q : {30, 50, 70, 90, 95}) {
    double sum = 0;
    for (unsigned i = 0; i < 10; ++i) {
      const auto img = gir::test::scene_image(64, 64, 300 + i);
      sum += psnr(jpeg_decode(jpeg_encode(img, q)), img);
    }
    means.push_back(sum / 10);
  }
  std::string series;
  for (double m : means) series += (series.empty() ? "" : ",") + f4(m);
  o.note("mean PSNR " + series);
  o.check(std::is_sorted(means.begin(), means.end()), "mean PSNR non-decreasing in quality");
  return o;
}

Outcome clustering_suite() {
  Outcome o;
  std::vector<int> truth;
  for (int b = 0; b < 3; ++b)
    for (int i = 0; i < 5; ++i) truth.push_back(b);
  SimilarityMatrix s(15);
  for (std::size_t i = 0; i < 15; ++i)
    for (std::size_t j = 0; j < 15; ++j) s(i, j) = i == j ? 1.0 : (truth[i] == truth[j] ? 0.9 : 0.1);
  int recovered = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto labels = spectral_cluster(s, 3, seed).labels;
    std::set<std::pair<int, int>> pairs;
    for (std::size_t i = 0; i < 15; ++i) pairs.insert({truth[i], labels[i]});
    recovered += pairs.size() == 3;
  }
  o.note(std::to_string(recovered) + "/100 planted recoveries");
  o.check(recovered == 100, "planted 3-block recovery on 100 seeds");

  std::mt19937 gen(5);
  std::uniform_real_distribution<double> u(-1, 1);
  SimilarityMatrix m(20);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = i; j < 20; ++j) m(i, j) = m(j, i) = u(gen);
  const auto e = jacobi_eigh(m);
  double frob = 0;
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 20; ++j) {
      double r = 0;
      for (std::size_t k = 0; k < 20; ++k) r += e.vectors(i, k) * e.values[k] * e.vectors(j, k);
      frob += (r - m(i, j)) * (r - m(i, j));
    }
  o.note("jacobi residual " + g3(std::sqrt(frob)));
  o.check(std::sqrt(frob) < 1e-7, "jacobi reconstruction");
  const double chi = calinski_harabasz({{0}, {1}, {10}, {11}}, {0, 0, 1, 1});
  o.check(near(chi, 200.0, 1e-9), "CHI hand example");
  return o;
}

Outcome protocol_structure() {
  Outcome o;
  using K = DegradationKind;
  const auto bank = default_task_bank(0);
  o.check(bank.size() == 100, "100 tasks");
  std::array<int, 6> mix{}, rnd{};
  int singles = 0;
  for (std::size_t i = 0; i < bank.size() && i < 100; ++i) {
    const auto n = bank[i].recipe.steps.size();
    if (i < 10) singles += n == 1;
    else if (i < 50) ++mix[n];
    else ++rnd[n];
  }
  o.check(singles == 10, "10 single tasks");
  o.check(mix == (std::array<int, 6>{0, 0, 10, 10, 10, 10}), "40 mixtures, 10 per order 2..5");
  o.check(rnd == (std::array<int, 6>{0, 10, 10, 10, 10, 10}), "50 random, 10 per order 1..5");
  o.check(bank[10].recipe.kinds() == std::vector<K>{K::Rain, K::Ringing}, "row 11");
  o.check(bank[14].recipe.kinds() == std::vector<K>{K::Haze, K::Noise}, "row 15");
  o.check(bank[38].recipe.kinds() == std::vector<K>(4, K::Blur), "row 39");
  o.check(bank[49].recipe.kinds() == std::vector<K>{K::Haze, K::Compression, K::Damage, K::Compression, K::Noise}, "row 50");
  RngStream rng(99);
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto r = sample_recipe(1 + i % 5, rng);
    int weather = 0;
    for (const auto& st : r.steps) {
      if (!weather_only_first(st.kind)) continue;
      ++weather;
      if (st.step_index != 0) ++violations;
    }
    if (weather > 1) ++violations;
  }
  o.note(std::to_string(violations) + " weather-rule violations in 10000 recipes");
  o.check(violations == 0, "weather-first constraint");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "AR/ER fixture reproduction", 1, fixture_reproduction},
      {2, "PSNR exactness", 1, psnr_exactness},
      {3, "determinism suite", 30, determinism},
      {4, "degradation analytic suite", 10, degradation_analytics},
      {5, "JPEG codec suite", 30, jpeg_suite},
      {6, "clustering suite", 10, clustering_suite},
      {7, "protocol structure", 10, protocol_structure},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) {
      o.pass = false;
      o.detail += "; over runtime budget";
    }
    failed += !o.pass;
    std::printf("criterion %d %s: %s (%.2fs) %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", secs, o.detail.c_str());
  }
  std::fflush(stdout);
  return failed ? 1 : 0;
}
