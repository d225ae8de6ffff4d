#pragma once

// Representative-task selection: histogram similarity between rendered
// candidate tasks, spectral clustering, medoid extraction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "gir/image.hpp"
#include "gir/parallel.hpp"
#include "gir/pipeline.hpp"
#include "gir/rng.hpp"

namespace gir {

using FeatureVector = std::vector<double>;

/// Per-channel histograms over [0,1] (last bucket right-closed), each channel
/// normalized to mass 1/3, concatenated as [R | G | B].
inline FeatureVector histogram_features(const ImageF32& img, int bins = 32) {
  if (bins < 2) fail(ErrorCode::InvalidParam, "histogram needs at least 2 bins");
  if (img.pixel_count() == 0) fail(ErrorCode::InvalidParam, "histogram of an empty image");
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(3 * bins), 0);
  const auto data = img.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int c = static_cast<int>(i % 3);
    const int b = std::clamp(static_cast<int>(std::floor(static_cast<double>(data[i]) * bins)), 0, bins - 1);
    ++counts[static_cast<std::size_t>(c * bins + b)];
  }
  FeatureVector f(counts.size());
  const double denom = 3.0 * static_cast<double>(img.pixel_count());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<double>(counts[i]) / denom;
  return f;
}

/// Histogram intersection, sum_i min(u_i, v_i).
inline double histogram_intersection(const FeatureVector& u, const FeatureVector& v) {
  if (u.size() != v.size()) fail(ErrorCode::LengthMismatch, "feature vectors differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += std::min(u[i], v[i]);
  return s;
}

/// Mean histogram intersection over paired renders of the same GT images.
inline double task_similarity(const std::vector<FeatureVector>& a, const std::vector<FeatureVector>& b) {
  if (a.size() != b.size()) {
    fail(ErrorCode::LengthMismatch, "render lists differ in length (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) fail(ErrorCode::LengthMismatch, "empty render lists");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += histogram_intersection(a[i], b[i]);
  return s / static_cast<double>(a.size());
}

/// Dense row-major symmetric matrix.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  explicit SimilarityMatrix(std::size_t n, double fill = 0.0) : n_(n), v_(n * n, fill) {}
  SimilarityMatrix(std::size_t n, std::vector<double> values) : n_(n), v_(std::move(values)) {
    if (v_.size() != n * n) fail(ErrorCode::DimensionMismatch, "matrix value count does not match n*n");
  }

  std::size_t size() const noexcept { return n_; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return v_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return v_[i * n_ + j]; }
  const std::vector<double>& values() const noexcept { return v_; }

  bool is_symmetric(double tol) const noexcept {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j)
        if (std::abs((*this)(i, j) - (*this)(j, i)) > tol) return false;
    return true;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> v_;
};

/// Renders every candidate on every GT image (candidate i on image g uses
/// lane g of its bound recipe) and assembles pairwise task similarities.
inline SimilarityMatrix build_similarity_matrix(const std::vector<TaskSpec>& candidates,
                                                const std::vector<ImageF32>& gt_images, int bins,
                                                std::uint64_t seed, int threads = 0) {
  if (candidates.size() < 2) fail(ErrorCode::InvalidParam, "need at least 2 candidates");
  if (gt_images.empty()) fail(ErrorCode::InvalidParam, "need at least 1 GT image");
  if (bins < 2) fail(ErrorCode::InvalidParam, "histogram needs at least 2 bins");
  const std::size_t n = candidates.size(), g = gt_images.size();
  std::vector<Recipe> recipes;
  recipes.reserve(n);
  for (const auto& c : candidates) recipes.push_back(bind_task(c, seed));
  std::vector<std::vector<FeatureVector>> feats(n, std::vector<FeatureVector>(g));
  parallel_for(n * g, threads, [&](std::size_t idx) {
    const std::size_t c = idx / g, i = idx % g;
    feats[c][i] = histogram_features(apply_recipe(gt_images[i], std::nullopt, recipes[c], i), bins);
  });
  SimilarityMatrix s(n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    s(a, a) = 1.0;
    for (std::size_t b = a + 1; b < n; ++b) s(a, b) = s(b, a) = task_similarity(feats[a], feats[b]);
  }
  return s;
}

struct EigenDecomposition {
  std::vector<double> values;   // ascending
  SimilarityMatrix vectors;     // column j is the eigenvector for values[j]
};

/// Cyclic Jacobi eigensolver for symmetric matrices. Sweeps until the
/// off-diagonal Frobenius norm drops below 1e-10.
inline EigenDecomposition jacobi_eigh(const SimilarityMatrix& m) {
  const std::size_t n = m.size();
  if (!m.is_symmetric(1e-9)) fail(ErrorCode::NotSymmetric, "jacobi_eigh requires a symmetric matrix");
  SimilarityMatrix a = m;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (m(i, j) + m(j, i));
  SimilarityMatrix v(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps && off_norm() >= 1e-10; ++sweep) {
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
  EigenDecomposition out{std::vector<double>(n), SimilarityMatrix(n, 0.0)};
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  return out;
}

struct ClusterAssignment {
  std::vector<int> labels;
  int k = 0;
  std::vector<std::size_t> centers;  // medoid index per cluster
  friend bool operator==(const ClusterAssignment&, const ClusterAssignment&) = default;
};

struct KMeansOptions {
  int restarts = 10;
  int max_iterations = 300;
};

namespace detail {

inline double sq_dist(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return s;
}

struct KMeansResult {
  std::vector<int> labels;
  double inertia = std::numeric_limits<double>::infinity();
  bool all_nonempty = false;
};

/// Lloyd iterations from a k-means++ seeding; ties go to the lowest index.
inline KMeansResult kmeans_once(const std::vector<std::vector<double>>& pts, int k, RngStream& rng, int max_iter) {
  const std::size_t n = pts.size();
  std::vector<std::vector<double>> centroids;
  centroids.push_back(pts[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1))]);
  std::vector<double> d2(n);
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids) best = std::min(best, sq_dist(pts[i], c));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = n - 1;
    if (total <= 0.0) {
      pick = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
    } else {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (r < acc) {
          pick = i;
          break;
        }
      }
    }
    centroids.push_back(pts[pick]);
  }

  KMeansResult res;
  res.labels.assign(n, -1);
  const std::size_t dim = pts.front().size();
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = sq_dist(pts[i], centroids[0]);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(pts[i], centroids[static_cast<std::size_t>(c)]);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (res.labels[i] != best) {
        res.labels[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(k), std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(res.labels[i]);
      ++counts[c];
      for (std::size_t d = 0; d < dim; ++d) sums[c][d] += pts[i][d];
    }
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
      if (counts[c] == 0) continue;  // an emptied cluster keeps its centroid
      for (std::size_t d = 0; d < dim; ++d) centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
    }
  }
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  res.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ++counts[static_cast<std::size_t>(res.labels[i])];
    res.inertia += sq_dist(pts[i], centroids[static_cast<std::size_t>(res.labels[i])]);
  }
  res.all_nonempty = std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
  return res;
}

/// Renames clusters in order of first appearance by point index.
inline std::vector<int> canonical_labels(const std::vector<int>& labels, int k) {
  std::vector<int> map(static_cast<std::size_t>(k), -1);
  int next = 0;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& m = map[static_cast<std::size_t>(labels[i])];
    if (m < 0) m = next++;
    out[i] = m;
  }
  return out;
}

}  // namespace detail

/// Normalized spectral clustering (Ng-Jordan-Weiss): eigenvectors of the k
/// smallest eigenvalues of L_sym, rows L2-normalized, k-means++ with
/// restarts; best inertia wins. Labels are numbered by first member index
/// and each center is the member with maximal within-cluster similarity.
inline ClusterAssignment spectral_cluster(const SimilarityMatrix& s, int k, std::uint64_t seed = 0,
                                          KMeansOptions opts = {}) {
  const std::size_t n = s.size();
  if (k < 2 || static_cast<std::size_t>(k) > n) {
    fail(ErrorCode::InvalidParam, "cluster count must be in [2, n], got k=" + std::to_string(k) + " n=" + std::to_string(n));
  }
  if (!s.is_symmetric(1e-9)) fail(ErrorCode::NotSymmetric, "similarity matrix is not symmetric");
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (s(i, j) < 0.0) fail(ErrorCode::InvalidParam, "similarities must be non-negative");
      d += s(i, j);
    }
    if (!(d > 0.0)) fail(ErrorCode::DegenerateMatrix, "zero-degree row " + std::to_string(i));
    inv_sqrt_deg[i] = 1.0 / std::sqrt(d);
  }

  ClusterAssignment out;
  out.k = k;
  if (static_cast<std::size_t>(k) == n) {
    out.labels.resize(n);
    std::iota(out.labels.begin(), out.labels.end(), 0);
  } else {
    SimilarityMatrix lap(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        lap(i, j) = (i == j ? 1.0 : 0.0) - inv_sqrt_deg[i] * s(i, j) * inv_sqrt_deg[j];
    const auto eig = jacobi_eigh(lap);
    std::vector<std::vector<double>> emb(n, std::vector<double>(static_cast<std::size_t>(k)));
    for (std::size_t i = 0; i < n; ++i) {
      double norm = 0.0;
      for (std::size_t j = 0; j < static_cast<std::size_t>(k); ++j) {
        emb[i][j] = eig.vectors(i, j);
        norm += emb[i][j] * emb[i][j];
      }
      norm = std::sqrt(norm);
      if (norm > 0.0)
        for (auto& x : emb[i]) x /= norm;
    }
    detail::KMeansResult best;
    for (int r = 0; r < opts.restarts; ++r) {
      RngStream rng = derive_rng(seed, 0x4B4D'4541'4E53ULL, static_cast<std::uint64_t>(r));
      auto res = detail::kmeans_once(emb, k, rng, opts.max_iterations);
      if (res.all_nonempty && res.inertia < best.inertia) best = std::move(res);
    }
    if (!best.all_nonempty) fail(ErrorCode::DegenerateMatrix, "k-means produced an empty cluster on every restart");
    out.labels = detail::canonical_labels(best.labels, k);
  }

  out.centers.assign(static_cast<std::size_t>(k), 0);
  std::vector<double> best_score(static_cast<std::size_t>(k), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    const int c = out.labels[i];
    double score = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (out.labels[j] == c) score += s(i, j);
    if (score > best_score[static_cast<std::size_t>(c)]) {
      best_score[static_cast<std::size_t>(c)] = score;
      out.centers[static_cast<std::size_t>(c)] = i;
    }
  }
  return out;
}

/// Medoid task of each cluster, largest clusters first (ties by task_id).
inline std::vector<TaskSpec> select_representatives(const std::vector<TaskSpec>& candidates, const SimilarityMatrix& s,
                                                    int per_order_count, std::uint64_t seed = 0) {
  if (candidates.size() != s.size()) fail(ErrorCode::DimensionMismatch, "candidate count does not match matrix size");
  if (per_order_count < 1 || static_cast<std::size_t>(per_order_count) > candidates.size()) {
    fail(ErrorCode::InvalidParam, "per-order count must be in [1, candidate count]");
  }
  std::vector<std::size_t> picks;
  std::vector<std::size_t> sizes;
  if (per_order_count == 1) {
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      double sc = 0.0;
      for (std::size_t j = 0; j < s.size(); ++j) sc += s(i, j);
      if (sc > best_score) best_score = sc, best = i;
    }
    picks = {best};
    sizes = {candidates.size()};
  } else {
    const auto ca = spectral_cluster(s, per_order_count, seed);
    sizes.assign(static_cast<std::size_t>(ca.k), 0);
    for (int l : ca.labels) ++sizes[static_cast<std::size_t>(l)];
    picks = ca.centers;
  }
  std::vector<std::size_t> order(picks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (sizes[x] != sizes[y]) return sizes[x] > sizes[y];
    return candidates[picks[x]].task_id < candidates[picks[y]].task_id;
  });
  std::vector<TaskSpec> out;
  for (auto c : order) out.push_back(candidates[picks[c]]);
  return out;
}

}  // namespace gir
