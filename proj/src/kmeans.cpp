#include "fbsdetect/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "fbsdetect/errors.hpp"
#include "fbsdetect/random.hpp"

namespace fbs {
namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::size_t nearest(std::span<const double> p, const std::vector<std::vector<double>>& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = sq_dist(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

std::vector<std::vector<double>> seed_plus_plus(const Matrix& pts, int k, Rng& rng) {
  std::vector<std::vector<double>> centroids;
  auto first = pts.row(rng.index(pts.rows()));
  centroids.emplace_back(first.begin(), first.end());
  std::vector<double> d2(pts.rows());
  for (std::size_t i = 0; i < pts.rows(); ++i) d2[i] = sq_dist(pts.row(i), centroids[0]);
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0.0;
    for (double d : d2) total += d;
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      pick = pts.rows() - 1;
      for (std::size_t i = 0; i < pts.rows(); ++i) {
        target -= d2[i];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.index(pts.rows());
    }
    auto row = pts.row(pick);
    centroids.emplace_back(row.begin(), row.end());
    for (std::size_t i = 0; i < pts.rows(); ++i) {
      d2[i] = std::min(d2[i], sq_dist(pts.row(i), centroids.back()));
    }
  }
  return centroids;
}

}  // namespace

KMeansFit kmeans_fit_detailed(const Matrix& points, int k, std::uint64_t seed, int max_iter) {
  if (k < 1) throw ConfigError("k-means needs k >= 1");
  if (points.rows() < static_cast<std::size_t>(k)) {
    throw ConfigError("k-means needs at least k=" + std::to_string(k) + " points, got " +
                      std::to_string(points.rows()));
  }
  Rng rng(seed);
  KMeansFit fit;
  auto centroids = seed_plus_plus(points, k, rng);
  const std::size_t n = points.rows(), dim = points.cols();
  std::vector<std::size_t> assign(n, static_cast<std::size_t>(-1));

  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = nearest(points.row(i), centroids);
      if (c != assign[i]) {
        assign[i] = c;
        changed = true;
      }
    }
    if (!changed) break;
    ++fit.iterations;

    std::vector<std::vector<double>> sums(centroids.size(), std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(centroids.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto p = points.row(i);
      for (std::size_t d = 0; d < dim; ++d) sums[assign[i]][d] += p[d];
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      if (counts[c] == 0) continue;  // keeps its previous position
      for (std::size_t d = 0; d < dim; ++d) centroids[c][d] = sums[c][d] / counts[c];
    }
    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) wcss += sq_dist(points.row(i), centroids[assign[i]]);
    fit.objective.push_back(wcss);
  }

  // Drop empty clusters and renumber the assignment.
  std::vector<std::size_t> counts(centroids.size(), 0);
  for (auto a : assign) ++counts[a];
  std::vector<std::size_t> remap(centroids.size());
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    remap[c] = fit.model.centroids.size();
    if (counts[c] > 0) fit.model.centroids.push_back(centroids[c]);
  }
  for (auto& a : assign) a = remap[a];
  fit.assignment = std::move(assign);
  return fit;
}

KMeansModel kmeans_fit(const Matrix& points, int k, std::uint64_t seed) {
  return kmeans_fit_detailed(points, k, seed).model;
}

std::size_t kmeans_assign(std::span<const double> value, const KMeansModel& model) {
  return nearest(value, model.centroids);
}

}  // namespace fbs
