#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fbsdetect/matrix.hpp"

namespace fbs {

struct KMeansModel {
  std::vector<std::vector<double>> centroids;

  int k() const { return static_cast<int>(centroids.size()); }
};

struct KMeansFit {
  KMeansModel model;
  // Within-cluster sum of squares after every Lloyd iteration.
  std::vector<double> objective;
  std::vector<std::size_t> assignment;
  int iterations = 0;
};

// k-means++ seeding then Lloyd iterations until the assignment stops
// changing (at most max_iter rounds). Clusters that end up empty are
// dropped from the model, so model.k() can be below k when the data has
// fewer distinct points. Throws ConfigError when rows < k or k < 1.
KMeansFit kmeans_fit_detailed(const Matrix& points, int k, std::uint64_t seed, int max_iter = 100);

KMeansModel kmeans_fit(const Matrix& points, int k, std::uint64_t seed);

// Nearest centroid, ties to the lowest index.
std::size_t kmeans_assign(std::span<const double> value, const KMeansModel& model);

}  // namespace fbs
