#pragma once

// Anomaly detection forest: random-split trees over a training subsample,
// with feature-wise anomaly borders stored at every leaf.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fbsdetect/matrix.hpp"

namespace fbs {

struct AdfParams {
  int n_trees = 150;
  int subsample = 512;
  double margin = 1.0;            // a: border extension in leaf widths
  double isolation_level = 0.05;  // eta: nodes with <= eta * |subsample| rows become leaves
  int max_depth = 14;
  // Smallest width a leaf may be normalised by, as a fraction of the
  // tree's subsample range of that feature (1.0 absolute if that is 0).
  double width_floor = 0.01;
};

struct AdfTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double split = 0.0;
    int left = -1;
    int right = -1;
    int leaf = -1;  // index into leaves
  };
  struct Leaf {
    std::vector<double> lo;     // anomaly borders
    std::vector<double> hi;
    std::vector<double> scale;  // normalising width per feature, > 0
    int size = 0;
  };

  std::vector<Node> nodes;
  std::vector<Leaf> leaves;

  const Leaf& leaf_for(std::span<const double> x) const;
  // Largest border excess over features, in units of the leaf's scale.
  double violation(std::span<const double> x) const;
};

struct AdfModel {
  AdfParams params;
  std::uint64_t seed = 0;
  std::size_t n_features = 0;
  std::size_t subsample_used = 0;
  std::vector<AdfTree> trees;
};

// Throws ConfigError on an empty matrix. When there are fewer rows than the
// requested subsample every tree uses all rows and `warning` is filled.
AdfModel adf_fit(const Matrix& X, const AdfParams& params, std::uint64_t seed,
                 std::string* warning = nullptr);

// Mean per-tree violation; 0 when the row sits inside every reached leaf.
double adf_score(const AdfModel& model, std::span<const double> row);

}  // namespace fbs
