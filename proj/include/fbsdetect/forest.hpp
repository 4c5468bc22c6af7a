#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fbsdetect/matrix.hpp"

namespace fbs {

struct ForestParams {
  int n_trees = 100;
  int max_depth = 16;    // 0 = unlimited
  int min_leaf = 2;
  int max_features = 0;  // 0 = round(sqrt(F)), at least 1
  bool bootstrap = true;
};

// CART regression tree; x[feature] <= threshold goes left.
struct RegressionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // mean target of the training rows reaching the node
  };

  std::vector<Node> nodes;

  double predict(std::span<const double> x) const;
};

struct RandomForestRegressor {
  ForestParams params;
  std::uint64_t seed = 0;
  std::size_t n_features = 0;
  std::vector<RegressionTree> trees;
};

// Bootstrap-bagged trees with variance-reduction splits over a random
// feature subset per node. If none of the sampled features can split a
// node, the remaining features are tried before making it a leaf.
// Throws ConfigError on empty data or |X| != |y|.
RandomForestRegressor forest_fit(const Matrix& X, std::span<const double> y,
                                 const ForestParams& params, std::uint64_t seed);

// Mean of the per-tree leaf values. Throws ConfigError on a width mismatch.
double forest_predict(const RandomForestRegressor& model, std::span<const double> x);

}  // namespace fbs
