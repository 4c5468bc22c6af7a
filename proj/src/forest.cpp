#include "fbsdetect/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fbsdetect/errors.hpp"
#include "fbsdetect/random.hpp"

namespace fbs {
namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double sse = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, std::span<const double> y, const ForestParams& params, Rng& rng)
      : X_(X), y_(y), params_(params), rng_(rng), features_(X.cols()) {
    std::iota(features_.begin(), features_.end(), 0);
    mtry_ = params.max_features > 0
                ? std::min<std::size_t>(static_cast<std::size_t>(params.max_features), X.cols())
                : std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(
                                               static_cast<double>(X.cols())))));
  }

  RegressionTree build(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::span<std::size_t> rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    double sum = 0.0;
    for (auto r : rows) sum += y_[r];
    const double mean = sum / static_cast<double>(rows.size());
    tree_.nodes[id].value = mean;

    const auto min_leaf = static_cast<std::size_t>(std::max(1, params_.min_leaf));
    if ((params_.max_depth > 0 && depth >= params_.max_depth) || rows.size() < 2 * min_leaf) {
      return id;
    }
    double sse = 0.0;
    for (auto r : rows) sse += (y_[r] - mean) * (y_[r] - mean);
    if (sse <= 1e-12 * std::max(1.0, mean * mean) * static_cast<double>(rows.size())) return id;

    const SplitChoice best = find_split(rows, min_leaf);
    if (best.feature < 0) return id;

    auto mid = std::partition(rows.begin(), rows.end(), [&](std::size_t r) {
      return X_(r, static_cast<std::size_t>(best.feature)) <= best.threshold;
    });
    const auto n_left = static_cast<std::size_t>(mid - rows.begin());
    const int left = grow(rows.first(n_left), depth + 1);
    const int right = grow(rows.subspan(n_left), depth + 1);
    auto& node = tree_.nodes[id];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  SplitChoice find_split(std::span<const std::size_t> rows, std::size_t min_leaf) {
    rng_.shuffle(std::span<std::size_t>(features_));
    SplitChoice best;
    best.sse = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, double>> xy(rows.size());
    for (std::size_t k = 0; k < features_.size(); ++k) {
      if (k >= mtry_ && best.feature >= 0) break;
      const std::size_t f = features_[k];
      for (std::size_t i = 0; i < rows.size(); ++i) xy[i] = {X_(rows[i], f), y_[rows[i]]};
      std::sort(xy.begin(), xy.end());
      if (xy.front().first == xy.back().first) continue;

      double total = 0.0, total_sq = 0.0;
      for (const auto& p : xy) {
        total += p.second;
        total_sq += p.second * p.second;
      }
      double left = 0.0, left_sq = 0.0;
      const std::size_t n = xy.size();
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left += xy[i].second;
        left_sq += xy[i].second * xy[i].second;
        const std::size_t nl = i + 1, nr = n - nl;
        if (nl < min_leaf || nr < min_leaf || xy[i].first == xy[i + 1].first) continue;
        const double right = total - left, right_sq = total_sq - left_sq;
        const double sse = (left_sq - left * left / nl) + (right_sq - right * right / nr);
        if (sse < best.sse) {
          best.sse = sse;
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (xy[i].first + xy[i + 1].first);
          // Guard against the midpoint rounding onto the upper value.
          if (best.threshold >= xy[i + 1].first) best.threshold = xy[i].first;
        }
      }
    }
    return best;
  }

  const Matrix& X_;
  std::span<const double> y_;
  const ForestParams& params_;
  Rng& rng_;
  std::vector<std::size_t> features_;
  std::size_t mtry_ = 1;
  RegressionTree tree_;
};

}  // namespace

double RegressionTree::predict(std::span<const double> x) const {
  int i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

RandomForestRegressor forest_fit(const Matrix& X, std::span<const double> y,
                                 const ForestParams& params, std::uint64_t seed) {
  if (X.rows() == 0 || X.cols() == 0) throw ConfigError("forest_fit: empty training data");
  if (X.rows() != y.size()) throw ConfigError("forest_fit: X and y differ in length");
  if (params.n_trees < 1) throw ConfigError("forest_fit: n_trees must be >= 1");

  RandomForestRegressor model;
  model.params = params;
  model.seed = seed;
  model.n_features = X.cols();
  model.trees.reserve(static_cast<std::size_t>(params.n_trees));
  const std::size_t n = X.rows();
  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> rows(n);
    if (params.bootstrap) {
      for (auto& r : rows) r = rng.index(n);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    TreeBuilder builder(X, y, params, rng);
    model.trees.push_back(builder.build(std::move(rows)));
  }
  return model;
}

double forest_predict(const RandomForestRegressor& model, std::span<const double> x) {
  if (x.size() != model.n_features) {
    throw ConfigError("forest_predict: expected " + std::to_string(model.n_features) +
                      " features, got " + std::to_string(x.size()));
  }
  double sum = 0.0;
  for (const auto& t : model.trees) sum += t.predict(x);
  return sum / static_cast<double>(model.trees.size());
}

}  // namespace fbs
