#include "fbsdetect/adf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fbsdetect/errors.hpp"
#include "fbsdetect/random.hpp"

namespace fbs {
namespace {

class AdfTreeBuilder {
 public:
  AdfTreeBuilder(const Matrix& X, const AdfParams& params, std::size_t subsample, Rng& rng)
      : X_(X), params_(params), rng_(rng),
        leaf_limit_(params.isolation_level * static_cast<double>(subsample)) {}

  AdfTree build(std::vector<std::size_t> rows) {
    const std::size_t F = X_.cols();
    floor_.assign(F, 1.0);
    for (std::size_t f = 0; f < F; ++f) {
      const auto [lo, hi] = range(rows, f);
      if (hi > lo) floor_[f] = params_.width_floor * (hi - lo);
    }
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  std::pair<double, double> range(std::span<const std::size_t> rows, std::size_t f) const {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto r : rows) {
      lo = std::min(lo, X_(r, f));
      hi = std::max(hi, X_(r, f));
    }
    return {lo, hi};
  }

  int grow(std::span<std::size_t> rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    if (depth >= params_.max_depth || static_cast<double>(rows.size()) <= leaf_limit_) {
      make_leaf(id, rows);
      return id;
    }
    // Only features that still vary inside the node can split it.
    std::vector<std::size_t> candidates;
    std::vector<std::pair<double, double>> ranges(X_.cols());
    for (std::size_t f = 0; f < X_.cols(); ++f) {
      ranges[f] = range(rows, f);
      if (ranges[f].second > ranges[f].first) candidates.push_back(f);
    }
    if (candidates.empty()) {
      make_leaf(id, rows);
      return id;
    }
    const std::size_t f = candidates[rng_.index(candidates.size())];
    const auto [lo, hi] = ranges[f];
    double split = lo + rng_.uniform() * (hi - lo);
    if (split >= hi) split = lo;
    auto mid = std::partition(rows.begin(), rows.end(), [&](std::size_t r) { return X_(r, f) <= split; });
    const auto n_left = static_cast<std::size_t>(mid - rows.begin());
    const int left = grow(rows.first(n_left), depth + 1);
    const int right = grow(rows.subspan(n_left), depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = static_cast<int>(f);
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
  }

  void make_leaf(int id, std::span<const std::size_t> rows) {
    const std::size_t F = X_.cols();
    AdfTree::Leaf leaf;
    leaf.lo.resize(F);
    leaf.hi.resize(F);
    leaf.scale.resize(F);
    leaf.size = static_cast<int>(rows.size());
    for (std::size_t f = 0; f < F; ++f) {
      const auto [lo, hi] = range(rows, f);
      const double width = hi - lo;
      leaf.lo[f] = lo - params_.margin * width;
      leaf.hi[f] = hi + params_.margin * width;
      leaf.scale[f] = std::max(width, floor_[f]);
    }
    tree_.nodes[static_cast<std::size_t>(id)].leaf = static_cast<int>(tree_.leaves.size());
    tree_.leaves.push_back(std::move(leaf));
  }

  const Matrix& X_;
  const AdfParams& params_;
  Rng& rng_;
  double leaf_limit_;
  std::vector<double> floor_;
  AdfTree tree_;
};

}  // namespace

const AdfTree::Leaf& AdfTree::leaf_for(std::span<const double> x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.split ? n.left : n.right);
  }
  return leaves[static_cast<std::size_t>(nodes[i].leaf)];
}

double AdfTree::violation(std::span<const double> x) const {
  const Leaf& leaf = leaf_for(x);
  double worst = 0.0;
  for (std::size_t f = 0; f < x.size(); ++f) {
    double excess = 0.0;
    if (x[f] < leaf.lo[f]) {
      excess = leaf.lo[f] - x[f];
    } else if (x[f] > leaf.hi[f]) {
      excess = x[f] - leaf.hi[f];
    }
    worst = std::max(worst, excess / leaf.scale[f]);
  }
  return worst;
}

AdfModel adf_fit(const Matrix& X, const AdfParams& params, std::uint64_t seed, std::string* warning) {
  if (X.rows() == 0 || X.cols() == 0) throw ConfigError("adf_fit: empty training matrix");
  if (params.n_trees < 1 || params.subsample < 1 || params.max_depth < 0) {
    throw ConfigError("adf_fit: invalid parameters");
  }
  AdfModel model;
  model.params = params;
  model.seed = seed;
  model.n_features = X.cols();
  model.subsample_used = std::min<std::size_t>(X.rows(), static_cast<std::size_t>(params.subsample));
  if (model.subsample_used < static_cast<std::size_t>(params.subsample) && warning) {
    *warning = "adf_fit: only " + std::to_string(X.rows()) + " rows, each tree uses all of them";
  }
  model.trees.reserve(static_cast<std::size_t>(params.n_trees));
  std::vector<std::size_t> all(X.rows());
  std::iota(all.begin(), all.end(), 0);
  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> rows = all;
    if (model.subsample_used < rows.size()) {
      // Partial Fisher-Yates: the first k entries are a uniform sample.
      for (std::size_t i = 0; i < model.subsample_used; ++i) {
        std::swap(rows[i], rows[i + rng.index(rows.size() - i)]);
      }
      rows.resize(model.subsample_used);
    }
    AdfTreeBuilder builder(X, params, model.subsample_used, rng);
    model.trees.push_back(builder.build(std::move(rows)));
  }
  return model;
}

double adf_score(const AdfModel& model, std::span<const double> row) {
  if (row.size() != model.n_features) throw ConfigError("adf_score: row width mismatch");
  double sum = 0.0;
  for (const auto& t : model.trees) sum += t.violation(row);
  return sum / static_cast<double>(model.trees.size());
}

}  // namespace fbs
