#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "fbsdetect/dense_net.hpp"
#include "fbsdetect/errors.hpp"
#include "fbsdetect/forest.hpp"
#include "fbsdetect/kmeans.hpp"
#include "fbsdetect/random.hpp"

using namespace fbs;

namespace {

Matrix column(std::initializer_list<double> v) {
  Matrix m;
  for (double x : v) m.append_row(std::vector<double>{x});
  return m;
}

std::vector<double> sorted_centroids(const KMeansModel& m) {
  std::vector<double> c;
  for (const auto& v : m.centroids) c.push_back(v[0]);
  std::sort(c.begin(), c.end());
  return c;
}

double r_squared(const std::vector<double>& y, const std::vector<double>& p) {
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - p[i]) * (y[i] - p[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  return 1.0 - ss_res / ss_tot;
}

}  // namespace

TEST_CASE("kmeans splits two obvious groups") {
  const auto m = kmeans_fit(column({0, 0, 0, 10, 10, 10}), 2, 1);
  CHECK(sorted_centroids(m) == std::vector<double>{0, 10});
}

TEST_CASE("kmeans with one cluster returns the mean") {
  const auto m = kmeans_fit(column({1, 2, 3, 10}), 1, 4);
  REQUIRE(m.k() == 1);
  CHECK(m.centroids[0][0] == doctest::Approx(4.0));
}

TEST_CASE("kmeans finds the centres of two gaussian blobs") {
  Rng rng(11);
  Matrix pts;
  double sum_lo = 0, sum_hi = 0;
  for (int i = 0; i < 200; ++i) {
    const double v = (i % 2 ? 5.0 : -5.0) + 0.5 * rng.normal();
    (i % 2 ? sum_hi : sum_lo) += v;
    pts.append_row(std::vector<double>{v});
  }
  const auto c = sorted_centroids(kmeans_fit(pts, 2, 2));
  CHECK(std::abs(c[0] + 5) < 0.3);
  CHECK(std::abs(c[1] - 5) < 0.3);
  CHECK(c[0] == doctest::Approx(sum_lo / 100));
  CHECK(c[1] == doctest::Approx(sum_hi / 100));
}

TEST_CASE("kmeans needs at least k rows") {
  CHECK_THROWS_AS(kmeans_fit(column({1, 2}), 3, 1), ConfigError);
  CHECK_THROWS_AS(kmeans_fit(column({1, 2}), 0, 1), ConfigError);
}

TEST_CASE("kmeans drops clusters it cannot fill") {
  const auto m = kmeans_fit(column({3, 3, 3, 3, 3}), 4, 1);
  CHECK(m.k() >= 1);
  for (const auto& c : m.centroids) CHECK(c[0] == 3);
}

TEST_CASE("assignment picks the nearest centroid, ties to the lower index") {
  KMeansModel m{{{0.0}, {2.0}, {10.0}}};
  CHECK(kmeans_assign(std::vector<double>{2.0}, m) == 1);
  CHECK(kmeans_assign(std::vector<double>{1.0}, m) == 0);
  CHECK(kmeans_assign(std::vector<double>{6.0}, m) == 1);
  CHECK(kmeans_assign(std::vector<double>{100.0}, m) == 2);
}

TEST_CASE("assignment agrees with a brute-force scan") {
  Rng rng(8);
  KMeansModel m;
  for (int i = 0; i < 6; ++i) m.centroids.push_back({rng.uniform(-10, 10), rng.uniform(-10, 10)});
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> v{rng.uniform(-12, 12), rng.uniform(-12, 12)};
    std::size_t best = 0;
    double bd = INFINITY;
    for (std::size_t c = 0; c < m.centroids.size(); ++c) {
      const double d = std::pow(v[0] - m.centroids[c][0], 2) + std::pow(v[1] - m.centroids[c][1], 2);
      if (d < bd) {
        bd = d;
        best = c;
      }
    }
    CHECK(kmeans_assign(v, m) == best);
  }
}

TEST_CASE("kmeans is a function of its seed") {
  Rng rng(1);
  Matrix pts;
  for (int i = 0; i < 300; ++i) pts.append_row(std::vector<double>{rng.uniform(0, 100)});
  CHECK(kmeans_fit(pts, 4, 9).centroids == kmeans_fit(pts, 4, 9).centroids);
}

TEST_CASE("forest on a constant target predicts that constant") {
  Rng rng(2);
  Matrix X;
  std::vector<double> y;
  for (int i = 0; i < 100; ++i) {
    X.append_row(std::vector<double>{rng.uniform(), rng.uniform()});
    y.push_back(-77.5);
  }
  const auto f = forest_fit(X, y, {}, 3);
  for (int i = 0; i < 20; ++i) CHECK(forest_predict(f, std::vector<double>{rng.uniform(), rng.uniform()}) == -77.5);
}

TEST_CASE("forest learns y = x0 on a grid") {
  Matrix X, Xt;
  std::vector<double> y, yt;
  for (int i = 0; i < 40; ++i) {
    for (int j = 0; j < 10; ++j) {
      X.append_row(std::vector<double>{i / 4.0, j / 10.0});
      y.push_back(i / 4.0);
    }
  }
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const double x0 = rng.uniform(0, 9.75);
    Xt.append_row(std::vector<double>{x0, rng.uniform()});
    yt.push_back(x0);
  }
  const auto f = forest_fit(X, y, {}, 5);
  std::vector<double> p;
  for (std::size_t r = 0; r < Xt.rows(); ++r) p.push_back(forest_predict(f, Xt.row(r)));
  CHECK(r_squared(yt, p) >= 0.9);
}

TEST_CASE("a single deep tree memorises its training data") {
  Rng rng(6);
  Matrix X;
  std::vector<double> y;
  for (int i = 0; i < 80; ++i) {
    X.append_row(std::vector<double>{rng.uniform(), rng.uniform(), rng.uniform()});
    y.push_back(rng.normal());
  }
  ForestParams p{1, 0, 1, 3, false};
  const auto f = forest_fit(X, y, p, 1);
  for (std::size_t r = 0; r < X.rows(); ++r) CHECK(forest_predict(f, X.row(r)) == doctest::Approx(y[r]));
}

TEST_CASE("forest predictions stay within the training target range") {
  Rng rng(7);
  Matrix X;
  std::vector<double> y;
  for (int i = 0; i < 150; ++i) {
    X.append_row(std::vector<double>{rng.uniform(-5, 5), rng.uniform(-5, 5)});
    y.push_back(std::sin(X(i, 0)) + X(i, 1));
  }
  const auto f = forest_fit(X, y, {30, 8, 2, 0, true}, 8);
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  for (int i = 0; i < 300; ++i) {
    const double p = forest_predict(f, std::vector<double>{rng.uniform(-20, 20), rng.uniform(-20, 20)});
    CHECK(p >= *lo);
    CHECK(p <= *hi);
  }
}

TEST_CASE("forest prediction is the mean of its trees") {
  RandomForestRegressor f;
  f.n_features = 1;
  // Three hand-built stumps split at 0, 1 and 2.
  for (int t = 0; t < 3; ++t) {
    RegressionTree tree;
    tree.nodes.push_back({0, static_cast<double>(t), 1, 2, 0});
    tree.nodes.push_back({-1, 0, -1, -1, 10.0 * t});
    tree.nodes.push_back({-1, 0, -1, -1, 10.0 * t + 1});
    f.trees.push_back(tree);
  }
  // x = 1.5: right of 0 and 1, left of 2 -> 1, 11, 20.
  CHECK(forest_predict(f, std::vector<double>{1.5}) == doctest::Approx(32.0 / 3));
  // x = -1: all left -> 0, 10, 20.
  CHECK(forest_predict(f, std::vector<double>{-1}) == doctest::Approx(10.0));
  CHECK_THROWS_AS(forest_predict(f, std::vector<double>{1, 2}), ConfigError);
}

TEST_CASE("identical stumps predict their leaf value") {
  RandomForestRegressor f;
  f.n_features = 1;
  RegressionTree tree;
  tree.nodes.push_back({0, 0.5, 1, 2, 0});
  tree.nodes.push_back({-1, 0, -1, -1, -3});
  tree.nodes.push_back({-1, 0, -1, -1, 4});
  f.trees.assign(5, tree);
  CHECK(forest_predict(f, std::vector<double>{0.2}) == -3);
  CHECK(forest_predict(f, std::vector<double>{0.9}) == 4);
}

TEST_CASE("forest rejects empty or mismatched data") {
  Matrix X;
  std::vector<double> y;
  CHECK_THROWS_AS(forest_fit(X, y, {}, 1), ConfigError);
  X.append_row(std::vector<double>{1.0});
  y = {1, 2};
  CHECK_THROWS_AS(forest_fit(X, y, {}, 1), ConfigError);
}

TEST_CASE("backprop matches finite differences on a five-feature net") {
  const auto net = DenseNet::create({5, 4, 3, 4, 5}, Activation::kTanh, 12);
  Rng rng(3);
  std::vector<double> x(5);
  for (auto& v : x) v = rng.normal();
  CHECK(grad_check(net, x, 1e-4) < 1e-4);
}

TEST_CASE("linear nets give gradients exact to rounding") {
  const auto net = DenseNet::create({3, 2, 3}, Activation::kIdentity, 2);
  std::vector<double> x{0.3, -1.2, 0.8};
  CHECK(grad_check_abs(net, x, 1e-3) < 1e-9);
}

TEST_CASE("doubling eps roughly quadruples the truncation error") {
  const auto net = DenseNet::create({3, 3, 3}, Activation::kTanh, 5);
  std::vector<double> x{1.1, -0.4, 0.9};
  const double e1 = grad_check_abs(net, x, 2e-2);
  const double e2 = grad_check_abs(net, x, 4e-2);
  CHECK(e2 / e1 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("adam memorises a single repeated vector") {
  Matrix X;
  for (int i = 0; i < 40; ++i) X.append_row(std::vector<double>{0.5, -0.3, 0.8, 0.1});
  AdamTrainConfig cfg;
  cfg.epochs = 300;
  cfg.batch_size = 10;
  cfg.lr0 = 0.01;
  cfg.decay_every = 100;
  TrainHistory h;
  const auto net = adam_train(DenseNet::hourglass(4, Activation::kTanh, 1), X, cfg, 2, &h);
  CHECK(h.epoch_mse.back() < 1e-4);
  CHECK(mean_reconstruction_loss(net, X) == doctest::Approx(h.epoch_mse.back()));
}

TEST_CASE("adam lowers the training error on correlated data") {
  Rng rng(9);
  Matrix X;
  for (int i = 0; i < 300; ++i) {
    const double a = rng.normal(), b = rng.normal();
    X.append_row(std::vector<double>{a, b, a + b, a - b, 0.5 * a, rng.normal() * 0.1});
  }
  AdamTrainConfig cfg;
  cfg.epochs = 30;
  TrainHistory h;
  adam_train(DenseNet::hourglass(6, Activation::kTanh, 3), X, cfg, 4, &h);
  REQUIRE(h.epoch_mse.size() == 31);
  CHECK(h.epoch_mse.back() < h.epoch_mse.front());
}

TEST_CASE("adam reports divergence") {
  Matrix X;
  X.append_row(std::vector<double>{1e200, -1e200});
  AdamTrainConfig cfg;
  cfg.epochs = 2;
  CHECK_THROWS_AS(adam_train(DenseNet::create({2, 2}, Activation::kTanh, 1), X, cfg, 1), NumericalError);
}

TEST_CASE("adam validates its inputs") {
  Matrix X;
  X.append_row(std::vector<double>{1, 2});
  AdamTrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(adam_train(DenseNet::create({2, 2}, Activation::kTanh, 1), X, cfg, 1), ConfigError);
  cfg = AdamTrainConfig{};
  CHECK_THROWS_AS(adam_train(DenseNet::create({3, 3}, Activation::kTanh, 1), X, cfg, 1), ConfigError);
}

TEST_CASE("net parameters round trip through the flat vector") {
  auto net = DenseNet::create({4, 3, 4}, Activation::kTanh, 7);
  auto p = net.params();
  CHECK(p.size() == net.n_params());
  CHECK(net.n_params() == 4 * 3 + 3 + 3 * 4 + 4);
  for (auto& v : p) v *= 2;
  net.set_params(p);
  CHECK(net.params() == p);
  p.pop_back();
  CHECK_THROWS_AS(net.set_params(p), ConfigError);
}
