#include "fbsdetect/dense_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fbsdetect/errors.hpp"
#include "fbsdetect/random.hpp"

namespace fbs {
namespace {

struct ForwardCache {
  std::vector<std::vector<double>> activations;  // a_0 = input .. a_L = output
};

ForwardCache run_forward(const DenseNet& net, std::span<const double> x) {
  ForwardCache cache;
  cache.activations.reserve(net.layers.size() + 1);
  cache.activations.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    const auto& a = cache.activations.back();
    std::vector<double> z(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) {
      double s = layer.bias[o];
      const double* w = layer.weights.data() + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) s += w[i] * a[i];
      z[o] = s;
    }
    const bool is_hidden = l + 1 < net.layers.size();
    if (is_hidden && net.hidden == Activation::kTanh) {
      for (auto& v : z) v = std::tanh(v);
    }
    cache.activations.push_back(std::move(z));
  }
  return cache;
}

}  // namespace

DenseNet DenseNet::create(const std::vector<std::size_t>& sizes, Activation hidden,
                          std::uint64_t seed) {
  if (sizes.size() < 2) throw ConfigError("DenseNet needs at least two layer sizes");
  Rng rng(seed);
  DenseNet net;
  net.hidden = hidden;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    if (sizes[l] == 0 || sizes[l + 1] == 0) throw ConfigError("DenseNet layer of width 0");
    DenseLayer layer;
    layer.in = sizes[l];
    layer.out = sizes[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    layer.weights.resize(layer.in * layer.out);
    for (auto& w : layer.weights) w = rng.uniform(-limit, limit);
    layer.bias.assign(layer.out, 0.0);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

DenseNet DenseNet::hourglass(std::size_t n_features, Activation hidden, std::uint64_t seed) {
  const double f = static_cast<double>(n_features);
  auto width = [f](double ratio) {
    return static_cast<std::size_t>(std::max(1L, std::lround(ratio * f)));
  };
  return create({n_features, width(0.8), width(0.5), width(0.8), n_features}, hidden, seed);
}

std::vector<std::size_t> DenseNet::layer_sizes() const {
  std::vector<std::size_t> sizes;
  if (layers.empty()) return sizes;
  sizes.push_back(layers.front().in);
  for (const auto& l : layers) sizes.push_back(l.out);
  return sizes;
}

std::size_t DenseNet::n_params() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

std::vector<double> DenseNet::params() const {
  std::vector<double> flat;
  flat.reserve(n_params());
  for (const auto& l : layers) {
    flat.insert(flat.end(), l.weights.begin(), l.weights.end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

void DenseNet::set_params(std::span<const double> flat) {
  if (flat.size() != n_params()) throw ConfigError("DenseNet::set_params: size mismatch");
  std::size_t k = 0;
  for (auto& l : layers) {
    for (auto& w : l.weights) w = flat[k++];
    for (auto& b : l.bias) b = flat[k++];
  }
}

std::vector<double> DenseNet::forward(std::span<const double> x) const {
  if (layers.empty() || x.size() != layers.front().in) {
    throw ConfigError("DenseNet::forward: input width mismatch");
  }
  return std::move(run_forward(*this, x).activations.back());
}

double reconstruction_loss(const DenseNet& net, std::span<const double> x, std::span<double> grad) {
  if (net.layers.empty() || x.size() != net.layers.front().in || x.size() != net.layers.back().out) {
    throw ConfigError("reconstruction_loss: width mismatch");
  }
  const auto cache = run_forward(net, x);
  const auto& out = cache.activations.back();
  const double n = static_cast<double>(x.size());
  double loss = 0.0;
  std::vector<double> delta(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = out[i] - x[i];
    loss += d * d;
    delta[i] = 2.0 * d / n;  // dL/da for the output, which is linear
  }
  loss /= n;
  if (grad.empty()) return loss;

  // Offsets of each layer's block in the flat parameter vector.
  std::vector<std::size_t> offset(net.layers.size());
  std::size_t k = 0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    offset[l] = k;
    k += net.layers[l].weights.size() + net.layers[l].bias.size();
  }
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const auto& layer = net.layers[li];
    const auto& a_prev = cache.activations[li];
    double* gw = grad.data() + offset[li];
    double* gb = gw + layer.weights.size();
    for (std::size_t o = 0; o < layer.out; ++o) {
      gb[o] += delta[o];
      for (std::size_t i = 0; i < layer.in; ++i) gw[o * layer.in + i] += delta[o] * a_prev[i];
    }
    if (li == 0) break;
    std::vector<double> prev(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double* w = layer.weights.data() + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) prev[i] += w[i] * delta[o];
    }
    if (net.hidden == Activation::kTanh) {
      for (std::size_t i = 0; i < layer.in; ++i) prev[i] *= 1.0 - a_prev[i] * a_prev[i];
    }
    delta = std::move(prev);
  }
  return loss;
}

double mean_reconstruction_loss(const DenseNet& net, const Matrix& X) {
  if (X.rows() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t r = 0; r < X.rows(); ++r) s += reconstruction_loss(net, X.row(r));
  return s / static_cast<double>(X.rows());
}

double learning_rate_at(const AdamTrainConfig& cfg, int epoch) {
  const int step = cfg.decay_every > 0 ? (epoch - 1) / cfg.decay_every : 0;
  return cfg.lr0 * std::pow(cfg.lr_decay, step);
}

DenseNet adam_train(DenseNet net, const Matrix& X, const AdamTrainConfig& cfg, std::uint64_t seed,
                    TrainHistory* history) {
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw ConfigError("adam_train: epochs and batch_size must be > 0");
  if (!(cfg.lr_decay > 0.0 && cfg.lr_decay <= 1.0)) throw ConfigError("adam_train: lr_decay must be in (0, 1]");
  if (X.rows() == 0) throw ConfigError("adam_train: no training rows");
  if (net.layers.empty() || X.cols() != net.layers.front().in) {
    throw ConfigError("adam_train: feature width mismatch");
  }
  Rng rng(seed);
  std::vector<double> theta = net.params();
  std::vector<double> m(theta.size(), 0.0), v(theta.size(), 0.0), grad(theta.size());
  std::vector<std::size_t> order(X.rows());
  std::iota(order.begin(), order.end(), 0);
  long t = 0;
  if (history) history->epoch_mse = {mean_reconstruction_loss(net, X)};

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = learning_rate_at(cfg, epoch);
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) batch_loss += reconstruction_loss(net, X.row(order[i]), grad);
      if (!std::isfinite(batch_loss)) {
        throw NumericalError("adam_train: non-finite loss at epoch " + std::to_string(epoch));
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      ++t;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
      for (std::size_t p = 0; p < theta.size(); ++p) {
        const double g = grad[p] * scale;
        m[p] = cfg.beta1 * m[p] + (1.0 - cfg.beta1) * g;
        v[p] = cfg.beta2 * v[p] + (1.0 - cfg.beta2) * g * g;
        theta[p] -= lr * (m[p] / bc1) / (std::sqrt(v[p] / bc2) + cfg.epsilon);
      }
      net.set_params(theta);
    }
    if (history) history->epoch_mse.push_back(mean_reconstruction_loss(net, X));
  }
  return net;
}

namespace {

template <class Metric>
double grad_gap(const DenseNet& net, std::span<const double> x, double eps, Metric metric) {
  std::vector<double> analytic(net.n_params(), 0.0);
  reconstruction_loss(net, x, analytic);
  DenseNet probe = net;
  std::vector<double> theta = net.params();
  double worst = 0.0;
  for (std::size_t p = 0; p < theta.size(); ++p) {
    const double saved = theta[p];
    theta[p] = saved + eps;
    probe.set_params(theta);
    const double up = reconstruction_loss(probe, x);
    theta[p] = saved - eps;
    probe.set_params(theta);
    const double down = reconstruction_loss(probe, x);
    theta[p] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    worst = std::max(worst, metric(analytic[p], numeric));
  }
  return worst;
}

}  // namespace

double grad_check(const DenseNet& net, std::span<const double> x, double eps) {
  return grad_gap(net, x, eps, [](double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
  });
}

double grad_check_abs(const DenseNet& net, std::span<const double> x, double eps) {
  return grad_gap(net, x, eps, [](double a, double n) { return std::abs(a - n); });
}

}  // namespace fbs
