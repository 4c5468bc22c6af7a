#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fbsdetect/matrix.hpp"

namespace fbs {

enum class Activation { kTanh, kIdentity };

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> bias;
};

// Fully connected net; hidden layers use `hidden`, the output layer is
// always linear.
struct DenseNet {
  std::vector<DenseLayer> layers;
  Activation hidden = Activation::kTanh;

  // Glorot-uniform weights, zero biases.
  static DenseNet create(const std::vector<std::size_t>& sizes, Activation hidden,
                         std::uint64_t seed);
  // [F, 0.8F, 0.5F, 0.8F, F], each hidden width rounded and at least 1.
  static DenseNet hourglass(std::size_t n_features, Activation hidden, std::uint64_t seed);

  std::vector<std::size_t> layer_sizes() const;
  std::size_t n_params() const;
  std::vector<double> params() const;  // layer by layer: weights then bias
  void set_params(std::span<const double> flat);

  std::vector<double> forward(std::span<const double> x) const;
};

// Mean squared reconstruction error (target = input) of one sample; adds
// d(loss)/d(params) into grad when it is non-empty.
double reconstruction_loss(const DenseNet& net, std::span<const double> x,
                           std::span<double> grad = {});

double mean_reconstruction_loss(const DenseNet& net, const Matrix& X);

struct AdamTrainConfig {
  int epochs = 150;
  int batch_size = 50;
  double lr0 = 0.002;
  double lr_decay = 0.8;
  int decay_every = 50;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Step schedule: lr0 * decay^floor((epoch - 1) / decay_every), epoch 1-based.
double learning_rate_at(const AdamTrainConfig& cfg, int epoch);

struct TrainHistory {
  // Full-set training MSE before training, then after each epoch.
  std::vector<double> epoch_mse;
};

// Throws NumericalError when a batch loss goes non-finite and ConfigError
// on an invalid config or width mismatch.
DenseNet adam_train(DenseNet net, const Matrix& X, const AdamTrainConfig& cfg, std::uint64_t seed,
                    TrainHistory* history = nullptr);

// Largest relative gap between backprop and central differences over all
// parameters: |a - n| / max(|a|, |n|, 1e-8).
double grad_check(const DenseNet& net, std::span<const double> x, double eps);

// Largest absolute gap, for step-size studies.
double grad_check_abs(const DenseNet& net, std::span<const double> x, double eps);

}  // namespace fbs
