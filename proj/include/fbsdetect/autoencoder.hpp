#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fbsdetect/dense_net.hpp"
#include "fbsdetect/matrix.hpp"

namespace fbs {

// Per-column z-scoring. Columns without variance keep std 1.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> std;

  static Standardizer fit(const Matrix& X);
  std::vector<double> apply(std::span<const double> row) const;
  Matrix apply(const Matrix& X) const;
};

struct AutoencoderModel {
  Standardizer standardizer;
  DenseNet net;
  AdamTrainConfig train;
  std::uint64_t seed = 0;
};

// Hourglass net [F, .8F, .5F, .8F, F] with tanh hidden layers trained with
// Adam on the standardised rows. Throws ConfigError when F < 2.
AutoencoderModel ae_fit(const Matrix& X, const AdamTrainConfig& cfg, std::uint64_t seed,
                        TrainHistory* history = nullptr);

// Reconstruction MSE in standardised space.
double ae_score(const AutoencoderModel& model, std::span<const double> row);

}  // namespace fbs
