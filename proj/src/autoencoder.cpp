#include "fbsdetect/autoencoder.hpp"

#include <cmath>

#include "fbsdetect/errors.hpp"
#include "fbsdetect/random.hpp"

namespace fbs {

Standardizer Standardizer::fit(const Matrix& X) {
  Standardizer s;
  const std::size_t F = X.cols();
  s.mean.assign(F, 0.0);
  s.std.assign(F, 1.0);
  if (X.rows() == 0) return s;
  const double n = static_cast<double>(X.rows());
  for (std::size_t c = 0; c < F; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < X.rows(); ++r) sum += X(r, c);
    const double mu = sum / n;
    double ss = 0.0;
    for (std::size_t r = 0; r < X.rows(); ++r) ss += (X(r, c) - mu) * (X(r, c) - mu);
    const double sd = std::sqrt(ss / n);
    s.mean[c] = mu;
    // Anything this small relative to the mean is rounding noise.
    if (sd > 1e-12 * std::max(1.0, std::abs(mu))) s.std[c] = sd;
  }
  return s;
}

std::vector<double> Standardizer::apply(std::span<const double> row) const {
  if (row.size() != mean.size()) throw ConfigError("Standardizer: row width mismatch");
  std::vector<double> out(row.size());
  for (std::size_t c = 0; c < row.size(); ++c) out[c] = (row[c] - mean[c]) / std[c];
  return out;
}

Matrix Standardizer::apply(const Matrix& X) const {
  Matrix out(X.rows(), X.cols());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto z = apply(X.row(r));
    std::copy(z.begin(), z.end(), out.row(r).begin());
  }
  return out;
}

AutoencoderModel ae_fit(const Matrix& X, const AdamTrainConfig& cfg, std::uint64_t seed,
                        TrainHistory* history) {
  if (X.cols() < 2) throw ConfigError("ae_fit: need at least 2 features");
  if (X.rows() == 0) throw ConfigError("ae_fit: empty training matrix");
  AutoencoderModel model;
  model.train = cfg;
  model.seed = seed;
  model.standardizer = Standardizer::fit(X);
  const Matrix Z = model.standardizer.apply(X);
  DenseNet net = DenseNet::hourglass(X.cols(), Activation::kTanh, derive_seed(seed, 1));
  model.net = adam_train(std::move(net), Z, cfg, derive_seed(seed, 2), history);
  return model;
}

double ae_score(const AutoencoderModel& model, std::span<const double> row) {
  const auto z = model.standardizer.apply(row);
  return reconstruction_loss(model.net, z);
}

}  // namespace fbs
