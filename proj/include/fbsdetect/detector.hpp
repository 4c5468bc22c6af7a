#pragma once

// One trained novelty detector for one serving cell: the model, the feature
// layout and imputation it was trained with, the neighbour catalog, and the
// calibrated threshold. Persisted as a JSON document.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fbsdetect/adf.hpp"
#include "fbsdetect/autoencoder.hpp"
#include "fbsdetect/features.hpp"
#include "fbsdetect/regression_clustering.hpp"

namespace fbs {

enum class DetectorKind { kRc, kAdf, kAe };

std::string to_string(DetectorKind kind);
DetectorKind parse_detector(std::string_view name);  // "rc" | "adf" | "ae"

struct DetectorParams {
  RcParams rc;
  AdfParams adf;
  AdamTrainConfig ae;
};

struct Evaluation {
  std::vector<double> scores;
  std::vector<unsigned char> flagged;
};

class Detector {
 public:
  // `train` must be extracted with `scheme` against `catalog`. RC accepts
  // COL only.
  static Detector fit(DetectorKind kind, FeatureScheme scheme, const FeatureMatrix& train,
                      const NeighborCatalog& catalog, const ImputePolicy& impute,
                      const DetectorParams& params, std::uint64_t seed);

  DetectorKind kind() const { return kind_; }
  FeatureScheme scheme() const { return scheme_; }
  Pci serving_pci() const { return catalog_.serving_pci; }
  std::uint64_t seed() const { return seed_; }
  const NeighborCatalog& catalog() const { return catalog_; }
  const ImputePolicy& impute_policy() const { return impute_; }
  const std::vector<double>& fill() const { return fill_; }
  std::optional<double> threshold() const { return threshold_; }
  // e.g. "adf(col)"
  std::string id() const;

  template <class T>
  const T& model() const { return std::get<T>(model_); }

  FeatureMatrix extract(std::span<const ReportRecord> records) const;

  // Scores for every row; flags are all 0 until a threshold is set.
  Evaluation evaluate(const FeatureMatrix& m) const;

  // Sets and returns the threshold so that at most floor(n * target) benign
  // rows are flagged.
  double calibrate(const FeatureMatrix& benign, double target_fpr);
  void set_threshold(std::optional<double> t);

  std::string to_json() const;
  static Detector from_json(std::string_view text);
  void save(const std::string& path) const;
  static Detector load(const std::string& path);

  friend bool operator==(const Detector& a, const Detector& b) { return a.to_json() == b.to_json(); }

 private:
  DetectorKind kind_ = DetectorKind::kAdf;
  FeatureScheme scheme_ = FeatureScheme::kCol;
  NeighborCatalog catalog_;
  ImputePolicy impute_;
  std::vector<double> fill_;
  std::vector<std::string> columns_;
  DetectorParams params_;
  std::uint64_t seed_ = 0;
  std::optional<double> threshold_;
  std::variant<RegressionClusteringModel, AdfModel, AutoencoderModel> model_;
};

}  // namespace fbs
