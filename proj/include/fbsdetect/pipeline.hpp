#pragma once

// The stages behind the command line tool. Every stage reads and writes
// files under config.out_dir:
//
//   sim/train/                  reports.csv, topology.csv, manifest.json
//   sim/validation_p<P>/        first dwell_s seconds of the attack on P
//   sim/test_p<P>/              full attack on P
//   features/<scheme>/          serving_<S>.csv + serving_<S>.meta.json
//   models/<det>_<scheme>/      serving_<S>.json
//   reports/<det>_<scheme>/     calibration, recall, aggregated, scores
//   manifests/<stage>.json

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fbsdetect/config.hpp"
#include "fbsdetect/eval.hpp"

namespace fbs {

struct SimTarget {
  enum class Kind { kTrain, kValidation, kTest };
  Kind kind = Kind::kTrain;
  Pci pci = 0;

  // "benign" | "train" | "validation:P" | "attack:P" | "test:P"
  static SimTarget parse(std::string_view text);
  std::string dir_name() const;
};

// The simulator settings and scenario a target runs with.
SimConfig sim_config_for(const PipelineConfig& config, const SimTarget& target);
Scenario scenario_for(const PipelineConfig& config, const SimTarget& target);

// Training run plus a validation and a test run per scenario PCI.
std::vector<SimTarget> all_targets(const PipelineConfig& config);

// Detector and scheme pairs to train; rc is paired with col only.
std::vector<std::pair<DetectorKind, FeatureScheme>> model_combos(const PipelineConfig& config);

std::filesystem::path sim_dir(const PipelineConfig& config, const SimTarget& target);
std::filesystem::path features_dir(const PipelineConfig& config, FeatureScheme scheme);
std::filesystem::path models_dir(const PipelineConfig& config, DetectorKind kind, FeatureScheme scheme);
std::filesystem::path reports_dir(const PipelineConfig& config, DetectorKind kind, FeatureScheme scheme);

void cmd_simulate(const PipelineConfig& config, const std::optional<SimTarget>& only = std::nullopt);
void cmd_extract(const PipelineConfig& config);
// Refuses to replace existing model files unless force is set.
void cmd_train(const PipelineConfig& config, bool force);

struct CalibrationRow {
  Pci serving_pci = 0;
  double threshold = 0.0;
  long n_calibration = 0;
  long exceedances = 0;
  long n_static = 0;
};

struct ScenarioSeparation {
  Pci false_pci = 0;
  long n_tp = 0;
  long n_benign = 0;
  std::optional<double> mean_tp;
  std::optional<double> mean_benign;
};

struct ComboResult {
  DetectorKind detector = DetectorKind::kAdf;
  FeatureScheme scheme = FeatureScheme::kCol;
  std::vector<CalibrationRow> calibration;
  std::vector<RecallRow> recall;  // per scenario and serving cell, then pooled "all"
  std::vector<AggregatedReport> aggregated;
  std::vector<ScenarioSeparation> separation;
  std::map<Pci, std::vector<ScoreRow>> scores;  // per false PCI, by record id
};

struct EvaluateSummary {
  std::vector<ComboResult> combos;
  const ComboResult* find(DetectorKind kind, FeatureScheme scheme) const;
};

EvaluateSummary cmd_evaluate(const PipelineConfig& config);

// Human-readable digest of the written reports; also saved as
// reports/summary.txt.
std::string cmd_report(const PipelineConfig& config);

// simulate, extract, train, evaluate and report in order. A failing stage
// is rethrown with the stage name prefixed.
EvaluateSummary cmd_pipeline(const PipelineConfig& config);

}  // namespace fbs
