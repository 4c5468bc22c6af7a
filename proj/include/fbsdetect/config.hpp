#pragma once

// Pipeline configuration as flat "key = value" text. Keys mirror the
// SimConfig field names ("grid.delta_x_m", "propagation.carrier_mhz", ...)
// plus the pipeline's own settings.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fbsdetect/detector.hpp"
#include "fbsdetect/radio_sim.hpp"

namespace fbs {

struct PipelineConfig {
  SimConfig sim;  // the benign training run
  int test_n_ues = 100;  // UEs in validation and test runs
  std::uint64_t validation_seed = 1;
  std::uint64_t test_seed = 9;
  double dwell_s = 200.0;
  double travel_s = 120.0;
  // Which PCIs take turns as the false cell; nullopt means every cell.
  std::optional<std::vector<Pci>> scenarios;
  std::vector<FeatureScheme> schemes{FeatureScheme::kCol};
  std::vector<DetectorKind> detectors{DetectorKind::kAdf};
  DetectorParams params;
  ImputePolicy impute = ImputePolicy::fill(0.0);
  double target_fpr = 0.005;
  double position_bin_s = 1.0;
  std::string out_dir = "fbs_out";

  std::vector<Pci> scenario_pcis() const;
  // Moves all three seeds so the training seed becomes `seed`.
  void reseed(std::uint64_t seed);
};

// Throws ConfigError on any broken invariant.
void validate(const PipelineConfig& config);

// Unknown keys and malformed values throw ConfigError naming the line.
PipelineConfig parse_config(std::istream& in, PipelineConfig base = {});
PipelineConfig load_config(const std::string& path, PipelineConfig base = {});

// Canonical text: every key in a fixed order. Parsing it gives back the
// same configuration.
std::string to_text(const PipelineConfig& config);

// FNV-1a of the canonical text, as 16 hex digits.
std::string config_hash(const PipelineConfig& config);

}  // namespace fbs
