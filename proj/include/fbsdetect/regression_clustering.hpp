#pragma once

// Regression Clustering over COL rows. For every catalog cell C and every
// other catalog cell nC, a forest predicts RSRP(C) from the remaining
// cells, one forest per k-means cluster of RSRP(C). A row is flagged when,
// for some C, leaving out exactly one nC brings the prediction within the
// threshold: that nC is the suspect.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fbsdetect/features.hpp"
#include "fbsdetect/forest.hpp"
#include "fbsdetect/kmeans.hpp"

namespace fbs {

struct RcParams {
  int k = 4;
  int min_records = 50;
  ForestParams forest{20, 10, 3, 0, true};
};

struct RcPair {
  Pci excluded = 0;                 // nC
  std::vector<std::size_t> inputs;  // COL columns of notC - nC
  std::vector<RandomForestRegressor> forests;  // one per cluster
};

struct RcCellModel {
  Pci pci = 0;  // C
  std::size_t column = 0;
  KMeansModel clusters;
  std::vector<RcPair> pairs;
};

struct RegressionClusteringModel {
  RcParams params;
  std::uint64_t seed = 0;
  std::size_t n_features = 0;
  std::vector<double> fill;  // imputation applied to missing COL entries
  std::vector<Pci> catalog;
  std::vector<std::size_t> columns;  // COL column of each catalog PCI
  std::vector<RcCellModel> cells;
  std::vector<Pci> omitted;  // catalog cells seen in fewer than min_records rows
  double threshold = 0.0;

  std::optional<std::size_t> column_of(Pci pci) const;
};

// Throws ConfigError when the matrix does not have the catalog's COL shape.
RegressionClusteringModel rc_fit(const FeatureMatrix& col, std::span<const double> fill,
                                 const NeighborCatalog& catalog, const RcParams& params,
                                 std::uint64_t seed);

// Absolute residues |y - yP| of one target cell, ascending (ties by PCI).
struct RcCellResidues {
  Pci cell = 0;
  std::vector<std::pair<double, Pci>> residues;
};
using RcRowResidues = std::vector<RcCellResidues>;

// Only cells and left-out neighbours actually reported in the row take part.
RcRowResidues rc_residues(const RegressionClusteringModel& model, std::span<const double> values,
                          std::span<const unsigned char> missing);
RcRowResidues rc_residues(const RegressionClusteringModel& model, const FeatureMatrix& m,
                          std::size_t row);

struct RcVerdict {
  bool flagged = false;
  std::optional<Pci> culprit;

  friend bool operator==(const RcVerdict&, const RcVerdict&) = default;
};

// A target cell votes when exactly one of its residues is <= threshold; the
// culprit is the majority vote, ties to the lowest PCI.
RcVerdict rc_verdict(const RcRowResidues& residues, double threshold);
RcVerdict rc_evaluate(const RegressionClusteringModel& model, const FeatureMatrix& m,
                      std::size_t row);

// Graded score: the largest second-smallest residue over target cells.
// Zero when no cell has two residues.
double rc_score(const RcRowResidues& residues);

// Smallest threshold t such that no threshold >= t flags more than
// floor(n * target) rows. Flag counts are not monotone in t, so this is an
// exact sweep over residue breakpoints.
double rc_calibrate(std::span<const RcRowResidues> benign, double target_flag_rate);
double rc_calibrate(const RegressionClusteringModel& model, const FeatureMatrix& benign,
                    double target_flag_rate);

}  // namespace fbs
