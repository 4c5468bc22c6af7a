#pragma once

// Measurement-report preprocessing and the three neighbour feature layouts
// (COL, DST, XY), plus the per-serving-cell neighbour catalog.

#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fbsdetect/matrix.hpp"
#include "fbsdetect/radio_sim.hpp"

namespace fbs {

struct NeighborRsrp {
  Pci pci = 0;
  double rsrp_dbm = 0.0;
};

// One report as the detectors see it: RSRQ is dropped, neighbours kept in
// report order.
struct ReportRecord {
  long record_id = 0;  // index in the source log
  double time_s = 0.0;
  Pci serving_pci = 0;
  double serving_rsrp_dbm = 0.0;
  std::vector<NeighborRsrp> neighbors;
};

// Drops neighbour-less reports and groups the rest by serving PCI.
std::map<Pci, std::vector<ReportRecord>> preprocess(std::span<const MeasurementReport> log);

struct NeighborCatalog {
  Pci serving_pci = 0;
  Position serving_position;
  std::set<Pci> known_neighbors;
  // Positions of every cell in the legitimate topology, so unknown PCIs
  // can still be placed by DST/XY.
  std::map<Pci, Position> positions;
  int max_concurrent_neighbors = 0;

  Position position_of(Pci pci) const;
};

// Throws ConfigError if a record belongs to another serving cell or a
// neighbour is missing from the topology.
NeighborCatalog fit_neighbor_catalog(Pci serving_pci, std::span<const ReportRecord> records,
                                     const std::vector<CellSite>& topology);

bool flag_static(const ReportRecord& record, const NeighborCatalog& catalog);

enum class FeatureScheme { kCol, kDst, kXy };

std::string to_string(FeatureScheme scheme);
FeatureScheme parse_scheme(std::string_view name);  // "col" | "dst" | "xy"

struct FeatureMatrix {
  Matrix values;                    // missing entries hold 0
  std::vector<unsigned char> missing;  // row-major, same shape as values
  std::vector<std::string> column_names;

  std::size_t rows() const { return values.rows(); }
  std::size_t cols() const { return column_names.size(); }
  bool is_missing(std::size_t r, std::size_t c) const { return missing[r * cols() + c] != 0; }
};

// Serving RSRP, neighbour count, then one RSRP column per catalog PCI in
// ascending order. Neighbours outside the catalog get no column.
FeatureMatrix extract_col(std::span<const ReportRecord> records, const NeighborCatalog& catalog);

// Serving RSRP, neighbour count, then (rsrp, distance) slots ordered by
// descending RSRP, ascending distance, ascending PCI.
FeatureMatrix extract_dst(std::span<const ReportRecord> records, const NeighborCatalog& catalog);

// Like DST with (rsrp, dx, dy) relative to the serving cell.
FeatureMatrix extract_xy(std::span<const ReportRecord> records, const NeighborCatalog& catalog);

FeatureMatrix extract(FeatureScheme scheme, std::span<const ReportRecord> records,
                      const NeighborCatalog& catalog);

struct ImputePolicy {
  enum class Kind { kFillValue, kPerColumnMinMinus };
  Kind kind = Kind::kFillValue;
  double value = 0.0;  // fill value, or the offset below the column minimum

  static ImputePolicy fill(double v) { return {Kind::kFillValue, v}; }
  static ImputePolicy per_column_min_minus(double delta) { return {Kind::kPerColumnMinMinus, delta}; }
  std::string describe() const;
};

// Per-column fill values resolved against a reference (training) matrix.
std::vector<double> fill_values(const FeatureMatrix& reference, const ImputePolicy& policy);

Matrix impute(const FeatureMatrix& matrix, std::span<const double> fill);
Matrix impute(const FeatureMatrix& matrix, const ImputePolicy& policy);

void write_features_csv(std::ostream& out, const FeatureMatrix& matrix);
// Empty fields come back as missing entries.
FeatureMatrix read_features_csv(std::istream& in);

}  // namespace fbs
