#pragma once

// Threshold calibration, record labelling, recall and per-false-cell
// aggregation, and the CSV forms of all three.

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fbsdetect/features.hpp"

namespace fbs {

// Smallest observed score t with |{s > t}| <= floor(n * target_fpr).
// Throws ConfigError on an empty set or a target outside [0, 1].
double calibrate_threshold(std::span<const double> benign_scores, double target_fpr);

std::size_t count_above(std::span<const double> scores, double threshold);

struct RecordLabel {
  long record_id = 0;
  bool is_tp = false;      // the false PCI is among the neighbours
  bool is_static = false;  // some neighbour is unknown to the catalog

  friend bool operator==(const RecordLabel&, const RecordLabel&) = default;
};

std::vector<RecordLabel> label_records(std::span<const ReportRecord> records, Pci false_pci,
                                       const NeighborCatalog& catalog);

struct RecallReport {
  Pci serving_pci = 0;
  std::string detector;
  double threshold = 0.0;
  long n_records = 0;
  long n_tp = 0;
  long n_benign = 0;
  long n_static = 0;
  long tp_detected = 0;   // flagged or static
  long tp_flagged = 0;    // among tp records that are not static
  long tp_not_static = 0;
  long fp = 0;            // flagged benign records
  std::optional<double> benign_fpr_achieved;
  std::optional<double> recall_with_static;
  std::optional<double> recall_without_static;
};

// `flagged` is the detector's score-side verdict per record; static records
// count as detected only in the with-static recall.
RecallReport recall_report(std::span<const unsigned char> flagged, std::span<const RecordLabel> labels);
RecallReport recall_report(std::span<const double> scores, double threshold,
                           std::span<const RecordLabel> labels);

// Everything one serving cell's model said about one attack run.
struct ServingResult {
  Pci serving_pci = 0;
  std::vector<double> time_s;
  std::vector<RecordLabel> labels;
  std::vector<unsigned char> flagged;
};

struct VisibilityBucket {
  std::string name;  // "1", "2", ">2"
  long positions = 0;
  long detected = 0;             // flagged or static
  long detected_score_only = 0;  // flagged
  std::optional<double> ratio() const;
  std::optional<double> ratio_score_only() const;
};

struct AggregatedReport {
  Pci false_pci = 0;
  std::array<VisibilityBucket, 3> buckets{VisibilityBucket{"1"}, VisibilityBucket{"2"}, VisibilityBucket{">2"}};
  long positions() const;
  long detected() const;
};

// One position per time bin of width bin_s; a position counts when some
// serving cell got a report with the false PCI in that bin.
AggregatedReport aggregate_false_cell(std::span<const ServingResult> results, Pci false_pci,
                                      double bin_s);

struct TimelineRow {
  long record_id = 0;
  double time_s = 0.0;
  Pci serving_pci = 0;
  double score = 0.0;
  bool contains_false_pci = false;
};

// Ordered by time, then serving PCI, then record id.
std::vector<TimelineRow> export_timeline(std::span<const double> scores,
                                         std::span<const RecordLabel> labels,
                                         std::span<const double> times,
                                         std::span<const Pci> serving);

// Probability that a random positive outscores a random negative, ties half.
double roc_auc(std::span<const double> negatives, std::span<const double> positives);

struct ScoreRow {
  long record_id = 0;
  double time_s = 0.0;
  Pci serving_pci = 0;
  std::string detector;
  double score = 0.0;
  bool flagged = false;
  bool is_static = false;
  bool is_tp = false;
};

void write_scores_csv(std::ostream& out, std::span<const ScoreRow> rows);
std::vector<ScoreRow> read_scores_csv(std::istream& in);

// `scope` labels a row set, e.g. the false PCI or "all".
struct RecallRow {
  std::string scope;
  RecallReport report;
};
void write_recall_csv(std::ostream& out, std::span<const RecallRow> rows);
void write_aggregated_csv(std::ostream& out, std::span<const AggregatedReport> reports);
void write_timeline_csv(std::ostream& out, std::span<const TimelineRow> rows);

}  // namespace fbs
