#include "fbsdetect/eval.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include "fbsdetect/csv.hpp"
#include "fbsdetect/errors.hpp"

namespace fbs {
namespace {

std::optional<double> ratio(long num, long den) {
  if (den <= 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string na(std::optional<double> v) { return v ? csv::format(*v) : "NA"; }

}  // namespace

double calibrate_threshold(std::span<const double> benign_scores, double target_fpr) {
  if (benign_scores.empty()) throw ConfigError("calibrate_threshold: no scores");
  if (!(target_fpr >= 0.0 && target_fpr <= 1.0)) {
    throw ConfigError("calibrate_threshold: target must be in [0, 1]");
  }
  std::vector<double> s(benign_scores.begin(), benign_scores.end());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  // The epsilon keeps n * target from landing just below an integer.
  auto allowed = static_cast<std::size_t>(std::floor(static_cast<double>(n) * target_fpr + 1e-9));
  allowed = std::min(allowed, n - 1);
  return s[n - 1 - allowed];
}

std::size_t count_above(std::span<const double> scores, double threshold) {
  return static_cast<std::size_t>(
      std::count_if(scores.begin(), scores.end(), [&](double s) { return s > threshold; }));
}

std::vector<RecordLabel> label_records(std::span<const ReportRecord> records, Pci false_pci,
                                       const NeighborCatalog& catalog) {
  std::vector<RecordLabel> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    RecordLabel l;
    l.record_id = rec.record_id;
    l.is_tp = std::any_of(rec.neighbors.begin(), rec.neighbors.end(),
                          [&](const NeighborRsrp& n) { return n.pci == false_pci; });
    l.is_static = flag_static(rec, catalog);
    out.push_back(l);
  }
  return out;
}

RecallReport recall_report(std::span<const unsigned char> flagged, std::span<const RecordLabel> labels) {
  if (flagged.size() != labels.size()) throw ConfigError("recall_report: flags and labels differ in length");
  RecallReport r;
  r.n_records = static_cast<long>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& l = labels[i];
    const bool f = flagged[i] != 0;
    if (l.is_static) ++r.n_static;
    if (l.is_tp) {
      ++r.n_tp;
      if (f || l.is_static) ++r.tp_detected;
      if (!l.is_static) {
        ++r.tp_not_static;
        if (f) ++r.tp_flagged;
      }
    } else {
      ++r.n_benign;
      if (f) ++r.fp;
    }
  }
  r.benign_fpr_achieved = ratio(r.fp, r.n_benign);
  r.recall_with_static = ratio(r.tp_detected, r.n_tp);
  r.recall_without_static = ratio(r.tp_flagged, r.tp_not_static);
  return r;
}

RecallReport recall_report(std::span<const double> scores, double threshold,
                           std::span<const RecordLabel> labels) {
  std::vector<unsigned char> flags(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) flags[i] = scores[i] > threshold;
  RecallReport r = recall_report(flags, labels);
  r.threshold = threshold;
  return r;
}

std::optional<double> VisibilityBucket::ratio() const { return fbs::ratio(detected, positions); }
std::optional<double> VisibilityBucket::ratio_score_only() const {
  return fbs::ratio(detected_score_only, positions);
}

long AggregatedReport::positions() const {
  long n = 0;
  for (const auto& b : buckets) n += b.positions;
  return n;
}

long AggregatedReport::detected() const {
  long n = 0;
  for (const auto& b : buckets) n += b.detected;
  return n;
}

AggregatedReport aggregate_false_cell(std::span<const ServingResult> results, Pci false_pci,
                                      double bin_s) {
  if (!(bin_s > 0.0)) throw ConfigError("aggregate_false_cell: bin width must be > 0");
  struct Bin {
    std::set<Pci> seen_by;
    bool detected = false;
    bool detected_score_only = false;
  };
  std::map<long, Bin> bins;
  for (const auto& res : results) {
    if (res.labels.size() != res.time_s.size() || res.labels.size() != res.flagged.size()) {
      throw ConfigError("aggregate_false_cell: misaligned serving result");
    }
    for (std::size_t i = 0; i < res.labels.size(); ++i) {
      if (!res.labels[i].is_tp) continue;
      auto& b = bins[static_cast<long>(std::floor(res.time_s[i] / bin_s))];
      b.seen_by.insert(res.serving_pci);
      b.detected = b.detected || res.flagged[i] || res.labels[i].is_static;
      b.detected_score_only = b.detected_score_only || res.flagged[i];
    }
  }
  AggregatedReport out;
  out.false_pci = false_pci;
  for (const auto& [_, b] : bins) {
    const std::size_t v = b.seen_by.size();
    auto& bucket = out.buckets[v == 1 ? 0 : v == 2 ? 1 : 2];
    ++bucket.positions;
    if (b.detected) ++bucket.detected;
    if (b.detected_score_only) ++bucket.detected_score_only;
  }
  return out;
}

std::vector<TimelineRow> export_timeline(std::span<const double> scores,
                                         std::span<const RecordLabel> labels,
                                         std::span<const double> times,
                                         std::span<const Pci> serving) {
  if (scores.size() != labels.size() || scores.size() != times.size() || scores.size() != serving.size()) {
    throw ConfigError("export_timeline: inputs differ in length");
  }
  std::vector<TimelineRow> rows(scores.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i] = {labels[i].record_id, times[i], serving[i], scores[i], labels[i].is_tp};
  }
  std::sort(rows.begin(), rows.end(), [](const TimelineRow& a, const TimelineRow& b) {
    if (a.time_s != b.time_s) return a.time_s < b.time_s;
    if (a.serving_pci != b.serving_pci) return a.serving_pci < b.serving_pci;
    return a.record_id < b.record_id;
  });
  return rows;
}

double roc_auc(std::span<const double> negatives, std::span<const double> positives) {
  if (negatives.empty() || positives.empty()) throw ConfigError("roc_auc: need both classes");
  std::vector<double> neg(negatives.begin(), negatives.end());
  std::sort(neg.begin(), neg.end());
  double wins = 0.0;
  for (double p : positives) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), p);
    const auto hi = std::upper_bound(lo, neg.end(), p);
    wins += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(neg.size()) * static_cast<double>(positives.size()));
}

void write_scores_csv(std::ostream& out, std::span<const ScoreRow> rows) {
  out << "record_id,time_s,serving_pci,detector,score,flagged,is_static,is_tp\n";
  for (const auto& r : rows) {
    out << r.record_id << ',' << csv::format(r.time_s) << ',' << r.serving_pci << ',' << r.detector
        << ',' << csv::format(r.score) << ',' << int{r.flagged} << ',' << int{r.is_static} << ','
        << int{r.is_tp} << '\n';
  }
}

std::vector<ScoreRow> read_scores_csv(std::istream& in) {
  const csv::Table t = csv::read(in);
  const std::size_t c_id = t.column("record_id"), c_t = t.column("time_s"),
                    c_pci = t.column("serving_pci"), c_det = t.column("detector"),
                    c_s = t.column("score"), c_f = t.column("flagged"),
                    c_st = t.column("is_static"), c_tp = t.column("is_tp");
  std::vector<ScoreRow> rows;
  rows.reserve(t.rows.size());
  for (const auto& f : t.rows) {
    ScoreRow r;
    r.record_id = csv::parse_long(f[c_id]);
    r.time_s = csv::parse_double(f[c_t]);
    r.serving_pci = static_cast<Pci>(csv::parse_long(f[c_pci]));
    r.detector = f[c_det];
    r.score = csv::parse_double(f[c_s]);
    r.flagged = csv::parse_bool(f[c_f]);
    r.is_static = csv::parse_bool(f[c_st]);
    r.is_tp = csv::parse_bool(f[c_tp]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_recall_csv(std::ostream& out, std::span<const RecallRow> rows) {
  out << "false_pci,serving_pci,detector,threshold,n_records,n_tp,n_static,n_benign,fp,"
         "benign_fpr_achieved,recall_with_static,recall_without_static\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    out << row.scope << ',' << r.serving_pci << ',' << r.detector << ',' << csv::format(r.threshold)
        << ',' << r.n_records << ',' << r.n_tp << ',' << r.n_static << ',' << r.n_benign << ','
        << r.fp << ',' << na(r.benign_fpr_achieved) << ',' << na(r.recall_with_static) << ','
        << na(r.recall_without_static) << '\n';
  }
}

void write_aggregated_csv(std::ostream& out, std::span<const AggregatedReport> reports) {
  out << "false_pci";
  for (const char* v : {"1", "2", "gt2"}) {
    out << ",P_" << v << ",D_" << v << ",D_score_only_" << v;
  }
  out << ",P_total,D_total\n";
  for (const auto& rep : reports) {
    out << rep.false_pci;
    for (const auto& b : rep.buckets) {
      out << ',' << b.positions << ',' << na(b.ratio()) << ',' << na(b.ratio_score_only());
    }
    out << ',' << rep.positions() << ',' << na(ratio(rep.detected(), rep.positions())) << '\n';
  }
}

void write_timeline_csv(std::ostream& out, std::span<const TimelineRow> rows) {
  out << "record_id,time_s,serving_pci,score,contains_false_pci\n";
  for (const auto& r : rows) {
    out << r.record_id << ',' << csv::format(r.time_s) << ',' << r.serving_pci << ','
        << csv::format(r.score) << ',' << int{r.contains_false_pci} << '\n';
  }
}

}  // namespace fbs
