#include "fbsdetect/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "fbsdetect/csv.hpp"
#include "fbsdetect/errors.hpp"

namespace fbs {
namespace {

class MatrixBuilder {
 public:
  MatrixBuilder(std::size_t rows, std::vector<std::string> names)
      : m_{Matrix(rows, names.size()), std::vector<unsigned char>(rows * names.size(), 1),
           std::move(names)} {}

  void set(std::size_t r, std::size_t c, double v) {
    m_.values(r, c) = v;
    m_.missing[r * m_.cols() + c] = 0;
  }

  FeatureMatrix take() { return std::move(m_); }

 private:
  FeatureMatrix m_;
};

std::vector<std::string> prefix_columns() { return {"serving_rsrp", "n_neighbors"}; }

struct Slot {
  Pci pci;
  double rsrp;
  double dist;
  double dx;
  double dy;
};

// Neighbour slots in DST/XY order, truncated to the catalog's slot count.
std::vector<Slot> ordered_slots(const ReportRecord& rec, const NeighborCatalog& catalog) {
  std::vector<Slot> slots;
  slots.reserve(rec.neighbors.size());
  for (const auto& n : rec.neighbors) {
    const Position p = catalog.position_of(n.pci);
    const double dx = p.x_m - catalog.serving_position.x_m;
    const double dy = p.y_m - catalog.serving_position.y_m;
    slots.push_back({n.pci, n.rsrp_dbm, std::hypot(dx, dy), dx, dy});
  }
  std::sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
    if (a.rsrp != b.rsrp) return a.rsrp > b.rsrp;
    if (a.dist != b.dist) return a.dist < b.dist;
    return a.pci < b.pci;
  });
  const auto cap = static_cast<std::size_t>(catalog.max_concurrent_neighbors);
  if (slots.size() > cap) slots.resize(cap);
  return slots;
}

FeatureMatrix extract_slotted(std::span<const ReportRecord> records, const NeighborCatalog& catalog,
                              bool with_xy) {
  auto names = prefix_columns();
  for (int i = 1; i <= catalog.max_concurrent_neighbors; ++i) {
    const std::string s = "nbr" + std::to_string(i);
    names.push_back(s + "_rsrp");
    if (with_xy) {
      names.push_back(s + "_dx");
      names.push_back(s + "_dy");
    } else {
      names.push_back(s + "_dist");
    }
  }
  const std::size_t width = with_xy ? 3 : 2;
  MatrixBuilder b(records.size(), std::move(names));
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    b.set(r, 0, rec.serving_rsrp_dbm);
    b.set(r, 1, static_cast<double>(rec.neighbors.size()));
    const auto slots = ordered_slots(rec, catalog);
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const std::size_t c = 2 + width * i;
      b.set(r, c, slots[i].rsrp);
      if (with_xy) {
        b.set(r, c + 1, slots[i].dx);
        b.set(r, c + 2, slots[i].dy);
      } else {
        b.set(r, c + 1, slots[i].dist);
      }
    }
  }
  return b.take();
}

}  // namespace

std::map<Pci, std::vector<ReportRecord>> preprocess(std::span<const MeasurementReport> log) {
  std::map<Pci, std::vector<ReportRecord>> out;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& rep = log[i];
    if (rep.neighbors.empty()) continue;
    ReportRecord rec;
    rec.record_id = static_cast<long>(i);
    rec.time_s = rep.time_s;
    rec.serving_pci = rep.serving_pci;
    rec.serving_rsrp_dbm = rep.serving_rsrp_dbm;
    rec.neighbors.reserve(rep.neighbors.size());
    for (const auto& n : rep.neighbors) rec.neighbors.push_back({n.pci, n.rsrp_dbm});
    out[rep.serving_pci].push_back(std::move(rec));
  }
  return out;
}

Position NeighborCatalog::position_of(Pci pci) const {
  auto it = positions.find(pci);
  if (it == positions.end()) {
    throw ConfigError("PCI " + std::to_string(pci) + " is not in the topology");
  }
  return it->second;
}

NeighborCatalog fit_neighbor_catalog(Pci serving_pci, std::span<const ReportRecord> records,
                                     const std::vector<CellSite>& topology) {
  NeighborCatalog cat;
  cat.serving_pci = serving_pci;
  for (const auto& c : topology) cat.positions[c.pci] = c.position;
  if (auto it = cat.positions.find(serving_pci); it != cat.positions.end()) {
    cat.serving_position = it->second;
  } else {
    throw ConfigError("serving PCI " + std::to_string(serving_pci) + " is not in the topology");
  }
  for (const auto& rec : records) {
    if (rec.serving_pci != serving_pci) {
      throw ConfigError("record " + std::to_string(rec.record_id) + " belongs to serving PCI " +
                        std::to_string(rec.serving_pci));
    }
    for (const auto& n : rec.neighbors) {
      if (!cat.positions.contains(n.pci)) {
        throw ConfigError("neighbour PCI " + std::to_string(n.pci) + " is not in the topology");
      }
      cat.known_neighbors.insert(n.pci);
    }
    cat.max_concurrent_neighbors =
        std::max(cat.max_concurrent_neighbors, static_cast<int>(rec.neighbors.size()));
  }
  return cat;
}

bool flag_static(const ReportRecord& record, const NeighborCatalog& catalog) {
  return std::any_of(record.neighbors.begin(), record.neighbors.end(),
                     [&](const NeighborRsrp& n) { return !catalog.known_neighbors.contains(n.pci); });
}

std::string to_string(FeatureScheme scheme) {
  switch (scheme) {
    case FeatureScheme::kCol: return "col";
    case FeatureScheme::kDst: return "dst";
    case FeatureScheme::kXy: return "xy";
  }
  return "?";
}

FeatureScheme parse_scheme(std::string_view name) {
  if (name == "col" || name == "COL") return FeatureScheme::kCol;
  if (name == "dst" || name == "DST") return FeatureScheme::kDst;
  if (name == "xy" || name == "XY") return FeatureScheme::kXy;
  throw ConfigError("unknown feature scheme '" + std::string(name) + "'");
}

FeatureMatrix extract_col(std::span<const ReportRecord> records, const NeighborCatalog& catalog) {
  auto names = prefix_columns();
  std::map<Pci, std::size_t> column_of;
  for (Pci pci : catalog.known_neighbors) {
    column_of[pci] = names.size();
    names.push_back("rsrp_pci" + std::to_string(pci));
  }
  MatrixBuilder b(records.size(), std::move(names));
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    b.set(r, 0, rec.serving_rsrp_dbm);
    b.set(r, 1, static_cast<double>(rec.neighbors.size()));
    for (const auto& n : rec.neighbors) {
      if (auto it = column_of.find(n.pci); it != column_of.end()) b.set(r, it->second, n.rsrp_dbm);
    }
  }
  return b.take();
}

FeatureMatrix extract_dst(std::span<const ReportRecord> records, const NeighborCatalog& catalog) {
  return extract_slotted(records, catalog, false);
}

FeatureMatrix extract_xy(std::span<const ReportRecord> records, const NeighborCatalog& catalog) {
  return extract_slotted(records, catalog, true);
}

FeatureMatrix extract(FeatureScheme scheme, std::span<const ReportRecord> records,
                      const NeighborCatalog& catalog) {
  switch (scheme) {
    case FeatureScheme::kCol: return extract_col(records, catalog);
    case FeatureScheme::kDst: return extract_dst(records, catalog);
    case FeatureScheme::kXy: return extract_xy(records, catalog);
  }
  throw ConfigError("unknown feature scheme");
}

std::string ImputePolicy::describe() const {
  return kind == Kind::kFillValue ? "fill_value(" + csv::format(value) + ")"
                                  : "per_column_min_minus(" + csv::format(value) + ")";
}

std::vector<double> fill_values(const FeatureMatrix& reference, const ImputePolicy& policy) {
  std::vector<double> fill(reference.cols(), policy.value);
  if (policy.kind == ImputePolicy::Kind::kFillValue) return fill;
  for (std::size_t c = 0; c < reference.cols(); ++c) {
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < reference.rows(); ++r) {
      if (!reference.is_missing(r, c)) lo = std::min(lo, reference.values(r, c));
    }
    // A column never observed falls back to 0 as its reference minimum.
    fill[c] = (std::isfinite(lo) ? lo : 0.0) - policy.value;
  }
  return fill;
}

Matrix impute(const FeatureMatrix& matrix, std::span<const double> fill) {
  if (fill.size() != matrix.cols()) throw ConfigError("imputation width mismatch");
  Matrix out = matrix.values;
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
      if (matrix.is_missing(r, c)) out(r, c) = fill[c];
    }
  }
  return out;
}

Matrix impute(const FeatureMatrix& matrix, const ImputePolicy& policy) {
  return impute(matrix, fill_values(matrix, policy));
}

void write_features_csv(std::ostream& out, const FeatureMatrix& matrix) {
  out << csv::join(matrix.column_names) << '\n';
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
      if (c) out << ',';
      if (!matrix.is_missing(r, c)) out << csv::format(matrix.values(r, c));
    }
    out << '\n';
  }
}

FeatureMatrix read_features_csv(std::istream& in) {
  csv::Table t = csv::read(in);
  const std::size_t cols = t.header.size();
  FeatureMatrix m{Matrix(t.rows.size(), cols), std::vector<unsigned char>(t.rows.size() * cols, 1),
                  std::move(t.header)};
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r].size() != cols) throw ConfigError("features row " + std::to_string(r + 1) + " has the wrong width");
    for (std::size_t c = 0; c < cols; ++c) {
      if (t.rows[r][c].empty()) continue;
      m.values(r, c) = csv::parse_double(t.rows[r][c]);
      m.missing[r * cols + c] = 0;
    }
  }
  return m;
}

}  // namespace fbs
