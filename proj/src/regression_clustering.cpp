#include "fbsdetect/regression_clustering.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fbsdetect/errors.hpp"
#include "fbsdetect/random.hpp"

namespace fbs {

std::optional<std::size_t> RegressionClusteringModel::column_of(Pci pci) const {
  auto it = std::lower_bound(catalog.begin(), catalog.end(), pci);
  if (it == catalog.end() || *it != pci) return std::nullopt;
  return columns[static_cast<std::size_t>(it - catalog.begin())];
}

RegressionClusteringModel rc_fit(const FeatureMatrix& col, std::span<const double> fill,
                                 const NeighborCatalog& catalog, const RcParams& params,
                                 std::uint64_t seed) {
  const std::size_t n_cells = catalog.known_neighbors.size();
  if (col.cols() != 2 + n_cells) throw ConfigError("rc_fit: matrix is not a COL matrix of this catalog");
  if (fill.size() != col.cols()) throw ConfigError("rc_fit: fill width mismatch");
  if (params.k < 1 || params.min_records < 1) throw ConfigError("rc_fit: k and min_records must be >= 1");

  RegressionClusteringModel model;
  model.params = params;
  model.seed = seed;
  model.n_features = col.cols();
  model.fill.assign(fill.begin(), fill.end());
  for (Pci p : catalog.known_neighbors) {
    model.columns.push_back(2 + model.catalog.size());
    model.catalog.push_back(p);
  }
  const Matrix X = impute(col, fill);

  for (std::size_t ci = 0; ci < n_cells; ++ci) {
    const Pci c = model.catalog[ci];
    const std::size_t yc = model.columns[ci];
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < col.rows(); ++r) {
      if (!col.is_missing(r, yc)) rows.push_back(r);
    }
    if (rows.size() < static_cast<std::size_t>(params.min_records) ||
        rows.size() < static_cast<std::size_t>(params.k)) {
      model.omitted.push_back(c);
      continue;
    }
    const std::uint64_t cell_seed = derive_seed(seed, static_cast<std::uint64_t>(c));
    Matrix y_points(rows.size(), 1);
    for (std::size_t i = 0; i < rows.size(); ++i) y_points(i, 0) = X(rows[i], yc);
    RcCellModel cell;
    cell.pci = c;
    cell.column = yc;
    cell.clusters = kmeans_fit(y_points, params.k, cell_seed);
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(cell.clusters.k()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      members[kmeans_assign(y_points.row(i), cell.clusters)].push_back(rows[i]);
    }

    for (std::size_t ni = 0; ni < n_cells; ++ni) {
      if (ni == ci) continue;
      RcPair pair;
      pair.excluded = model.catalog[ni];
      for (std::size_t j = 0; j < n_cells; ++j) {
        if (j != ci && j != ni) pair.inputs.push_back(model.columns[j]);
      }
      // With two catalog cells there is nothing left to regress on.
      if (pair.inputs.empty()) continue;
      for (std::size_t k = 0; k < members.size(); ++k) {
        const auto& idx = members[k];
        Matrix xk(idx.size(), pair.inputs.size());
        std::vector<double> yk(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
          for (std::size_t j = 0; j < pair.inputs.size(); ++j) xk(i, j) = X(idx[i], pair.inputs[j]);
          yk[i] = X(idx[i], yc);
        }
        const std::uint64_t forest_seed =
            derive_seed(cell_seed, static_cast<std::uint64_t>(pair.excluded) * 64 + k);
        pair.forests.push_back(forest_fit(xk, yk, params.forest, forest_seed));
      }
      cell.pairs.push_back(std::move(pair));
    }
    model.cells.push_back(std::move(cell));
  }
  return model;
}

RcRowResidues rc_residues(const RegressionClusteringModel& model, std::span<const double> values,
                          std::span<const unsigned char> missing) {
  if (values.size() != model.n_features || missing.size() != model.n_features) {
    throw ConfigError("rc_residues: row width mismatch");
  }
  std::vector<double> row(values.begin(), values.end());
  for (std::size_t c = 0; c < row.size(); ++c) {
    if (missing[c]) row[c] = model.fill[c];
  }
  RcRowResidues out;
  std::vector<double> x;
  for (const auto& cell : model.cells) {
    if (missing[cell.column]) continue;
    const double y = row[cell.column];
    const std::size_t k = kmeans_assign(std::span<const double>(&y, 1), cell.clusters);
    RcCellResidues res;
    res.cell = cell.pci;
    for (const auto& pair : cell.pairs) {
      const auto nc_col = model.column_of(pair.excluded);
      if (missing[*nc_col]) continue;
      x.resize(pair.inputs.size());
      for (std::size_t j = 0; j < x.size(); ++j) x[j] = row[pair.inputs[j]];
      res.residues.emplace_back(std::abs(y - forest_predict(pair.forests[k], x)), pair.excluded);
    }
    std::sort(res.residues.begin(), res.residues.end());
    out.push_back(std::move(res));
  }
  return out;
}

RcRowResidues rc_residues(const RegressionClusteringModel& model, const FeatureMatrix& m,
                          std::size_t row) {
  return rc_residues(model, m.values.row(row),
                     std::span<const unsigned char>(m.missing.data() + row * m.cols(), m.cols()));
}

RcVerdict rc_verdict(const RcRowResidues& residues, double threshold) {
  std::map<Pci, int> votes;
  for (const auto& cell : residues) {
    const auto& r = cell.residues;
    if (r.size() < 2) continue;
    if (r[0].first <= threshold && r[1].first > threshold) ++votes[r[0].second];
  }
  if (votes.empty()) return {};
  RcVerdict v{true, std::nullopt};
  int best = 0;
  for (const auto& [pci, n] : votes) {
    if (n > best) {
      best = n;
      v.culprit = pci;
    }
  }
  return v;
}

RcVerdict rc_evaluate(const RegressionClusteringModel& model, const FeatureMatrix& m,
                      std::size_t row) {
  return rc_verdict(rc_residues(model, m, row), model.threshold);
}

double rc_score(const RcRowResidues& residues) {
  double s = 0.0;
  for (const auto& cell : residues) {
    if (cell.residues.size() >= 2) s = std::max(s, cell.residues[1].first);
  }
  return s;
}

double rc_calibrate(std::span<const RcRowResidues> benign, double target_flag_rate) {
  if (!(target_flag_rate >= 0.0)) throw ConfigError("rc_calibrate: target must be >= 0");
  const auto n = static_cast<double>(benign.size());
  const auto allowed = static_cast<long>(std::floor(n * std::min(target_flag_rate, 1.0) + 1e-9));

  // Each row is flagged on a union of intervals [r1, r2); merge them per
  // row and sweep the +1/-1 events.
  std::vector<std::pair<double, int>> events;
  for (const auto& row : benign) {
    std::vector<std::pair<double, double>> spans;
    for (const auto& cell : row) {
      if (cell.residues.size() < 2) continue;
      const double a = cell.residues[0].first, b = cell.residues[1].first;
      if (a < b) spans.emplace_back(a, b);
    }
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 0; i < spans.size();) {
      double lo = spans[i].first, hi = spans[i].second;
      std::size_t j = i + 1;
      for (; j < spans.size() && spans[j].first <= hi; ++j) hi = std::max(hi, spans[j].second);
      events.emplace_back(lo, +1);
      events.emplace_back(hi, -1);
      i = j;
    }
  }
  if (events.empty()) return 0.0;
  std::sort(events.begin(), events.end());

  // Segment i covers [point_i, point_{i+1}) with `count_i` flagged rows.
  std::vector<double> points;
  std::vector<long> counts;
  long running = 0;
  for (std::size_t i = 0; i < events.size();) {
    const double p = events[i].first;
    for (; i < events.size() && events[i].first == p; ++i) running += events[i].second;
    points.push_back(p);
    counts.push_back(running);
  }
  double t = 0.0;
  for (std::size_t i = points.size(); i-- > 0;) {
    if (counts[i] > allowed) {
      t = points[i + 1];  // the last segment always has count 0
      break;
    }
  }
  return t;
}

double rc_calibrate(const RegressionClusteringModel& model, const FeatureMatrix& benign,
                    double target_flag_rate) {
  std::vector<RcRowResidues> all;
  all.reserve(benign.rows());
  for (std::size_t r = 0; r < benign.rows(); ++r) all.push_back(rc_residues(model, benign, r));
  return rc_calibrate(all, target_flag_rate);
}

}  // namespace fbs
