#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "fbsdetect/errors.hpp"
#include "fbsdetect/features.hpp"

using namespace fbs;

namespace {

std::vector<CellSite> square_topology() {
  // 1 at the origin, 2 and 3 east, 4 and 5 north-east diagonal, 6 north.
  std::vector<CellSite> t(7);
  const Position pos[] = {{0, 0}, {500, 0}, {1000, 0}, {500, 500}, {1000, 1000}, {0, 1000}, {0, 500}};
  for (int i = 0; i < 7; ++i) {
    t[i].pci = i + 1;
    t[i].position = pos[i];
  }
  return t;
}

ReportRecord record(std::vector<NeighborRsrp> n, double serving = -70, long id = 0) {
  ReportRecord r;
  r.record_id = id;
  r.serving_pci = 1;
  r.serving_rsrp_dbm = serving;
  r.neighbors = std::move(n);
  return r;
}

NeighborCatalog catalog_2345() {
  std::vector<ReportRecord> recs{record({{2, 1}, {3, 1}}), record({{4, 1}, {5, 1}})};
  return fit_neighbor_catalog(1, recs, square_topology());
}

}  // namespace

TEST_CASE("reports without neighbours are dropped") {
  std::vector<MeasurementReport> log(3);
  for (auto& r : log) r.serving_pci = 8;
  log[0].neighbors.push_back({2, -80, -10});
  log[2].neighbors.push_back({3, -85, -12});
  const auto grouped = preprocess(log);
  REQUIRE(grouped.size() == 1);
  REQUIRE(grouped.at(8).size() == 2);
  CHECK(grouped.at(8)[0].record_id == 0);
  CHECK(grouped.at(8)[1].record_id == 2);
}

TEST_CASE("records are grouped by serving cell without loss") {
  std::vector<MeasurementReport> log;
  for (int i = 0; i < 30; ++i) {
    MeasurementReport r;
    r.serving_pci = 1 + i % 4;
    if (i % 5) r.neighbors.push_back({9, -90, -10});
    log.push_back(r);
  }
  std::size_t total = 0;
  for (const auto& [pci, recs] : preprocess(log)) {
    for (const auto& r : recs) CHECK(r.serving_pci == pci);
    total += recs.size();
  }
  CHECK(total == 24);
}

TEST_CASE("catalog collects every neighbour seen in training") {
  const auto cat = catalog_2345();
  CHECK(cat.known_neighbors == std::set<Pci>{2, 3, 4, 5});
  CHECK(cat.max_concurrent_neighbors == 2);
  CHECK(cat.serving_position == Position{0, 0});
}

TEST_CASE("empty training gives an empty catalog") {
  const auto cat = fit_neighbor_catalog(1, {}, square_topology());
  CHECK(cat.known_neighbors.empty());
  CHECK(cat.max_concurrent_neighbors == 0);
}

TEST_CASE("catalog rejects foreign records and unknown cells") {
  auto r = record({{2, 1}});
  r.serving_pci = 3;
  std::vector<ReportRecord> recs{r};
  CHECK_THROWS_AS(fit_neighbor_catalog(1, recs, square_topology()), ConfigError);
  recs = {record({{42, 1}})};
  CHECK_THROWS_AS(fit_neighbor_catalog(1, recs, square_topology()), ConfigError);
  CHECK_THROWS_AS(fit_neighbor_catalog(99, {}, square_topology()), ConfigError);
}

TEST_CASE("static flag fires only for unknown neighbours") {
  std::vector<ReportRecord> recs{record({{2, 1}, {3, 1}, {4, 1}, {5, 1}, {7, 1}})};
  const auto cat = fit_neighbor_catalog(1, recs, square_topology());
  CHECK_FALSE(flag_static(record({{2, -80}, {4, -82}}), cat));
  CHECK(flag_static(record({{2, -80}, {6, -82}}), cat));
}

TEST_CASE("col puts each neighbour in its own column") {
  const auto cat = catalog_2345();
  std::vector<ReportRecord> recs{record({{2, 45}, {4, 47}}), record({{3, 40}})};
  const auto m = extract_col(recs, cat);
  CHECK(m.column_names == std::vector<std::string>{"serving_rsrp", "n_neighbors", "rsrp_pci2", "rsrp_pci3",
                                                  "rsrp_pci4", "rsrp_pci5"});
  CHECK(m.values(0, 2) == 45);
  CHECK(m.is_missing(0, 3));
  CHECK(m.values(0, 4) == 47);
  CHECK(m.is_missing(0, 5));
  CHECK(m.values(0, 1) == 2);
  CHECK(m.is_missing(1, 2));
  CHECK(m.values(1, 3) == 40);
  CHECK(m.is_missing(1, 4));
  CHECK(m.is_missing(1, 5));
}

TEST_CASE("col has no gaps exactly when every catalog cell is reported") {
  const auto cat = catalog_2345();
  std::vector<ReportRecord> recs{record({{2, 1}, {3, 1}, {4, 1}, {5, 1}}), record({{2, 1}, {3, 1}, {4, 1}})};
  const auto m = extract_col(recs, cat);
  for (std::size_t c = 2; c < 6; ++c) CHECK_FALSE(m.is_missing(0, c));
  CHECK(m.is_missing(1, 5));
}

TEST_CASE("dst gives the ground distance to each neighbour") {
  const auto cat = catalog_2345();
  const auto m = extract_dst(std::vector<ReportRecord>{record({{2, 45}, {5, 40}})}, cat);
  CHECK(m.values(0, 2) == 45);
  CHECK(m.values(0, 3) == 500);
  CHECK(m.values(0, 4) == 40);
  CHECK(m.values(0, 5) == doctest::Approx(1414.2135623730951));
}

TEST_CASE("dst orders slots by rsrp, then distance, then PCI") {
  const auto cat = catalog_2345();
  const auto m = extract_dst(std::vector<ReportRecord>{record({{3, -80}, {2, -80}, {4, -70}})}, cat);
  CHECK(m.cols() == 2 + 2 * 2);
  // Truncated to the catalog's two slots: 4 is loudest, then 2 (closer than 3).
  CHECK(m.values(0, 2) == -70);
  CHECK(m.values(0, 3) == doctest::Approx(std::hypot(500, 500)));
  CHECK(m.values(0, 4) == -80);
  CHECK(m.values(0, 5) == 500);
}

TEST_CASE("dst fills two entries per reported neighbour") {
  std::vector<ReportRecord> train{record({{2, 1}, {3, 1}, {4, 1}, {5, 1}})};
  const auto cat = fit_neighbor_catalog(1, train, square_topology());
  for (std::size_t k = 0; k <= 4; ++k) {
    std::vector<NeighborRsrp> n;
    for (std::size_t i = 0; i < k; ++i) n.push_back({static_cast<Pci>(2 + i), -80.0 - i});
    const auto m = extract_dst(std::vector<ReportRecord>{record(n)}, cat);
    std::size_t filled = 0;
    for (std::size_t c = 2; c < m.cols(); ++c) filled += !m.is_missing(0, c);
    CHECK(filled == 2 * k);
  }
}

TEST_CASE("xy gives offsets relative to the serving cell") {
  const auto cat = catalog_2345();
  const auto m = extract_xy(std::vector<ReportRecord>{record({{3, 47}, {5, 40}})}, cat);
  CHECK(m.values(0, 2) == 47);
  CHECK(m.values(0, 3) == 1000);
  CHECK(m.values(0, 4) == 0);
  CHECK(m.values(0, 5) == 40);
  CHECK(m.values(0, 6) == 1000);
  CHECK(m.values(0, 7) == 1000);
}

TEST_CASE("xy offsets agree with dst distances") {
  std::vector<ReportRecord> train{record({{2, 1}, {3, 1}, {4, 1}, {5, 1}, {6, 1}, {7, 1}})};
  const auto cat = fit_neighbor_catalog(1, train, square_topology());
  std::vector<ReportRecord> recs{record({{2, -70}, {6, -75}, {5, -90}}), record({{7, -60}, {3, -61}})};
  const auto d = extract_dst(recs, cat);
  const auto x = extract_xy(recs, cat);
  for (std::size_t r = 0; r < recs.size(); ++r) {
    for (int s = 0; s < cat.max_concurrent_neighbors; ++s) {
      const std::size_t dc = 2 + 2 * s, xc = 2 + 3 * s;
      CHECK(d.is_missing(r, dc) == x.is_missing(r, xc));
      if (d.is_missing(r, dc)) continue;
      const double dist = d.values(r, dc + 1);
      CHECK(x.values(r, xc + 1) * x.values(r, xc + 1) + x.values(r, xc + 2) * x.values(r, xc + 2) ==
            doctest::Approx(dist * dist));
    }
  }
}

TEST_CASE("unknown neighbours still get slots but no col column") {
  const auto cat = catalog_2345();
  std::vector<ReportRecord> recs{record({{6, -60}})};
  const auto col = extract_col(recs, cat);
  for (std::size_t c = 2; c < col.cols(); ++c) CHECK(col.is_missing(0, c));
  const auto xy = extract_xy(recs, cat);
  CHECK(xy.values(0, 3) == 0);
  CHECK(xy.values(0, 4) == 1000);
}

TEST_CASE("fill value substitutes missing entries") {
  const auto cat = catalog_2345();
  const auto m = extract_col(std::vector<ReportRecord>{record({{2, 45}, {4, 47}})}, cat);
  const auto dense = impute(m, ImputePolicy::fill(0));
  CHECK(dense(0, 2) == 45);
  CHECK(dense(0, 3) == 0);
  CHECK(dense(0, 4) == 47);
  CHECK(dense(0, 5) == 0);
}

TEST_CASE("imputing a complete matrix changes nothing") {
  const auto cat = catalog_2345();
  const auto m = extract_col(std::vector<ReportRecord>{record({{2, 1}, {3, 2}, {4, 3}, {5, 4}})}, cat);
  CHECK(impute(m, ImputePolicy::fill(-999)) == m.values);
  CHECK(impute(m, ImputePolicy::per_column_min_minus(10)) == m.values);
}

TEST_CASE("min-minus fills below every observed value of the column") {
  const auto cat = catalog_2345();
  std::vector<ReportRecord> recs{record({{2, -80}, {3, -95}}), record({{2, -101}, {4, -60}}),
                                 record({{5, -70}, {3, -88}}), record({{4, -99}})};
  const auto m = extract_col(recs, cat);
  const auto dense = impute(m, ImputePolicy::per_column_min_minus(10));
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double lo = INFINITY;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (!m.is_missing(r, c)) lo = std::min(lo, m.values(r, c));
    }
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (m.is_missing(r, c)) CHECK(dense(r, c) < lo);
    }
  }
}

TEST_CASE("imputation width must match") {
  const auto m = extract_col(std::vector<ReportRecord>{record({{2, 1}})}, catalog_2345());
  std::vector<double> fill(2, 0.0);
  CHECK_THROWS_AS(impute(m, fill), ConfigError);
}

TEST_CASE("feature csv keeps missing entries") {
  const auto m = extract_xy(std::vector<ReportRecord>{record({{2, -80.25}}), record({{3, -1e-7}, {4, -90}})},
                            catalog_2345());
  std::stringstream s;
  write_features_csv(s, m);
  const auto back = read_features_csv(s);
  CHECK(back.column_names == m.column_names);
  CHECK(back.missing == m.missing);
  CHECK(back.values == m.values);
}

TEST_CASE("scheme names parse both ways") {
  for (auto s : {FeatureScheme::kCol, FeatureScheme::kDst, FeatureScheme::kXy}) {
    CHECK(parse_scheme(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_scheme("abc"), ConfigError);
}
