#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "fbsdetect/errors.hpp"
#include "fbsdetect/radio_sim.hpp"
#include "fbsdetect/sim_io.hpp"

using namespace fbs;

namespace {

SimConfig small_config(int n_ues = 8, double duration = 30) {
  SimConfig c;
  c.n_ues = n_ues;
  c.duration_s = duration;
  c.seed = 17;
  return c;
}

UeState ue_at(double x, double y, double h = 1.5) {
  UeState ue;
  ue.position = {x, y};
  ue.height_m = h;
  return ue;
}

}  // namespace

TEST_CASE("hata loss is larger at 2 km than at 1 km") {
  for (double hb : {2.0, 25.0, 40.0}) {
    CHECK(okumura_hata_loss(900, hb, 1.5, 2.0) > okumura_hata_loss(900, hb, 1.5, 1.0));
  }
}

TEST_CASE("hata loss rejects bad arguments") {
  CHECK_THROWS_AS(okumura_hata_loss(900, 25, 1.5, 0.0), std::domain_error);
  CHECK_THROWS_AS(okumura_hata_loss(900, 25, 1.5, -1.0), std::domain_error);
  CHECK_THROWS_AS(okumura_hata_loss(900, 25, 1.5, std::numeric_limits<double>::quiet_NaN()), std::domain_error);
  CHECK_THROWS_AS(okumura_hata_loss(100, 25, 1.5, 1.0), std::domain_error);
  CHECK_THROWS_AS(okumura_hata_loss(2000, 25, 1.5, 1.0), std::domain_error);
  CHECK_THROWS_AS(okumura_hata_loss(900, 0, 1.5, 1.0), std::domain_error);
  CHECK_THROWS_AS(okumura_hata_loss(900, 25, 0, 1.0), std::domain_error);
}

TEST_CASE("rsrp is repeatable and falls off with distance") {
  CellSite cell;
  PropagationParams prop;
  CHECK(rsrp_of(cell, ue_at(300, 400), prop) == rsrp_of(cell, ue_at(300, 400), prop));
  double prev = rsrp_of(cell, ue_at(10, 0), prop);
  for (double d = 20; d < 3000; d *= 1.5) {
    const double now = rsrp_of(cell, ue_at(d, 0), prop);
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("rsrq of a lone cell tends to 10 lg N") {
  PropagationParams prop;
  prop.noise_floor_dbm = -400;
  std::vector<CellSite> cells(1);
  CHECK(rsrq_of(cells[0], ue_at(200, 0), cells, prop) == doctest::Approx(10 * std::log10(25.0)));
}

TEST_CASE("a second interferer lowers rsrq") {
  PropagationParams prop;
  std::vector<CellSite> one(1);
  std::vector<CellSite> two(2);
  two[1].pci = 2;
  two[1].position = {800, 0};
  const auto ue = ue_at(200, 0);
  CHECK(rsrq_of(two[0], ue, two, prop) < rsrq_of(one[0], ue, one, prop));
}

TEST_CASE("a step moves speed * dt away from the boundary") {
  MobilityConfig m;
  Rng rng(3);
  UeState ue = ue_at(500, 500);
  ue.heading_rad = 0.7;
  ue.next_redirect_s = 10;
  const auto next = step_ue(ue, 1.0, m, rng);
  CHECK(ground_distance_m(ue.position, next.position) == doctest::Approx(5.0));
}

TEST_CASE("zero speed keeps the phone still") {
  MobilityConfig m;
  m.speed_mps = 0;
  Rng rng(3);
  UeState ue = ue_at(100, -40);
  for (int i = 0; i < 50; ++i) ue = step_ue(ue, 1.0, m, rng);
  CHECK(ue.position == Position{100, -40});
}

TEST_CASE("phones heading out of the box stay inside") {
  MobilityConfig m;
  Rng rng(5);
  for (double heading : {0.0, 1.0, 2.0, 3.1, 4.0, 5.5}) {
    UeState ue = ue_at(m.boundary.hi.x_m, m.boundary.lo.y_m);
    ue.heading_rad = heading;
    ue.next_redirect_s = 100;
    for (int i = 0; i < 30; ++i) {
      ue = step_ue(ue, 1.0, m, rng);
      CHECK(m.boundary.contains(ue.position));
    }
  }
}

TEST_CASE("only one cell able to serve is always chosen") {
  PropagationParams prop;
  std::vector<CellSite> cells(3);
  for (int i = 0; i < 3; ++i) {
    cells[i].pci = i + 1;
    cells[i].position = {500.0 * i, 0};
    cells[i].can_serve = i == 2;
  }
  for (double x : {-100.0, 0.0, 400.0, 1000.0}) CHECK(update_serving(ue_at(x, 0), cells, prop, 1.0) == 3);
}

TEST_CASE("no serving-capable cell is an error") {
  std::vector<CellSite> cells(1);
  cells[0].can_serve = false;
  CHECK_THROWS_AS(update_serving(ue_at(0, 0), cells, {}, 1.0), ConfigError);
}

TEST_CASE("infinite hysteresis never hands over") {
  PropagationParams prop;
  std::vector<CellSite> cells(2);
  cells[0].pci = 1;
  cells[1].pci = 2;
  cells[1].position = {1000, 0};
  UeState ue = ue_at(50, 0);
  ue.serving_pci = update_serving(ue, cells, prop, 0);
  CHECK(*ue.serving_pci == 1);
  for (double x = 50; x <= 1000; x += 50) {
    ue.position.x_m = x;
    ue.serving_pci = update_serving(ue, cells, prop, std::numeric_limits<double>::infinity());
    CHECK(*ue.serving_pci == 1);
  }
}

TEST_CASE("equidistant identical cells attach to the lower PCI") {
  std::vector<CellSite> cells(2);
  cells[0].pci = 7;
  cells[0].position = {1000, 0};
  cells[1].pci = 3;
  cells[1].position = {0, 0};
  CHECK(update_serving(ue_at(500, 0), cells, {}, 0) == 3);
}

TEST_CASE("neighbour list honours the detection threshold and the cap") {
  SimConfig config;
  std::vector<CellSite> cells;
  for (int i = 0; i < 12; ++i) {
    CellSite c;
    c.pci = i + 1;
    c.position = {100.0 * i, 0};
    cells.push_back(c);
  }
  UeState ue = ue_at(0, 0);
  ue.serving_pci = 1;

  config.neighbor_detect_threshold_dbm = 100;
  CHECK(emit_report(ue, cells, {}, config, 0).neighbors.empty());

  config.neighbor_detect_threshold_dbm = -200;
  config.max_neighbors_per_report = 8;
  const auto r = emit_report(ue, cells, {}, config, 0);
  REQUIRE(r.neighbors.size() == 8);
  for (int i = 0; i < 8; ++i) CHECK(r.neighbors[i].pci == i + 2);
}

TEST_CASE("a loud false cell near the phone is reported") {
  SimConfig config;
  config.neighbor_detect_threshold_dbm = -92;
  std::vector<CellSite> cells(2);
  cells[0].pci = 1;
  cells[1].pci = 5;
  cells[1].position = {150, 0};
  cells[1].height_m = 2;
  cells[1].can_serve = false;
  UeState ue = ue_at(100, 0);
  ue.serving_pci = 1;
  const auto r = emit_report(ue, cells, {}, config, 0);
  REQUIRE(r.neighbors.size() == 1);
  CHECK(r.neighbors[0].pci == 5);
}

TEST_CASE("false cell sits still during dwell") {
  FalseCellScript s;
  s.start_position = {0, 500};
  s.dwell_s = 200;
  s.waypoints = default_false_cell_route();
  CHECK(false_cell_position(s, 0) == Position{0, 500});
  CHECK(false_cell_position(s, 199.9) == Position{0, 500});
  CHECK(false_cell_position(s, 200) == Position{250, -250});
  CHECK(false_cell_position(s, 1e6) == Position{750, -250});
  s.waypoints.clear();
  CHECK_THROWS_AS(false_cell_position(s, 0), ConfigError);
}

TEST_CASE("grid is laid out row first from PCI 1") {
  SimConfig c;
  const auto cells = grid_topology(c);
  REQUIRE(cells.size() == 12);
  CHECK(cells[0].position == Position{0, 0});
  CHECK(cells[1].position == Position{500, 0});
  CHECK(cells[3].position == Position{0, 500});
  CHECK(cells[11].position == Position{1000, 1500});
  for (std::size_t i = 0; i < cells.size(); ++i) CHECK(cells[i].pci == static_cast<int>(i) + 1);
}

TEST_CASE("no phones, no reports") {
  auto c = small_config(0);
  CHECK(run_scenario(c, Scenario::benign()).empty());
}

TEST_CASE("one report per phone per period, time ordered") {
  auto c = small_config(5, 10);
  const auto log = run_scenario(c, Scenario::benign());
  CHECK(log.size() == 5 * 10);
  for (std::size_t i = 1; i < log.size(); ++i) CHECK(log[i - 1].time_s <= log[i].time_s);
}

TEST_CASE("the same seed gives the same serialized log") {
  auto c = small_config();
  std::ostringstream a, b;
  write_reports_csv(a, run_scenario(c, Scenario::benign()), c.max_neighbors_per_report);
  write_reports_csv(b, run_scenario(c, Scenario::benign()), c.max_neighbors_per_report);
  CHECK(a.str() == b.str());
  c.seed += 1;
  std::ostringstream d;
  write_reports_csv(d, run_scenario(c, Scenario::benign()), c.max_neighbors_per_report);
  CHECK(a.str() != d.str());
}

TEST_CASE("reports survive a csv round trip") {
  auto c = small_config(4, 5);
  const auto log = run_scenario(c, Scenario::benign());
  std::stringstream s;
  write_reports_csv(s, log, c.max_neighbors_per_report);
  const auto back = read_reports_csv(s);
  REQUIRE(back.size() == log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    CHECK(back[i].serving_pci == log[i].serving_pci);
    CHECK(back[i].serving_rsrp_dbm == log[i].serving_rsrp_dbm);
    REQUIRE(back[i].neighbors.size() == log[i].neighbors.size());
    for (std::size_t j = 0; j < log[i].neighbors.size(); ++j) {
      CHECK(back[i].neighbors[j].rsrp_dbm == log[i].neighbors[j].rsrp_dbm);
    }
  }
}

TEST_CASE("the decommissioned cell never serves and is heard while travelling") {
  SimConfig c;
  c.n_ues = 60;
  c.duration_s = 160;
  c.neighbor_detect_threshold_dbm = -92;
  const auto topo = grid_topology(c);
  const auto sc = Scenario::attack(5, topo, 100, 60);
  const auto log = run_scenario(c, sc);
  bool heard_travelling = false;
  for (const auto& r : log) {
    CHECK(r.serving_pci != 5);
    if (r.time_s >= 100) {
      for (const auto& n : r.neighbors) heard_travelling |= n.pci == 5;
    }
  }
  CHECK(heard_travelling);
}

TEST_CASE("attack scenarios reject unknown PCIs and mismatched scripts") {
  SimConfig c = small_config();
  const auto topo = grid_topology(c);
  CHECK_THROWS_AS(Scenario::attack(99, topo, 100, 60), ConfigError);
  auto sc = Scenario::attack(5, topo, 100, 60);
  sc.script.pci = 6;
  CHECK_THROWS_AS(run_scenario(c, sc), ConfigError);
}

TEST_CASE("invalid simulator settings are rejected") {
  SimConfig c;
  c.n_ues = -1;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = SimConfig{};
  c.report_period_s = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = SimConfig{};
  c.max_neighbors_per_report = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("topology survives a csv round trip") {
  const auto topo = grid_topology(SimConfig{});
  std::stringstream s;
  write_topology_csv(s, topo);
  const auto back = read_topology_csv(s);
  REQUIRE(back.size() == topo.size());
  for (std::size_t i = 0; i < topo.size(); ++i) {
    CHECK(back[i].pci == topo[i].pci);
    CHECK(back[i].position == topo[i].position);
  }
}
