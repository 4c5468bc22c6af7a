#include "fbsdetect/radio_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "fbsdetect/errors.hpp"

namespace fbs {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0.0 ? a + kTwoPi : a;
}

struct CellMeasurement {
  double rsrp_dbm;
  double rsrq_db;
};

// RSRP/RSRQ of every cell at the UE. Extra per-cell offsets (shadowing)
// are added to RSRP before RSRQ is formed.
std::vector<CellMeasurement> measure_all(const UeState& ue, std::span<const CellSite> cells,
                                         const PropagationParams& prop,
                                         std::span<const double> offsets_db = {}) {
  std::vector<CellMeasurement> out(cells.size());
  double rssi_mw = dbm_to_mw(prop.noise_floor_dbm);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out[i].rsrp_dbm = rsrp_of(cells[i], ue, prop) + (offsets_db.empty() ? 0.0 : offsets_db[i]);
    rssi_mw += dbm_to_mw(out[i].rsrp_dbm);
  }
  const double n_blocks = static_cast<double>(prop.rsrq_bandwidth_blocks);
  for (auto& m : out) {
    m.rsrq_db = 10.0 * std::log10(n_blocks * dbm_to_mw(m.rsrp_dbm) / rssi_mw);
  }
  return out;
}

Pci select_serving(const UeState& ue, std::span<const CellSite> cells,
                   std::span<const CellMeasurement> meas, double hysteresis_db) {
  std::optional<std::size_t> current;
  if (ue.serving_pci) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].pci == *ue.serving_pci && cells[i].can_serve) current = i;
    }
  }
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i].can_serve || (current && i == *current)) continue;
    if (!best || meas[i].rsrq_db > meas[*best].rsrq_db ||
        (meas[i].rsrq_db == meas[*best].rsrq_db && cells[i].pci < cells[*best].pci)) {
      best = i;
    }
  }
  if (!current) {
    if (!best) throw ConfigError("no cell is able to serve");
    return cells[*best].pci;
  }
  if (best && meas[*best].rsrq_db > meas[*current].rsrq_db + hysteresis_db) {
    return cells[*best].pci;
  }
  return cells[*current].pci;
}

MeasurementReport build_report(const UeState& ue, std::span<const CellSite> cells,
                               std::span<const CellMeasurement> meas, const SimConfig& config,
                               double time_s) {
  if (!ue.serving_pci) throw ConfigError("UE " + std::to_string(ue.ue_id) + " has no serving cell");
  MeasurementReport r;
  r.time_s = time_s;
  r.ue_id = ue.ue_id;
  r.serving_pci = *ue.serving_pci;
  bool found = false;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].pci == r.serving_pci) {
      r.serving_rsrp_dbm = meas[i].rsrp_dbm;
      r.serving_rsrq_db = meas[i].rsrq_db;
      found = true;
    } else if (meas[i].rsrp_dbm >= config.neighbor_detect_threshold_dbm) {
      r.neighbors.push_back({cells[i].pci, meas[i].rsrp_dbm, meas[i].rsrq_db});
    }
  }
  if (!found) throw ConfigError("serving PCI " + std::to_string(r.serving_pci) + " not transmitting");
  std::sort(r.neighbors.begin(), r.neighbors.end(), [](const auto& a, const auto& b) {
    return a.rsrp_dbm != b.rsrp_dbm ? a.rsrp_dbm > b.rsrp_dbm : a.pci < b.pci;
  });
  const auto cap = static_cast<std::size_t>(config.max_neighbors_per_report);
  if (r.neighbors.size() > cap) r.neighbors.resize(cap);
  return r;
}

bool is_multiple(double value, double step) {
  const double q = value / step;
  return std::abs(q - std::round(q)) < 1e-9 * std::max(1.0, q);
}

}  // namespace

double ground_distance_m(Position a, Position b) {
  return std::hypot(a.x_m - b.x_m, a.y_m - b.y_m);
}

std::vector<Position> default_false_cell_route() {
  return {{250.0, -250.0}, {250.0, 1750.0}, {750.0, 1750.0}, {750.0, -250.0}};
}

Scenario Scenario::attack(Pci pci, const std::vector<CellSite>& topology, double dwell_s,
                          double travel_s) {
  auto it = std::find_if(topology.begin(), topology.end(),
                         [pci](const CellSite& c) { return c.pci == pci; });
  if (it == topology.end()) {
    throw ConfigError("attack scenario names unknown PCI " + std::to_string(pci));
  }
  Scenario s;
  s.kind = Kind::kAttack;
  s.decommissioned_pci = pci;
  s.script.pci = pci;
  s.script.start_position = it->position;
  s.script.tx_power_dbm = it->tx_power_dbm;
  s.script.dwell_s = dwell_s;
  s.script.travel_s = travel_s;
  s.script.waypoints = default_false_cell_route();
  return s;
}

void validate(const SimConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError("invalid sim config: " + what); };
  if (c.grid.n_cells < 1) fail("n_cells must be >= 1");
  if (c.grid.grid_width < 1) fail("grid_width must be >= 1");
  if (!(c.grid.delta_x_m > 0.0) || !(c.grid.delta_y_m > 0.0)) fail("grid spacing must be > 0");
  if (!(c.cell_height_m > 0.0)) fail("cell_height_m must be > 0");
  if (c.n_ues < 0) fail("n_ues must be >= 0");
  if (!(c.duration_s > 0.0)) fail("duration_s must be > 0");
  if (!(c.report_period_s > 0.0)) fail("report_period_s must be > 0");
  if (c.max_neighbors_per_report < 1) fail("max_neighbors_per_report must be >= 1");
  if (!(c.ue_min_height_m > 0.0) || c.ue_max_height_m < c.ue_min_height_m) fail("UE heights");
  const auto& b = c.mobility.boundary;
  if (!(b.hi.x_m > b.lo.x_m) || !(b.hi.y_m > b.lo.y_m)) fail("mobility boundary is degenerate");
  if (!(c.mobility.speed_mps > 0.0)) fail("speed_mps must be > 0");
  if (!(c.mobility.redirect_interval_s > 0.0)) fail("redirect_interval_s must be > 0");
  if (!is_multiple(c.mobility.redirect_interval_s, c.report_period_s)) {
    fail("report_period_s must divide redirect_interval_s");
  }
  const auto& p = c.propagation;
  if (p.carrier_mhz < 150.0 || p.carrier_mhz > 1500.0) fail("carrier_mhz outside [150, 1500]");
  if (p.rsrq_bandwidth_blocks < 1) fail("rsrq_bandwidth_blocks must be >= 1");
  if (!(p.min_distance_m > 0.0)) fail("min_distance_m must be > 0");
  if (p.shadowing_sigma_db < 0.0) fail("shadowing_sigma_db must be >= 0");
}

double okumura_hata_loss(double carrier_mhz, double base_height_m, double mobile_height_m,
                         double distance_km) {
  if (!(distance_km > 0.0) || !std::isfinite(distance_km)) {
    throw std::domain_error("okumura_hata_loss: distance must be positive");
  }
  if (!(carrier_mhz >= 150.0 && carrier_mhz <= 1500.0)) {
    throw std::domain_error("okumura_hata_loss: carrier outside 150-1500 MHz");
  }
  if (!(base_height_m > 0.0) || !(mobile_height_m > 0.0)) {
    throw std::domain_error("okumura_hata_loss: antenna heights must be positive");
  }
  const double log_f = std::log10(carrier_mhz);
  const double log_hb = std::log10(base_height_m);
  // Mobile antenna correction for small and medium cities.
  const double a_hm = (1.1 * log_f - 0.7) * mobile_height_m - (1.56 * log_f - 0.8);
  return 69.55 + 26.16 * log_f - 13.82 * log_hb - a_hm +
         (44.9 - 6.55 * log_hb) * std::log10(distance_km);
}

double rsrp_of(const CellSite& cell, const UeState& ue, const PropagationParams& prop) {
  const double d_m = std::max(ground_distance_m(cell.position, ue.position), prop.min_distance_m);
  return cell.tx_power_dbm -
         okumura_hata_loss(prop.carrier_mhz, cell.height_m, ue.height_m, d_m / 1000.0);
}

double rsrq_of(const CellSite& cell, const UeState& ue, std::span<const CellSite> all_cells,
               const PropagationParams& prop) {
  double rssi_mw = dbm_to_mw(prop.noise_floor_dbm);
  for (const auto& c : all_cells) rssi_mw += dbm_to_mw(rsrp_of(c, ue, prop));
  const double rsrp_mw = dbm_to_mw(rsrp_of(cell, ue, prop));
  return 10.0 * std::log10(prop.rsrq_bandwidth_blocks * rsrp_mw / rssi_mw);
}

UeState step_ue(UeState ue, double dt_s, const MobilityConfig& mobility, Rng& rng) {
  const auto& lo = mobility.boundary.lo;
  const auto& hi = mobility.boundary.hi;
  const double step = mobility.speed_mps * dt_s;
  double x = ue.position.x_m + step * std::cos(ue.heading_rad);
  double y = ue.position.y_m + step * std::sin(ue.heading_rad);
  double heading = ue.heading_rad;
  // Specular reflection; loops only for steps longer than the box.
  for (int guard = 0; guard < 64 && !mobility.boundary.contains({x, y}); ++guard) {
    if (x < lo.x_m) {
      x = 2.0 * lo.x_m - x;
      heading = std::numbers::pi - heading;
    } else if (x > hi.x_m) {
      x = 2.0 * hi.x_m - x;
      heading = std::numbers::pi - heading;
    }
    if (y < lo.y_m) {
      y = 2.0 * lo.y_m - y;
      heading = -heading;
    } else if (y > hi.y_m) {
      y = 2.0 * hi.y_m - y;
      heading = -heading;
    }
  }
  ue.position = {std::clamp(x, lo.x_m, hi.x_m), std::clamp(y, lo.y_m, hi.y_m)};
  ue.heading_rad = wrap_angle(heading);

  ue.next_redirect_s -= dt_s;
  if (ue.next_redirect_s <= 1e-9) {
    ue.heading_rad = rng.uniform() * kTwoPi;
    ue.next_redirect_s += mobility.redirect_interval_s;
  }
  return ue;
}

Pci update_serving(const UeState& ue, std::span<const CellSite> cells,
                   const PropagationParams& prop, double hysteresis_db) {
  const auto meas = measure_all(ue, cells, prop);
  return select_serving(ue, cells, meas, hysteresis_db);
}

MeasurementReport emit_report(const UeState& ue, std::span<const CellSite> cells,
                              const PropagationParams& prop, const SimConfig& config,
                              double time_s) {
  const auto meas = measure_all(ue, cells, prop);
  return build_report(ue, cells, meas, config, time_s);
}

Position false_cell_position(const FalseCellScript& script, double t_s) {
  if (script.waypoints.empty()) {
    if (script.travel_s > 0.0) throw ConfigError("false cell script has travel time but no waypoints");
    return script.start_position;
  }
  if (t_s < script.dwell_s) return script.start_position;
  const double elapsed = t_s - script.dwell_s;
  if (elapsed >= script.travel_s) return script.waypoints.back();

  double total = 0.0;
  for (std::size_t i = 1; i < script.waypoints.size(); ++i) {
    total += ground_distance_m(script.waypoints[i - 1], script.waypoints[i]);
  }
  double remaining = total * elapsed / script.travel_s;
  for (std::size_t i = 1; i < script.waypoints.size(); ++i) {
    const Position a = script.waypoints[i - 1];
    const Position b = script.waypoints[i];
    const double seg = ground_distance_m(a, b);
    if (remaining <= seg && seg > 0.0) {
      const double f = remaining / seg;
      return {a.x_m + f * (b.x_m - a.x_m), a.y_m + f * (b.y_m - a.y_m)};
    }
    remaining -= seg;
  }
  return script.waypoints.back();
}

std::vector<CellSite> grid_topology(const SimConfig& config) {
  std::vector<CellSite> cells;
  cells.reserve(static_cast<std::size_t>(config.grid.n_cells));
  for (int i = 0; i < config.grid.n_cells; ++i) {
    CellSite c;
    c.pci = i + 1;
    c.position = {config.grid.min_x_m + (i % config.grid.grid_width) * config.grid.delta_x_m,
                  config.grid.min_y_m + (i / config.grid.grid_width) * config.grid.delta_y_m};
    c.height_m = config.cell_height_m;
    c.tx_power_dbm = config.cell_tx_power_dbm;
    c.can_serve = true;
    cells.push_back(c);
  }
  return cells;
}

std::vector<MeasurementReport> run_scenario(const SimConfig& config, const Scenario& scenario) {
  validate(config);
  std::vector<CellSite> cells = grid_topology(config);

  std::optional<std::size_t> false_idx;
  if (scenario.kind == Scenario::Kind::kAttack) {
    if (scenario.script.pci != scenario.decommissioned_pci) {
      throw ConfigError("false cell PCI must equal the decommissioned PCI");
    }
    auto it = std::find_if(cells.begin(), cells.end(), [&](const CellSite& c) {
      return c.pci == scenario.decommissioned_pci;
    });
    if (it == cells.end()) {
      throw ConfigError("unknown decommissioned PCI " + std::to_string(scenario.decommissioned_pci));
    }
    if (scenario.script.dwell_s < 0.0) throw ConfigError("dwell_s must be >= 0");
    if (!scenario.script.waypoints.empty() && !(scenario.script.travel_s > 0.0)) {
      throw ConfigError("travel_s must be > 0 when waypoints are given");
    }
    if (scenario.script.waypoints.empty() && scenario.script.travel_s > 0.0) {
      throw ConfigError("false cell script has travel time but no waypoints");
    }
    // The legitimate transmitter is gone; the false cell takes its slot.
    it->can_serve = false;
    it->height_m = scenario.script.height_m;
    it->tx_power_dbm = scenario.script.tx_power_dbm;
    it->position = scenario.script.start_position;
    false_idx = static_cast<std::size_t>(it - cells.begin());
  }

  std::vector<UeState> ues(static_cast<std::size_t>(config.n_ues));
  std::vector<Rng> mobility_rng;
  std::vector<Rng> fading_rng;
  mobility_rng.reserve(ues.size());
  fading_rng.reserve(ues.size());
  const auto& box = config.mobility.boundary;
  for (std::size_t i = 0; i < ues.size(); ++i) {
    mobility_rng.emplace_back(derive_seed(config.seed, i));
    fading_rng.emplace_back(derive_seed(config.seed, 0x5ad0'0000'0000ULL + i));
    Rng& rng = mobility_rng.back();
    UeState& ue = ues[i];
    ue.ue_id = static_cast<int>(i);
    ue.position.x_m = rng.uniform(box.lo.x_m, box.hi.x_m);
    ue.position.y_m = rng.uniform(box.lo.y_m, box.hi.y_m);
    ue.height_m = rng.uniform(config.ue_min_height_m, config.ue_max_height_m);
    ue.heading_rad = rng.uniform() * kTwoPi;
    ue.next_redirect_s = config.mobility.redirect_interval_s;
  }

  const auto n_steps = static_cast<long>(std::floor(config.duration_s / config.report_period_s + 1e-9));
  std::vector<MeasurementReport> log;
  log.reserve(static_cast<std::size_t>(n_steps) * ues.size());
  std::vector<double> offsets(cells.size(), 0.0);
  const double sigma = config.propagation.shadowing_sigma_db;

  for (long step = 0; step < n_steps; ++step) {
    const double t = static_cast<double>(step) * config.report_period_s;
    if (false_idx) cells[*false_idx].position = false_cell_position(scenario.script, t);
    for (std::size_t i = 0; i < ues.size(); ++i) {
      UeState& ue = ues[i];
      if (sigma > 0.0) {
        for (auto& o : offsets) o = sigma * fading_rng[i].normal();
      }
      const auto meas = measure_all(ue, cells, config.propagation,
                                    sigma > 0.0 ? std::span<const double>(offsets)
                                                : std::span<const double>());
      ue.serving_pci = select_serving(ue, cells, meas, config.handover_hysteresis_db);
      log.push_back(build_report(ue, cells, meas, config, t));
      ue = step_ue(ue, config.report_period_s, config.mobility, mobility_rng[i]);
    }
  }
  return log;
}

}  // namespace fbs
