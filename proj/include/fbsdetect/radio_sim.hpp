#pragma once

// Discrete-time radio neighbourhood: a grid of cells, randomly walking
// phones, Okumura-Hata path loss, RSRQ-driven handover, and an optional
// false cell that reuses the PCI of a decommissioned site.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fbsdetect/random.hpp"

namespace fbs {

using Pci = int;

struct Position {
  double x_m = 0.0;
  double y_m = 0.0;

  friend bool operator==(const Position&, const Position&) = default;
};

double ground_distance_m(Position a, Position b);

struct Rect {
  Position lo;
  Position hi;

  bool contains(Position p) const {
    return p.x_m >= lo.x_m && p.x_m <= hi.x_m && p.y_m >= lo.y_m && p.y_m <= hi.y_m;
  }
};

struct CellSite {
  Pci pci = 0;
  Position position;
  double height_m = 25.0;
  double tx_power_dbm = 30.0;
  bool can_serve = true;
};

struct UeState {
  int ue_id = 0;
  Position position;
  double height_m = 1.5;
  double heading_rad = 0.0;
  std::optional<Pci> serving_pci;
  // Seconds left until the next heading change.
  double next_redirect_s = 0.0;
};

struct MobilityConfig {
  Rect boundary{{-250.0, -250.0}, {1250.0, 1750.0}};
  double speed_mps = 5.0;
  double redirect_interval_s = 20.0;
};

struct FalseCellScript {
  Pci pci = 0;
  Position start_position;
  double dwell_s = 200.0;
  double height_m = 2.0;
  double tx_power_dbm = 30.0;
  std::vector<Position> waypoints;
  double travel_s = 120.0;
};

// The van route used for every attack: between the grid columns and
// back down again.
std::vector<Position> default_false_cell_route();

struct PropagationParams {
  double carrier_mhz = 900.0;
  double noise_floor_dbm = -110.0;
  int rsrq_bandwidth_blocks = 25;
  // Ground distance used in place of anything shorter.
  double min_distance_m = 1.0;
  // Per-measurement log-normal shadowing; 0 disables it.
  double shadowing_sigma_db = 0.0;
};

struct GridLayout {
  double delta_x_m = 500.0;
  double delta_y_m = 500.0;
  int grid_width = 3;
  int n_cells = 12;
  double min_x_m = 0.0;
  double min_y_m = 0.0;
};

struct SimConfig {
  GridLayout grid;
  double cell_height_m = 25.0;
  double cell_tx_power_dbm = 30.0;
  int n_ues = 200;
  double duration_s = 1000.0;
  double report_period_s = 1.0;
  double neighbor_detect_threshold_dbm = -125.0;
  int max_neighbors_per_report = 8;
  double handover_hysteresis_db = 1.0;
  double ue_min_height_m = 1.5;
  double ue_max_height_m = 2.0;
  std::uint64_t seed = 1;
  MobilityConfig mobility;
  PropagationParams propagation;
};

// Throws ConfigError when an invariant of the configuration is broken.
void validate(const SimConfig& config);

struct NeighborMeasurement {
  Pci pci = 0;
  double rsrp_dbm = 0.0;
  double rsrq_db = 0.0;
};

struct MeasurementReport {
  double time_s = 0.0;
  int ue_id = 0;
  Pci serving_pci = 0;
  double serving_rsrp_dbm = 0.0;
  double serving_rsrq_db = 0.0;
  std::vector<NeighborMeasurement> neighbors;  // strongest first
};

struct Scenario {
  enum class Kind { kBenign, kAttack };

  Kind kind = Kind::kBenign;
  Pci decommissioned_pci = 0;
  FalseCellScript script;

  static Scenario benign() { return {}; }
  // The false cell starts at the decommissioned site with the default route.
  static Scenario attack(Pci pci, const std::vector<CellSite>& topology, double dwell_s,
                         double travel_s);
};

/// Medium-city Okumura-Hata path loss in dB.
///
/// Evaluated as published even for base heights below the nominal 30 m
/// (the grid mounts cells at 25 m and the van at 2 m). Throws
/// std::domain_error for a non-positive or non-finite distance, a carrier
/// outside 150-1500 MHz, or non-positive antenna heights.
double okumura_hata_loss(double carrier_mhz, double base_height_m, double mobile_height_m,
                         double distance_km);

double rsrp_of(const CellSite& cell, const UeState& ue, const PropagationParams& prop);

// 10*log10(N * rsrp / rssi), rssi = all received power plus the noise floor.
double rsrq_of(const CellSite& cell, const UeState& ue, std::span<const CellSite> all_cells,
               const PropagationParams& prop);

UeState step_ue(UeState ue, double dt_s, const MobilityConfig& mobility, Rng& rng);

// Initial attachment picks the best RSRQ; afterwards a neighbour takes over
// only when it beats the serving cell by more than hysteresis_db. Ties go to
// the lowest PCI. Throws ConfigError when no cell can serve.
Pci update_serving(const UeState& ue, std::span<const CellSite> cells,
                   const PropagationParams& prop, double hysteresis_db);

// Throws ConfigError if the UE has no serving cell.
MeasurementReport emit_report(const UeState& ue, std::span<const CellSite> cells,
                              const PropagationParams& prop, const SimConfig& config,
                              double time_s);

Position false_cell_position(const FalseCellScript& script, double t_s);

// Row-first grid; PCIs start at 1.
std::vector<CellSite> grid_topology(const SimConfig& config);

std::vector<MeasurementReport> run_scenario(const SimConfig& config, const Scenario& scenario);

}  // namespace fbs
