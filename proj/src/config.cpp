#include "fbsdetect/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "fbsdetect/csv.hpp"
#include "fbsdetect/errors.hpp"

namespace fbs {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> list_items(std::string_view v) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : v) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  for (const auto& s : out) {
    if (s.empty()) throw ConfigError("empty item in list '" + std::string(v) + "'");
  }
  return out;
}

template <class T, class F>
std::string join_list(const std::vector<T>& items, F fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += fmt(items[i]);
  }
  return out;
}

std::uint64_t parse_u64(std::string_view v) {
  std::uint64_t x = 0;
  const auto s = trim(v);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("not an unsigned integer: '" + s + "'");
  return x;
}

int parse_int(std::string_view v) { return static_cast<int>(csv::parse_long(trim(v))); }
double parse_real(std::string_view v) { return csv::parse_double(trim(v)); }

struct Entry {
  std::string key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, std::string_view)> set;
};

#define REAL(key, field)                                                          \
  Entry { key, [](const PipelineConfig& c) { return csv::format(c.field); },      \
          [](PipelineConfig& c, std::string_view v) { c.field = parse_real(v); } }
#define INT(key, field)                                                           \
  Entry { key, [](const PipelineConfig& c) { return std::to_string(c.field); },   \
          [](PipelineConfig& c, std::string_view v) { c.field = parse_int(v); } }
#define U64(key, field)                                                           \
  Entry { key, [](const PipelineConfig& c) { return std::to_string(c.field); },   \
          [](PipelineConfig& c, std::string_view v) { c.field = parse_u64(v); } }
#define BOOL(key, field)                                                          \
  Entry { key, [](const PipelineConfig& c) { return std::string(c.field ? "true" : "false"); }, \
          [](PipelineConfig& c, std::string_view v) { c.field = csv::parse_bool(trim(v)); } }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      REAL("grid.delta_x_m", sim.grid.delta_x_m),
      REAL("grid.delta_y_m", sim.grid.delta_y_m),
      INT("grid.grid_width", sim.grid.grid_width),
      INT("grid.n_cells", sim.grid.n_cells),
      REAL("grid.min_x_m", sim.grid.min_x_m),
      REAL("grid.min_y_m", sim.grid.min_y_m),
      REAL("cell_height_m", sim.cell_height_m),
      REAL("cell_tx_power_dbm", sim.cell_tx_power_dbm),
      INT("n_ues", sim.n_ues),
      REAL("duration_s", sim.duration_s),
      REAL("report_period_s", sim.report_period_s),
      REAL("neighbor_detect_threshold_dbm", sim.neighbor_detect_threshold_dbm),
      INT("max_neighbors_per_report", sim.max_neighbors_per_report),
      REAL("handover_hysteresis_db", sim.handover_hysteresis_db),
      REAL("ue_min_height_m", sim.ue_min_height_m),
      REAL("ue_max_height_m", sim.ue_max_height_m),
      U64("seed", sim.seed),
      REAL("mobility.boundary_min_x_m", sim.mobility.boundary.lo.x_m),
      REAL("mobility.boundary_min_y_m", sim.mobility.boundary.lo.y_m),
      REAL("mobility.boundary_max_x_m", sim.mobility.boundary.hi.x_m),
      REAL("mobility.boundary_max_y_m", sim.mobility.boundary.hi.y_m),
      REAL("mobility.speed_mps", sim.mobility.speed_mps),
      REAL("mobility.redirect_interval_s", sim.mobility.redirect_interval_s),
      REAL("propagation.carrier_mhz", sim.propagation.carrier_mhz),
      REAL("propagation.noise_floor_dbm", sim.propagation.noise_floor_dbm),
      INT("propagation.rsrq_bandwidth_blocks", sim.propagation.rsrq_bandwidth_blocks),
      REAL("propagation.min_distance_m", sim.propagation.min_distance_m),
      REAL("propagation.shadowing_sigma_db", sim.propagation.shadowing_sigma_db),
      INT("test_n_ues", test_n_ues),
      U64("validation_seed", validation_seed),
      U64("test_seed", test_seed),
      REAL("dwell_s", dwell_s),
      REAL("travel_s", travel_s),
      Entry{"scenarios",
            [](const PipelineConfig& c) {
              if (!c.scenarios) return std::string("all");
              if (c.scenarios->empty()) return std::string("none");
              return join_list(*c.scenarios, [](Pci p) { return std::to_string(p); });
            },
            [](PipelineConfig& c, std::string_view v) {
              const auto s = trim(v);
              if (s == "all") {
                c.scenarios.reset();
              } else if (s == "none" || s.empty()) {
                c.scenarios = std::vector<Pci>{};
              } else {
                std::vector<Pci> pcis;
                for (const auto& item : list_items(s)) pcis.push_back(parse_int(item));
                c.scenarios = pcis;
              }
            }},
      Entry{"schemes",
            [](const PipelineConfig& c) {
              return join_list(c.schemes, [](FeatureScheme s) { return to_string(s); });
            },
            [](PipelineConfig& c, std::string_view v) {
              c.schemes.clear();
              for (const auto& item : list_items(v)) c.schemes.push_back(parse_scheme(item));
            }},
      Entry{"detectors",
            [](const PipelineConfig& c) {
              return join_list(c.detectors, [](DetectorKind d) { return to_string(d); });
            },
            [](PipelineConfig& c, std::string_view v) {
              c.detectors.clear();
              for (const auto& item : list_items(v)) c.detectors.push_back(parse_detector(item));
            }},
      Entry{"impute",
            [](const PipelineConfig& c) {
              return std::string(c.impute.kind == ImputePolicy::Kind::kFillValue ? "fill_value:"
                                                                                 : "per_column_min_minus:") +
                     csv::format(c.impute.value);
            },
            [](PipelineConfig& c, std::string_view v) {
              const auto s = trim(v);
              const auto colon = s.find(':');
              if (colon == std::string::npos) throw ConfigError("impute must be kind:value, got '" + s + "'");
              const auto kind = s.substr(0, colon);
              const double value = parse_real(s.substr(colon + 1));
              if (kind == "fill_value") {
                c.impute = ImputePolicy::fill(value);
              } else if (kind == "per_column_min_minus") {
                c.impute = ImputePolicy::per_column_min_minus(value);
              } else {
                throw ConfigError("unknown imputation '" + kind + "'");
              }
            }},
      REAL("target_fpr", target_fpr),
      REAL("position_bin_s", position_bin_s),
      Entry{"out_dir", [](const PipelineConfig& c) { return c.out_dir; },
            [](PipelineConfig& c, std::string_view v) { c.out_dir = trim(v); }},
      INT("rc.k", params.rc.k),
      INT("rc.min_records", params.rc.min_records),
      INT("rc.n_trees", params.rc.forest.n_trees),
      INT("rc.max_depth", params.rc.forest.max_depth),
      INT("rc.min_leaf", params.rc.forest.min_leaf),
      INT("rc.max_features", params.rc.forest.max_features),
      BOOL("rc.bootstrap", params.rc.forest.bootstrap),
      INT("adf.n_trees", params.adf.n_trees),
      INT("adf.subsample", params.adf.subsample),
      REAL("adf.margin", params.adf.margin),
      REAL("adf.isolation_level", params.adf.isolation_level),
      INT("adf.max_depth", params.adf.max_depth),
      REAL("adf.width_floor", params.adf.width_floor),
      INT("ae.epochs", params.ae.epochs),
      INT("ae.batch_size", params.ae.batch_size),
      REAL("ae.lr0", params.ae.lr0),
      REAL("ae.lr_decay", params.ae.lr_decay),
      INT("ae.decay_every", params.ae.decay_every),
      REAL("ae.beta1", params.ae.beta1),
      REAL("ae.beta2", params.ae.beta2),
      REAL("ae.epsilon", params.ae.epsilon),
  };
  return table;
}

#undef REAL
#undef INT
#undef U64
#undef BOOL

}  // namespace

std::vector<Pci> PipelineConfig::scenario_pcis() const {
  if (scenarios) return *scenarios;
  std::vector<Pci> all;
  for (const auto& c : grid_topology(sim)) all.push_back(c.pci);
  return all;
}

void PipelineConfig::reseed(std::uint64_t seed) {
  const std::uint64_t shift = seed - sim.seed;
  sim.seed = seed;
  validation_seed += shift;
  test_seed += shift;
}

void validate(const PipelineConfig& c) {
  validate(c.sim);
  auto fail = [](const std::string& what) { throw ConfigError("invalid pipeline config: " + what); };
  if (c.test_n_ues < 1) fail("test_n_ues must be >= 1");
  if (c.sim.n_ues < 1) fail("n_ues must be >= 1");
  if (!(c.dwell_s > 0.0)) fail("dwell_s must be > 0");
  if (!(c.travel_s > 0.0)) fail("travel_s must be > 0");
  if (!(c.target_fpr > 0.0 && c.target_fpr < 1.0)) fail("target_fpr must be in (0, 1)");
  if (!(c.position_bin_s > 0.0)) fail("position_bin_s must be > 0");
  if (c.schemes.empty()) fail("no feature schemes");
  if (c.detectors.empty()) fail("no detectors");
  if (c.out_dir.empty()) fail("out_dir is empty");
  for (auto d : c.detectors) {
    if (d == DetectorKind::kRc &&
        std::find(c.schemes.begin(), c.schemes.end(), FeatureScheme::kCol) == c.schemes.end()) {
      fail("the rc detector needs the col scheme");
    }
  }
  const auto topology = grid_topology(c.sim);
  for (Pci p : c.scenario_pcis()) {
    const bool known = std::any_of(topology.begin(), topology.end(), [p](const CellSite& s) { return s.pci == p; });
    if (!known) fail("scenario PCI " + std::to_string(p) + " is not in the topology");
  }
}

PipelineConfig parse_config(std::istream& in, PipelineConfig base) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const auto key = trim(std::string_view(text).substr(0, eq));
    const auto value = std::string_view(text).substr(eq + 1);
    const auto& table = entries();
    auto it = std::find_if(table.begin(), table.end(), [&](const Entry& e) { return e.key == key; });
    if (it == table.end()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    try {
      it->set(base, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + " (" + key + "): " + e.what());
    }
  }
  return base;
}

PipelineConfig load_config(const std::string& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  return parse_config(in, std::move(base));
}

std::string to_text(const PipelineConfig& config) {
  std::string out;
  for (const auto& e : entries()) out += e.key + " = " + e.get(config) + "\n";
  return out;
}

std::string config_hash(const PipelineConfig& config) {
  // Where the artifacts go does not change what they contain.
  PipelineConfig keyed = config;
  keyed.out_dir.clear();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_text(keyed)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace fbs
