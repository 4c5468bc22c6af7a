#include "fbsdetect/sim_io.hpp"

#include <fstream>
#include <ostream>

#include "fbsdetect/csv.hpp"
#include "fbsdetect/errors.hpp"

namespace fbs {

void write_reports_csv(std::ostream& out, const std::vector<MeasurementReport>& reports,
                       int max_neighbors) {
  out << "time_s,ue_id,serving_pci,serving_rsrp_dbm,serving_rsrq_db,n_neighbors";
  for (int i = 1; i <= max_neighbors; ++i) {
    out << ",nbr" << i << "_pci,nbr" << i << "_rsrp_dbm,nbr" << i << "_rsrq_db";
  }
  out << '\n';
  for (const auto& r : reports) {
    if (r.neighbors.size() > static_cast<std::size_t>(max_neighbors)) {
      throw ConfigError("report has more neighbours than the CSV layout allows");
    }
    out << csv::format(r.time_s) << ',' << r.ue_id << ',' << r.serving_pci << ','
        << csv::format(r.serving_rsrp_dbm) << ',' << csv::format(r.serving_rsrq_db) << ','
        << r.neighbors.size();
    for (int i = 0; i < max_neighbors; ++i) {
      if (static_cast<std::size_t>(i) < r.neighbors.size()) {
        const auto& n = r.neighbors[static_cast<std::size_t>(i)];
        out << ',' << n.pci << ',' << csv::format(n.rsrp_dbm) << ',' << csv::format(n.rsrq_db);
      } else {
        out << ",,,";
      }
    }
    out << '\n';
  }
}

std::vector<MeasurementReport> read_reports_csv(std::istream& in) {
  const csv::Table t = csv::read(in);
  if (t.header.size() < 6 || (t.header.size() - 6) % 3 != 0) {
    throw ConfigError("reports.csv has an unexpected header");
  }
  const std::size_t slots = (t.header.size() - 6) / 3;
  std::vector<MeasurementReport> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    MeasurementReport r;
    r.time_s = csv::parse_double(row[0]);
    r.ue_id = static_cast<int>(csv::parse_long(row[1]));
    r.serving_pci = static_cast<Pci>(csv::parse_long(row[2]));
    r.serving_rsrp_dbm = csv::parse_double(row[3]);
    r.serving_rsrq_db = csv::parse_double(row[4]);
    const auto n = static_cast<std::size_t>(csv::parse_long(row[5]));
    if (n > slots) throw ConfigError("n_neighbors exceeds neighbour columns");
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t base = 6 + 3 * i;
      r.neighbors.push_back({static_cast<Pci>(csv::parse_long(row[base])),
                             csv::parse_double(row[base + 1]), csv::parse_double(row[base + 2])});
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_topology_csv(std::ostream& out, const std::vector<CellSite>& cells) {
  out << "pci,x_m,y_m,height_m,tx_power_dbm,can_serve\n";
  for (const auto& c : cells) {
    out << c.pci << ',' << csv::format(c.position.x_m) << ',' << csv::format(c.position.y_m) << ','
        << csv::format(c.height_m) << ',' << csv::format(c.tx_power_dbm) << ','
        << (c.can_serve ? 1 : 0) << '\n';
  }
}

std::vector<CellSite> read_topology_csv(std::istream& in) {
  const csv::Table t = csv::read(in);
  const auto pci = t.column("pci"), x = t.column("x_m"), y = t.column("y_m"),
             h = t.column("height_m"), p = t.column("tx_power_dbm"), s = t.column("can_serve");
  std::vector<CellSite> out;
  for (const auto& row : t.rows) {
    CellSite c;
    c.pci = static_cast<Pci>(csv::parse_long(row[pci]));
    c.position = {csv::parse_double(row[x]), csv::parse_double(row[y])};
    c.height_m = csv::parse_double(row[h]);
    c.tx_power_dbm = csv::parse_double(row[p]);
    c.can_serve = csv::parse_bool(row[s]);
    out.push_back(c);
  }
  return out;
}

void save_reports(const std::string& path, const std::vector<MeasurementReport>& reports,
                  int max_neighbors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  write_reports_csv(out, reports, max_neighbors);
}

std::vector<MeasurementReport> load_reports(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DependencyError("cannot open " + path);
  return read_reports_csv(in);
}

void save_topology(const std::string& path, const std::vector<CellSite>& cells) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  write_topology_csv(out, cells);
}

std::vector<CellSite> load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DependencyError("cannot open " + path);
  return read_topology_csv(in);
}

}  // namespace fbs
