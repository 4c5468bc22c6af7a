#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fbsdetect/radio_sim.hpp"

namespace fbs {

// reports.csv: fixed prefix, then max_neighbors (pci, rsrp, rsrq) triples,
// absent neighbours as empty fields.
void write_reports_csv(std::ostream& out, const std::vector<MeasurementReport>& reports,
                       int max_neighbors);
std::vector<MeasurementReport> read_reports_csv(std::istream& in);

void write_topology_csv(std::ostream& out, const std::vector<CellSite>& cells);
std::vector<CellSite> read_topology_csv(std::istream& in);

void save_reports(const std::string& path, const std::vector<MeasurementReport>& reports,
                  int max_neighbors);
std::vector<MeasurementReport> load_reports(const std::string& path);
void save_topology(const std::string& path, const std::vector<CellSite>& cells);
std::vector<CellSite> load_topology(const std::string& path);

}  // namespace fbs
