#include "json_io.hpp"

namespace fbs {

using nlohmann::json;

json catalog_json(const NeighborCatalog& c) {
  json positions = json::array();
  for (const auto& [pci, p] : c.positions) positions.push_back({pci, p.x_m, p.y_m});
  return {{"serving_pci", c.serving_pci},
          {"serving_position", {c.serving_position.x_m, c.serving_position.y_m}},
          {"known_neighbors", c.known_neighbors},
          {"max_concurrent_neighbors", c.max_concurrent_neighbors},
          {"positions", positions}};
}

NeighborCatalog catalog_from(const json& j) {
  NeighborCatalog c;
  c.serving_pci = j.at("serving_pci");
  c.serving_position = {j.at("serving_position").at(0), j.at("serving_position").at(1)};
  c.known_neighbors = j.at("known_neighbors").get<std::set<Pci>>();
  c.max_concurrent_neighbors = j.at("max_concurrent_neighbors");
  for (const auto& p : j.at("positions")) c.positions[p.at(0).get<Pci>()] = {p.at(1), p.at(2)};
  return c;
}

}  // namespace fbs
