#pragma once

#include "fbsdetect/features.hpp"
#include "json.hpp"

namespace fbs {

nlohmann::json catalog_json(const NeighborCatalog& c);
NeighborCatalog catalog_from(const nlohmann::json& j);

}  // namespace fbs
