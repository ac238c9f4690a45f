#pragma once

#include <json.hpp>

namespace revarc {

// All JSON in this project is order-preserving: blocks and metadata are
// serialized with a fixed key order, so the default sorted map is unusable.
using Json = nlohmann::ordered_json;

}  // namespace revarc
