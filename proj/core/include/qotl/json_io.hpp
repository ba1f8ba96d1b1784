#pragma once

#include <json.hpp>

#include "qotl/matrix.hpp"

namespace qotl {

// Matrix wire format: {"rows": n, "cols": m, "data": [[re, im], ...]},
// data row-major with one [re, im] pair per entry.
nlohmann::json mat_to_json(const Mat& m);
Mat mat_from_json(const nlohmann::json& j);

}  // namespace qotl
