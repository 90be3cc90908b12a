#pragma once

#include "sparselmi/design.hpp"

#include <json.hpp>

namespace sparselmi {

using Json = nlohmann::ordered_json;

Json matrix_to_json(const Matrix& m);
Json design_to_json(const DesignResult& r);

/// Columns gamma, kappa, rel_cost, row_support_size, oracle_margin, runtime_s.
/// Failed points keep their gamma and runtime; the other fields are empty.
std::string tradeoff_csv(const std::vector<SweepPoint>& points);

}  // namespace sparselmi
