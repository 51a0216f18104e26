#pragma once

#include <string>

#include <json.hpp>

#include "robustdp/extreal.hpp"

namespace robustdp {

/// Finite values as numbers, infinities as the strings "+inf" / "-inf".
nlohmann::json to_json(ExtReal v);
nlohmann::json number_json(double v);

/// Inverse of to_json(ExtReal); accepts numbers and the two strings.
ExtReal ext_from_json(const nlohmann::json& j);

/// Sorted keys, two-space indent, floats as %.17g.  Parsing the output and
/// rendering again reproduces it byte for byte.
std::string render_canonical(const nlohmann::json& j);

}  // namespace robustdp
