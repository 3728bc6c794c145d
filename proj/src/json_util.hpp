#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "facadepv/error.hpp"
#include "facadepv/geometry.hpp"

namespace facadepv::detail {

// Integral values are written as JSON integers so boxes read back as
// [50,200,250,400] rather than [50.0,200.0,...].
inline nlohmann::json number(double v) {
  if (std::isfinite(v) && std::floor(v) == v && std::abs(v) < 9.0e15) {
    return static_cast<std::int64_t>(v);
  }
  return v;
}

inline nlohmann::json box_to_json(const BoundingBox& b) {
  return nlohmann::json::array({number(b.x_min), number(b.y_min), number(b.x_max), number(b.y_max)});
}

inline double require_number(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key) || !obj.at(key).is_number()) {
    throw Error(ErrorKind::SchemaViolation, where + ": missing numeric field '" + key + "'");
  }
  const double v = obj.at(key).get<double>();
  if (!std::isfinite(v)) throw Error(ErrorKind::SchemaViolation, where + ": non-finite '" + key + "'");
  return v;
}

// Parses a 4-number array; `what` names the entry in error messages.
inline BoundingBox box_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 4) {
    throw Error(ErrorKind::SchemaViolation, what + ": box must be an array of 4 numbers");
  }
  double v[4];
  for (std::size_t i = 0; i < 4; ++i) {
    if (!j[i].is_number()) throw Error(ErrorKind::SchemaViolation, what + ": box entries must be numbers");
    v[i] = j[i].get<double>();
    if (!std::isfinite(v[i])) throw Error(ErrorKind::SchemaViolation, what + ": non-finite coordinate");
  }
  BoundingBox b{v[0], v[1], v[2], v[3]};
  if (!b.valid()) {
    throw Error(ErrorKind::SchemaViolation, what + ": requires x_min < x_max and y_min < y_max");
  }
  return b;
}

}  // namespace facadepv::detail
