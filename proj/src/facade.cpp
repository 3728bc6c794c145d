#include "facadepv/facade.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "facadepv/error.hpp"
#include "json_util.hpp"

namespace facadepv {

using nlohmann::json;

ComponentClass parse_component_class(std::string_view label) {
  std::string lower(label);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "wall") return ComponentClass::Wall;
  if (lower == "window") return ComponentClass::Window;
  if (lower == "door") return ComponentClass::Door;
  if (lower == "balcony") return ComponentClass::Balcony;
  if (lower == "roof") return ComponentClass::Roof;
  return ComponentClass::Other;
}

std::string_view to_string(ComponentClass c) noexcept {
  switch (c) {
    case ComponentClass::Wall: return "wall";
    case ComponentClass::Window: return "window";
    case ComponentClass::Door: return "door";
    case ComponentClass::Balcony: return "balcony";
    case ComponentClass::Roof: return "roof";
    case ComponentClass::Other: return "other";
  }
  return "other";
}

std::vector<BoundingBox> FacadeDescription::boxes_of(ComponentClass cls) const {
  std::vector<BoundingBox> out;
  for (const auto& c : components)
    if (c.cls == cls) out.push_back(c.box);
  return out;
}

std::vector<BoundingBox> FacadeDescription::walls() const { return boxes_of(ComponentClass::Wall); }

std::vector<BoundingBox> FacadeDescription::obstructions() const {
  std::vector<BoundingBox> out;
  for (const auto& c : components)
    if (c.cls != ComponentClass::Wall) out.push_back(c.box);
  return out;
}

const MetricScale& FacadeDescription::require_scale() const {
  if (!scale) throw Error(ErrorKind::MissingScale, "facade '" + building_id + "' has no metric dimensions");
  return *scale;
}

namespace {

std::string optional_string(const json& doc, const char* key) {
  if (!doc.contains(key) || doc.at(key).is_null()) return {};
  if (!doc.at(key).is_string()) throw Error(ErrorKind::SchemaViolation, std::string("'") + key + "' must be a string");
  return doc.at(key).get<std::string>();
}

}  // namespace

FacadeDescription parse_facade(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorKind::SchemaViolation, "facade record must be a JSON object");
  FacadeDescription f;

  if (!doc.contains("building_id") || !doc.at("building_id").is_string()) {
    throw Error(ErrorKind::SchemaViolation, "missing string field 'building_id'");
  }
  f.building_id = doc.at("building_id").get<std::string>();
  f.location = optional_string(doc, "location");
  f.building_type = optional_string(doc, "building_type");

  f.latitude = detail::require_number(doc, "latitude", "facade");
  f.longitude = detail::require_number(doc, "longitude", "facade");
  if (std::abs(f.latitude) > 90.0) throw Error(ErrorKind::SchemaViolation, "latitude out of [-90, 90]");
  if (std::abs(f.longitude) > 180.0) throw Error(ErrorKind::SchemaViolation, "longitude out of [-180, 180]");
  f.azimuth_deg = std::fmod(detail::require_number(doc, "azimuth_deg", "facade"), 360.0);
  if (f.azimuth_deg < 0.0) f.azimuth_deg += 360.0;
  if (doc.contains("altitude_m") && !doc.at("altitude_m").is_null()) {
    f.altitude_m = detail::require_number(doc, "altitude_m", "facade");
  }

  if (!doc.contains("canvas")) throw Error(ErrorKind::SchemaViolation, "missing 'canvas'");
  const auto& canvas = doc.at("canvas");
  f.width_px = detail::require_number(canvas, "width_px", "canvas");
  f.height_px = detail::require_number(canvas, "height_px", "canvas");
  if (!(f.width_px > 0.0) || !(f.height_px > 0.0)) {
    throw Error(ErrorKind::SchemaViolation, "canvas dimensions must be positive");
  }

  if (doc.contains("metric") && !doc.at("metric").is_null()) {
    const auto& metric = doc.at("metric");
    const double wm = detail::require_number(metric, "width_m", "metric");
    const double hm = detail::require_number(metric, "height_m", "metric");
    try {
      f.scale = compute_scale(wm, f.width_px, hm, f.height_px);
    } catch (const Error& e) {
      throw Error(ErrorKind::SchemaViolation, e.what());
    }
  }
  if (doc.contains("scale") && !doc.at("scale").is_null()) {
    if (!f.scale) throw Error(ErrorKind::ScaleMismatch, "explicit scale given without metric dimensions");
    const auto& s = doc.at("scale");
    const double sx = detail::require_number(s, "s_x", "scale");
    if (std::abs(sx - f.scale->s) > 1e-9) {
      throw Error(ErrorKind::ScaleMismatch, fmt::format("s_x {} disagrees with width_m / width_px = {}", sx, f.scale->s));
    }
    if (s.contains("s_y")) {
      const double sy = detail::require_number(s, "s_y", "scale");
      if (std::abs(sy - f.scale->s_y) > 1e-9) {
        throw Error(ErrorKind::ScaleMismatch,
                    fmt::format("s_y {} disagrees with height_m / height_px = {}", sy, f.scale->s_y));
      }
    }
  }

  if (doc.contains("rectification") && !doc.at("rectification").is_null()) {
    const auto& r = doc.at("rectification");
    if (!r.is_object() || !r.contains("window_corners") || !r.at("window_corners").is_array() ||
        r.at("window_corners").size() != 4) {
      throw Error(ErrorKind::SchemaViolation, "rectification.window_corners must hold 4 [x, y] points");
    }
    RectificationHint hint;
    for (const auto& p : r.at("window_corners")) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
        throw Error(ErrorKind::SchemaViolation, "rectification corner must be [x, y]");
      }
      hint.window_corners.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    if (r.contains("square_side")) hint.square_side = detail::require_number(r, "square_side", "rectification");
    f.rectification = std::move(hint);
  }

  if (doc.contains("warnings") && !doc.at("warnings").is_null()) {
    const auto& w = doc.at("warnings");
    if (!w.is_array()) throw Error(ErrorKind::SchemaViolation, "'warnings' must be an array of strings");
    for (const auto& line : w) {
      if (!line.is_string()) throw Error(ErrorKind::SchemaViolation, "'warnings' must be an array of strings");
      f.warnings.push_back(line.get<std::string>());
    }
  }

  if (!doc.contains("components") || !doc.at("components").is_array()) {
    throw Error(ErrorKind::SchemaViolation, "missing array 'components'");
  }
  const BoundingBox canvas_box = f.canvas();
  std::size_t index = 0;
  for (const auto& entry : doc.at("components")) {
    const std::string where = fmt::format("components[{}]", index++);
    if (!entry.is_object() || !entry.contains("class") || !entry.at("class").is_string() || !entry.contains("box")) {
      throw Error(ErrorKind::SchemaViolation, where + ": needs string 'class' and 'box'");
    }
    Component c;
    c.cls = parse_component_class(entry.at("class").get<std::string>());
    c.box = detail::box_from_json(entry.at("box"), where);
    const auto clipped = intersection(c.box, canvas_box);
    if (!clipped.valid()) {
      throw Error(ErrorKind::GeometryViolation, where + ": box lies outside the canvas");
    }
    if (!(clipped == c.box)) {
      f.warnings.push_back(where + ": clipped to canvas");
      c.box = clipped;
    }
    f.components.push_back(c);
  }

  if (f.walls().empty()) {
    f.components.insert(f.components.begin(), Component{ComponentClass::Wall, canvas_box});
  }

  const auto walls = f.walls();
  for (std::size_t i = 0; i < f.components.size(); ++i) {
    auto& c = f.components[i];
    if (c.cls == ComponentClass::Wall) continue;
    const BoundingBox one[] = {c.box};
    const auto ov = region_overlap(one, walls);
    if (ov.a_minus_b == 0.0) continue;
    if (ov.intersection == 0.0) {
      throw Error(ErrorKind::GeometryViolation,
                  fmt::format("{} box {} does not intersect any wall", to_string(c.cls), i));
    }
    // Clip to the wall holding the largest share of the box.
    const BoundingBox* host = nullptr;
    double best = 0.0;
    for (const auto& w : walls) {
      const auto inter = intersection(c.box, w);
      if (inter.valid() && inter.area() > best) {
        best = inter.area();
        host = &w;
      }
    }
    c.box = intersection(c.box, *host);
    f.warnings.push_back(fmt::format("{} box {} straddles the wall edge; clipped to wall", to_string(c.cls), i));
  }
  return f;
}

FacadeDescription parse_facade_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::SchemaViolation, std::string("invalid JSON: ") + e.what());
  }
  return parse_facade(doc);
}

FacadeDescription load_facade(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open facade record " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_facade_text(ss.str());
}

json facade_to_json(const FacadeDescription& f) {
  json doc;
  doc["building_id"] = f.building_id;
  if (!f.location.empty()) doc["location"] = f.location;
  if (!f.building_type.empty()) doc["building_type"] = f.building_type;
  doc["latitude"] = f.latitude;
  doc["longitude"] = f.longitude;
  doc["azimuth_deg"] = detail::number(f.azimuth_deg);
  if (f.altitude_m != 0.0) doc["altitude_m"] = f.altitude_m;
  doc["canvas"] = {{"width_px", detail::number(f.width_px)}, {"height_px", detail::number(f.height_px)}};
  if (f.scale) {
    doc["metric"] = {{"width_m", detail::number(f.scale->width_m)}, {"height_m", detail::number(f.scale->height_m)}};
  } else {
    doc["metric"] = nullptr;
  }
  auto comps = json::array();
  for (const auto& c : f.components) {
    comps.push_back({{"class", std::string(to_string(c.cls))}, {"box", detail::box_to_json(c.box)}});
  }
  doc["components"] = std::move(comps);
  if (f.rectification) {
    auto corners = json::array();
    for (const auto& p : f.rectification->window_corners) corners.push_back({detail::number(p.x), detail::number(p.y)});
    doc["rectification"] = {{"window_corners", std::move(corners)},
                            {"square_side", detail::number(f.rectification->square_side)}};
  }
  return doc;
}

namespace {

// Gap between two intervals; negative when they overlap.
double gap(double a0, double a1, double b0, double b1) { return std::max(a0, b0) - std::min(a1, b1); }

bool mergeable(const BoundingBox& a, const BoundingBox& b, double merge_gap) {
  const double gx = gap(a.x_min, a.x_max, b.x_min, b.x_max);
  const double gy = gap(a.y_min, a.y_max, b.y_min, b.y_max);
  // close along one axis while the projections overlap on the other
  return (gx <= merge_gap && gy < 0.0) || (gy <= merge_gap && gx < 0.0);
}

}  // namespace

std::vector<Component> tidy_components(std::span<const Component> components, double min_area_px2,
                                       double merge_gap_px) {
  std::vector<Component> work(components.begin(), components.end());
  std::stable_sort(work.begin(), work.end(), [](const Component& a, const Component& b) {
    if (a.cls != b.cls) return a.cls < b.cls;
    return raster_less(a.box, b.box);
  });

  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < work.size() && !changed; ++i) {
      for (std::size_t j = i + 1; j < work.size(); ++j) {
        if (work[i].cls != work[j].cls || !mergeable(work[i].box, work[j].box, merge_gap_px)) continue;
        work[i].box = hull(work[i].box, work[j].box);
        work.erase(work.begin() + static_cast<std::ptrdiff_t>(j));
        changed = true;
        break;
      }
    }
  }

  std::erase_if(work, [&](const Component& c) { return c.box.area() < min_area_px2; });
  std::sort(work.begin(), work.end(), [](const Component& a, const Component& b) {
    if (a.cls != b.cls) return a.cls < b.cls;
    return raster_less(a.box, b.box);
  });
  return work;
}

double default_min_area_px2(const FacadeDescription& f) noexcept { return 0.0025 * f.width_px * f.height_px; }

double default_merge_gap_px(const FacadeDescription& f) noexcept { return 0.01 * f.width_px; }

BiasModel calibrate_bias(std::span<const double> truth, std::span<const double> predicted, ComponentClass scope) {
  if (truth.empty() || predicted.empty()) {
    throw Error(ErrorKind::EmptyCalibrationSet, "calibration lists are empty");
  }
  if (truth.size() != predicted.size()) {
    throw Error(ErrorKind::InvalidArgument, "truth and prediction lists differ in length");
  }
  double st = 0.0, sp = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    st += truth[i];
    sp += predicted[i];
  }
  if (!(st > 0.0)) throw Error(ErrorKind::ZeroTruthArea, "sum of truth areas must be positive");
  BiasModel m;
  m.bias = (st - sp) / st;
  m.class_scope = scope;
  m.calibration_n = truth.size();
  if (!(m.bias < 1.0)) throw Error(ErrorKind::BiasAtUnity, "predicted areas sum to zero or less");
  return m;
}

double correct_area(double predicted, const BiasModel& model) {
  if (!(model.bias < 1.0)) throw Error(ErrorKind::BiasAtUnity, "bias must be below 1");
  return predicted / (1.0 - model.bias);
}

std::map<ComponentClass, BiasModel> default_bias_models() {
  return {
      {ComponentClass::Wall, BiasModel{0.032, ComponentClass::Wall, 20}},
      {ComponentClass::Window, BiasModel{-0.021, ComponentClass::Window, 20}},
  };
}

}  // namespace facadepv
