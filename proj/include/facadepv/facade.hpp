#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "facadepv/geometry.hpp"
#include "facadepv/rectify.hpp"

namespace facadepv {

enum class ComponentClass { Wall, Window, Door, Balcony, Roof, Other };

/// Case-insensitive; unknown labels map to Other.
ComponentClass parse_component_class(std::string_view label);
std::string_view to_string(ComponentClass c) noexcept;

struct Component {
  ComponentClass cls = ComponentClass::Other;
  BoundingBox box;

  friend bool operator==(const Component&, const Component&) = default;
};

/// Optional keystone correction carried by a facade record: the four
/// corners (TL, TR, BR, BL) of one reference window in the source photo.
struct RectificationHint {
  std::vector<PixelPoint> window_corners;
  double square_side = 100.0;
};

struct FacadeDescription {
  std::string building_id;
  std::string location;       // free-form grouping label, may be empty
  std::string building_type;  // e.g. low-rise / mid-rise / high-rise
  double latitude = 0.0;
  double longitude = 0.0;
  double azimuth_deg = 180.0;  // surface normal, clockwise from true north
  double altitude_m = 0.0;
  double width_px = 0.0;
  double height_px = 0.0;
  std::vector<Component> components;
  std::optional<MetricScale> scale;  // absent when the metric block is null
  std::optional<RectificationHint> rectification;
  std::vector<std::string> warnings;

  BoundingBox canvas() const noexcept { return {0.0, 0.0, width_px, height_px}; }
  std::vector<BoundingBox> walls() const;
  std::vector<BoundingBox> obstructions() const;
  std::vector<BoundingBox> boxes_of(ComponentClass cls) const;
  const MetricScale& require_scale() const;
};

/// Validates a facade interchange record and builds the description.
/// Boxes are clipped to the canvas, obstructions straddling the wall are
/// clipped to it (with a warning). A missing wall becomes the full canvas.
///
/// Throws SchemaViolation, GeometryViolation (obstruction entirely outside
/// every wall) and ScaleMismatch (an explicit "scale" disagreeing with the
/// metric block).
FacadeDescription parse_facade(const nlohmann::json& document);
FacadeDescription parse_facade_text(std::string_view text);
FacadeDescription load_facade(const std::string& path);

nlohmann::json facade_to_json(const FacadeDescription& facade);

/// Same-class boxes within `merge_gap_px` along one axis and overlapping on
/// the other are fused into their joint AABB until nothing changes, then
/// boxes smaller than `min_area_px2` are removed. Output is sorted by class,
/// then raster order.
std::vector<Component> tidy_components(std::span<const Component> components, double min_area_px2,
                                       double merge_gap_px);

/// Canvas-relative defaults: 0.25% of the canvas area, 1% of its width.
double default_min_area_px2(const FacadeDescription& facade) noexcept;
double default_merge_gap_px(const FacadeDescription& facade) noexcept;

/// Relative under-estimation of an area class, (sum truth - sum pred) / sum truth.
struct BiasModel {
  double bias = 0.0;
  ComponentClass class_scope = ComponentClass::Wall;
  std::size_t calibration_n = 1;
};

BiasModel calibrate_bias(std::span<const double> truth_areas, std::span<const double> predicted_areas,
                         ComponentClass scope = ComponentClass::Wall);

/// predicted / (1 - bias).
double correct_area(double predicted, const BiasModel& model);

/// Wall +3.2% (under-segmentation), window -2.1% (over-segmentation).
std::map<ComponentClass, BiasModel> default_bias_models();

}  // namespace facadepv
