#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "facadepv/facade.hpp"
#include "facadepv/geometry.hpp"
#include "facadepv/rectify.hpp"

namespace facadepv {

struct LayoutConstraints {
  double min_short_edge_m = 1.0;
  double min_long_edge_m = 1.2;
  double module_footprint_m2 = 1.2;
  double module_width_m = 1.0;
  double module_height_m = 1.2;
  double edge_margin_m = 0.0;  // shrinks each wall before partitioning

  void validate() const;
};

enum class Provenance { Deterministic, Llm, LlmValidated };
std::string_view to_string(Provenance p) noexcept;

struct LayoutResult {
  std::vector<BoundingBox> rectangles;  // px, sorted by (y_min, x_min)
  double total_area_m2 = 0.0;
  long module_count = 0;      // orientation-aware packing count
  long modules_by_area = 0;   // floor(total area / module footprint)
  Provenance provenance = Provenance::Deterministic;
};

/// Decomposes wall minus obstructions into disjoint rectangles by a
/// horizontal slab sweep followed by merge_rectangles. The union of the
/// output equals the free wall area exactly.
std::vector<BoundingBox> partition_free_wall(const FacadeDescription& facade, double edge_margin_m = 0.0);

/// Fuses pairs sharing a full edge until no pair remains.
std::vector<BoundingBox> merge_rectangles(std::span<const BoundingBox> rects);

/// Metric width and height of a pixel rectangle.
struct MetricExtent {
  double width_m;
  double height_m;
};
MetricExtent metric_extent(const BoundingBox& r, const MetricScale& scale) noexcept;

bool satisfies(const MetricExtent& e, const LayoutConstraints& c) noexcept;

/// Modules of module_width x module_height fitting in the rectangle, best of
/// the two orientations.
long packable_modules(const MetricExtent& e, const LayoutConstraints& c) noexcept;

/// Keeps rectangles whose short edge >= min_short_edge_m and long edge >=
/// min_long_edge_m (both inclusive).
LayoutResult qualify(std::span<const BoundingBox> rects, const MetricScale& scale, const LayoutConstraints& c);

double area_of(std::span<const BoundingBox> rects, const MetricScale& scale) noexcept;

/// partition -> qualify.
LayoutResult deterministic_layout(const FacadeDescription& facade, const LayoutConstraints& c);

/// {"installable_rectangles": [[x1,y1,x2,y2], ...]}
nlohmann::json layout_to_json(std::span<const BoundingBox> rects);
std::vector<BoundingBox> layout_from_json(const nlohmann::json& doc);

}  // namespace facadepv
