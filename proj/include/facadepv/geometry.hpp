#pragma once

#include <algorithm>
#include <span>
#include <vector>

namespace facadepv {

struct PixelPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

/// Axis-aligned box in pixel coordinates: origin top-left, x rightward,
/// y downward, stored as [x_min, y_min, x_max, y_max].
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept { return width() * height(); }
  bool valid() const noexcept { return x_min < x_max && y_min < y_max; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline bool overlaps(const BoundingBox& a, const BoundingBox& b) noexcept {
  return a.x_min < b.x_max && b.x_min < a.x_max && a.y_min < b.y_max && b.y_min < a.y_max;
}

inline bool contains(const BoundingBox& outer, const BoundingBox& inner) noexcept {
  return outer.x_min <= inner.x_min && outer.y_min <= inner.y_min &&
         outer.x_max >= inner.x_max && outer.y_max >= inner.y_max;
}

inline BoundingBox intersection(const BoundingBox& a, const BoundingBox& b) noexcept {
  return {std::max(a.x_min, b.x_min), std::max(a.y_min, b.y_min),
          std::min(a.x_max, b.x_max), std::min(a.y_max, b.y_max)};
}

inline BoundingBox hull(const BoundingBox& a, const BoundingBox& b) noexcept {
  return {std::min(a.x_min, b.x_min), std::min(a.y_min, b.y_min),
          std::max(a.x_max, b.x_max), std::max(a.y_max, b.y_max)};
}

/// Order by (y_min, x_min, y_max, x_max).
inline bool raster_less(const BoundingBox& a, const BoundingBox& b) noexcept {
  if (a.y_min != b.y_min) return a.y_min < b.y_min;
  if (a.x_min != b.x_min) return a.x_min < b.x_min;
  if (a.y_max != b.y_max) return a.y_max < b.y_max;
  return a.x_max < b.x_max;
}

/// Exact areas of two rectangle sets, each interpreted as the union of its
/// members. Computed on the coordinate-compressed grid spanned by every box
/// edge, so results are exact for integer coordinates.
struct RegionOverlap {
  double area_a = 0.0;        // |A|
  double area_b = 0.0;        // |B|
  double intersection = 0.0;  // |A ∩ B|
  double a_minus_b = 0.0;     // |A \ B|
  double b_minus_a = 0.0;     // |B \ A|
  double union_area() const noexcept { return area_a + b_minus_a; }
};

RegionOverlap region_overlap(std::span<const BoundingBox> a, std::span<const BoundingBox> b);

double union_area(std::span<const BoundingBox> boxes);

}  // namespace facadepv
