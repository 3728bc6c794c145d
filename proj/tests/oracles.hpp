#pragma once

// Independent reference checks written against plain pixel grids.

#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "facadepv/facade.hpp"
#include "facadepv/geometry.hpp"
#include "test_support.hpp"

namespace facadepv::testing {

/// Integer wall of up to max_side x max_side cells with up to max_obstructions
/// random (possibly overlapping, possibly straddling) obstructions.
template <class Rng>
FacadeDescription random_wall_instance(Rng& rng, int max_side = 200, int max_obstructions = 12) {
  std::uniform_int_distribution<int> side(1, max_side), count(0, max_obstructions);
  FacadeDescription f;
  f.building_id = "random";
  const int w = side(rng), h = side(rng);
  f.width_px = w;
  f.height_px = h;
  f.scale = compute_scale(w * 0.05, w, h * 0.05, h);
  f.components.push_back({ComponentClass::Wall, {0, 0, double(w), double(h)}});
  const int n = count(rng);
  for (int i = 0; i < n; ++i) f.components.push_back({ComponentClass::Window, random_box(rng, w, h)});
  return f;
}

struct Grid {
  int w = 0, h = 0;
  std::vector<int> cells;
  int& at(int x, int y) { return cells[static_cast<std::size_t>(y * w + x)]; }
  int get(int x, int y) const {
    if (x < 0 || y < 0 || x >= w || y >= h) return -1;
    return cells[static_cast<std::size_t>(y * w + x)];
  }
};

inline void paint(Grid& g, const BoundingBox& b, int delta) {
  for (int y = static_cast<int>(b.y_min); y < static_cast<int>(b.y_max); ++y)
    for (int x = static_cast<int>(b.x_min); x < static_cast<int>(b.x_max); ++x) g.at(x, y) += delta;
}

/// Empty string when `rects` covers every free cell exactly once, no
/// obstructed cell, and no rectangle can grow by one pixel into free,
/// uncovered space.
inline std::string check_partition(const FacadeDescription& f, const std::vector<BoundingBox>& rects) {
  const int w = static_cast<int>(f.width_px), h = static_cast<int>(f.height_px);
  Grid blocked{w, h, std::vector<int>(static_cast<std::size_t>(w * h), 1)};
  for (const auto& wall : f.walls()) paint(blocked, wall, -1);
  for (auto& c : blocked.cells) c = c > 0 ? 1 : 0;
  for (const auto& o : f.obstructions()) {
    for (int y = static_cast<int>(o.y_min); y < static_cast<int>(o.y_max); ++y)
      for (int x = static_cast<int>(o.x_min); x < static_cast<int>(o.x_max); ++x) blocked.at(x, y) = 1;
  }
  Grid cover{w, h, std::vector<int>(static_cast<std::size_t>(w * h), 0)};
  for (const auto& r : rects) {
    if (!r.valid()) return fmt::format("degenerate rectangle [{},{},{},{}]", r.x_min, r.y_min, r.x_max, r.y_max);
    if (r.x_min < 0 || r.y_min < 0 || r.x_max > w || r.y_max > h) return "rectangle leaves the canvas";
    if (r.x_min != std::floor(r.x_min) || r.y_min != std::floor(r.y_min) || r.x_max != std::floor(r.x_max) ||
        r.y_max != std::floor(r.y_max)) {
      return "non-integer rectangle on an integer instance";
    }
    paint(cover, r, 1);
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int want = blocked.get(x, y) ? 0 : 1;
      if (cover.get(x, y) != want) {
        return fmt::format("cell ({},{}) covered {} times, expected {}", x, y, cover.get(x, y), want);
      }
    }
  }
  // maximality: each one-pixel growth strip must touch something not free
  for (const auto& r : rects) {
    const int x0 = static_cast<int>(r.x_min), y0 = static_cast<int>(r.y_min);
    const int x1 = static_cast<int>(r.x_max), y1 = static_cast<int>(r.y_max);
    auto strip_is_free_and_uncovered = [&](int ax, int ay, int bx, int by) {
      for (int y = ay; y < by; ++y)
        for (int x = ax; x < bx; ++x)
          if (blocked.get(x, y) != 0 || cover.get(x, y) != 0) return false;
      return true;
    };
    if (strip_is_free_and_uncovered(x0 - 1, y0, x0, y1) || strip_is_free_and_uncovered(x1, y0, x1 + 1, y1) ||
        strip_is_free_and_uncovered(x0, y0 - 1, x1, y0) || strip_is_free_and_uncovered(x0, y1, x1, y1 + 1)) {
      return fmt::format("rectangle [{},{},{},{}] is not maximal", x0, y0, x1, y1);
    }
  }
  return {};
}

/// Pixel-count area of a union of integer boxes on a w x h grid.
inline double grid_union_area(const std::vector<BoundingBox>& boxes, int w, int h) {
  Grid g{w, h, std::vector<int>(static_cast<std::size_t>(w * h), 0)};
  for (const auto& b : boxes) paint(g, b, 1);
  double n = 0;
  for (int c : g.cells) n += c > 0 ? 1 : 0;
  return n;
}

}  // namespace facadepv::testing
