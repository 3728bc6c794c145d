#include "facadepv/layout.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "facadepv/error.hpp"
#include "json_util.hpp"

namespace facadepv {

namespace {

// Metric comparisons are inclusive; the slack absorbs px * (m/px) rounding
// such as 120 * 0.01 != 1.2.
constexpr double kMetricSlack = 1e-9;

using Interval = std::pair<double, double>;

std::vector<Interval> union_intervals(std::vector<Interval> v) {
  std::sort(v.begin(), v.end());
  std::vector<Interval> out;
  for (const auto& iv : v) {
    if (!out.empty() && iv.first <= out.back().second) {
      out.back().second = std::max(out.back().second, iv.second);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

// base minus holes; both sorted and internally disjoint.
std::vector<Interval> subtract(const std::vector<Interval>& base, const std::vector<Interval>& holes) {
  std::vector<Interval> out;
  for (auto [lo, hi] : base) {
    double cursor = lo;
    for (const auto& h : holes) {
      if (h.second <= cursor) continue;
      if (h.first >= hi) break;
      if (h.first > cursor) out.emplace_back(cursor, h.first);
      cursor = std::max(cursor, h.second);
      if (cursor >= hi) break;
    }
    if (cursor < hi) out.emplace_back(cursor, hi);
  }
  return out;
}

bool share_full_edge(const BoundingBox& a, const BoundingBox& b) noexcept {
  if (a.x_min == b.x_min && a.x_max == b.x_max) return a.y_max == b.y_min || b.y_max == a.y_min;
  if (a.y_min == b.y_min && a.y_max == b.y_max) return a.x_max == b.x_min || b.x_max == a.x_min;
  return false;
}

}  // namespace

void LayoutConstraints::validate() const {
  if (!(min_short_edge_m > 0.0) || !(min_long_edge_m > 0.0) || !(module_footprint_m2 > 0.0) ||
      !(module_width_m > 0.0) || !(module_height_m > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "layout constraints must be positive");
  }
  if (min_long_edge_m < min_short_edge_m) {
    throw Error(ErrorKind::InvalidArgument, "min_long_edge_m must be >= min_short_edge_m");
  }
  if (edge_margin_m < 0.0) throw Error(ErrorKind::InvalidArgument, "edge_margin_m must be >= 0");
}

std::string_view to_string(Provenance p) noexcept {
  switch (p) {
    case Provenance::Deterministic: return "deterministic";
    case Provenance::Llm: return "llm";
    case Provenance::LlmValidated: return "llm_validated";
  }
  return "deterministic";
}

std::vector<BoundingBox> partition_free_wall(const FacadeDescription& facade, double edge_margin_m) {
  if (!std::isfinite(edge_margin_m) || edge_margin_m < 0.0) {
    throw Error(ErrorKind::InvalidArgument, "edge margin must be finite and non-negative");
  }
  std::vector<BoundingBox> walls = facade.walls();
  if (edge_margin_m > 0.0) {
    const auto& s = facade.require_scale();
    const double mx = edge_margin_m / s.s_x();
    const double my = edge_margin_m / s.s_y;
    for (auto& w : walls) w = {w.x_min + mx, w.y_min + my, w.x_max - mx, w.y_max - my};
    std::erase_if(walls, [](const BoundingBox& w) { return !w.valid(); });
  }
  if (walls.empty()) return {};
  const auto obstructions = facade.obstructions();

  std::vector<double> ys;
  for (const auto& w : walls) {
    ys.push_back(w.y_min);
    ys.push_back(w.y_max);
  }
  double top = walls.front().y_min, bottom = walls.front().y_max;
  for (const auto& w : walls) {
    top = std::min(top, w.y_min);
    bottom = std::max(bottom, w.y_max);
  }
  for (const auto& o : obstructions) {
    if (o.y_min > top && o.y_min < bottom) ys.push_back(o.y_min);
    if (o.y_max > top && o.y_max < bottom) ys.push_back(o.y_max);
  }
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

  // Sweep top-down; a rectangle stays open while the next slab repeats its
  // exact x-interval.
  std::vector<BoundingBox> done;
  std::map<Interval, BoundingBox> open;
  for (std::size_t k = 0; k + 1 < ys.size(); ++k) {
    const double y0 = ys[k], y1 = ys[k + 1];
    std::vector<Interval> wall_iv, hole_iv;
    for (const auto& w : walls)
      if (w.y_min < y1 && w.y_max > y0) wall_iv.emplace_back(w.x_min, w.x_max);
    for (const auto& o : obstructions)
      if (o.y_min < y1 && o.y_max > y0 && o.x_min < o.x_max) hole_iv.emplace_back(o.x_min, o.x_max);
    const auto free = subtract(union_intervals(std::move(wall_iv)), union_intervals(std::move(hole_iv)));

    std::map<Interval, BoundingBox> next;
    for (const auto& iv : free) {
      auto it = open.find(iv);
      if (it != open.end() && it->second.y_max == y0) {
        BoundingBox r = it->second;
        r.y_max = y1;
        next.emplace(iv, r);
        open.erase(it);
      } else {
        next.emplace(iv, BoundingBox{iv.first, y0, iv.second, y1});
      }
    }
    for (auto& [iv, r] : open) done.push_back(r);
    open = std::move(next);
  }
  for (auto& [iv, r] : open) done.push_back(r);

  return merge_rectangles(done);
}

std::vector<BoundingBox> merge_rectangles(std::span<const BoundingBox> rects) {
  std::vector<BoundingBox> work(rects.begin(), rects.end());
  bool changed = true;
  while (changed) {
    changed = false;
    std::sort(work.begin(), work.end(), raster_less);
    for (std::size_t i = 0; i < work.size(); ++i) {
      for (std::size_t j = i + 1; j < work.size();) {
        if (share_full_edge(work[i], work[j])) {
          work[i] = hull(work[i], work[j]);
          work.erase(work.begin() + static_cast<std::ptrdiff_t>(j));
          changed = true;
          j = i + 1;  // the grown rectangle may now match earlier candidates
        } else {
          ++j;
        }
      }
    }
  }
  std::sort(work.begin(), work.end(), raster_less);
  return work;
}

MetricExtent metric_extent(const BoundingBox& r, const MetricScale& scale) noexcept {
  return {r.width() * scale.s_x(), r.height() * scale.s_y};
}

bool satisfies(const MetricExtent& e, const LayoutConstraints& c) noexcept {
  const double shorter = std::min(e.width_m, e.height_m);
  const double longer = std::max(e.width_m, e.height_m);
  return shorter + kMetricSlack >= c.min_short_edge_m && longer + kMetricSlack >= c.min_long_edge_m;
}

long packable_modules(const MetricExtent& e, const LayoutConstraints& c) noexcept {
  auto fit = [](double length, double module) {
    return static_cast<long>(std::floor(length / module + kMetricSlack));
  };
  const long upright = fit(e.width_m, c.module_width_m) * fit(e.height_m, c.module_height_m);
  const long rotated = fit(e.width_m, c.module_height_m) * fit(e.height_m, c.module_width_m);
  return std::max(upright, rotated);
}

double area_of(std::span<const BoundingBox> rects, const MetricScale& scale) noexcept {
  double px2 = 0.0;
  for (const auto& r : rects) px2 += r.area();
  return px2 * scale.s_x() * scale.s_y;
}

LayoutResult qualify(std::span<const BoundingBox> rects, const MetricScale& scale, const LayoutConstraints& c) {
  LayoutResult out;
  for (const auto& r : rects) {
    const auto e = metric_extent(r, scale);
    if (!satisfies(e, c)) continue;
    out.rectangles.push_back(r);
    out.module_count += packable_modules(e, c);
  }
  std::sort(out.rectangles.begin(), out.rectangles.end(), raster_less);
  out.total_area_m2 = area_of(out.rectangles, scale);
  out.modules_by_area = static_cast<long>(std::floor(out.total_area_m2 / c.module_footprint_m2 + kMetricSlack));
  return out;
}

LayoutResult deterministic_layout(const FacadeDescription& facade, const LayoutConstraints& c) {
  c.validate();
  const auto& scale = facade.require_scale();
  auto result = qualify(partition_free_wall(facade, c.edge_margin_m), scale, c);
  result.provenance = Provenance::Deterministic;
  return result;
}

nlohmann::json layout_to_json(std::span<const BoundingBox> rects) {
  auto arr = nlohmann::json::array();
  for (const auto& r : rects) arr.push_back(detail::box_to_json(r));
  return nlohmann::json{{"installable_rectangles", std::move(arr)}};
}

std::vector<BoundingBox> layout_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("installable_rectangles") || !doc.at("installable_rectangles").is_array()) {
    throw Error(ErrorKind::SchemaViolation, "expected an object with array 'installable_rectangles'");
  }
  std::vector<BoundingBox> out;
  std::size_t i = 0;
  for (const auto& entry : doc.at("installable_rectangles")) {
    out.push_back(detail::box_from_json(entry, "installable_rectangles[" + std::to_string(i++) + "]"));
  }
  return out;
}

}  // namespace facadepv
