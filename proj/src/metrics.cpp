#include "facadepv/metrics.hpp"

#include <cmath>
#include <cstdint>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

#include "facadepv/error.hpp"
#include "facadepv/layout.hpp"
#include "json_util.hpp"

namespace facadepv {

AreaErrorReport area_error(std::span<const BoundingBox> truth, std::span<const BoundingBox> pred,
                           const MetricScale& scale) {
  if (!(scale.area_per_px2() > 0.0)) throw Error(ErrorKind::NonPositiveInput, "scale must be positive");
  const auto ov = region_overlap(truth, pred);
  if (!(ov.area_a > 0.0)) throw Error(ErrorKind::ZeroTruthArea, "truth region has no area");
  const double k = scale.area_per_px2();
  AreaErrorReport r;
  r.s_truth = ov.area_a * k;
  r.s_false_negative = ov.a_minus_b * k;
  r.s_false_positive = ov.b_minus_a * k;
  r.epsilon = (ov.a_minus_b + ov.b_minus_a) / ov.area_a;
  return r;
}

double jaccard(std::span<const BoundingBox> a, std::span<const BoundingBox> b) {
  const auto ov = region_overlap(a, b);
  const double u = ov.union_area();
  if (!(u > 0.0)) throw Error(ErrorKind::EmptyUnion, "both regions are empty");
  return ov.intersection / u;
}

namespace {

struct Raster {
  long x0 = 0, y0 = 0;
  long w = 0, h = 0;
  std::vector<std::uint8_t> cells;

  std::uint8_t& at(long x, long y) { return cells[static_cast<std::size_t>(y * w + x)]; }
  std::uint8_t get(long x, long y) const {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0;
    return cells[static_cast<std::size_t>(y * w + x)];
  }
};

void fill(Raster& r, std::span<const BoundingBox> boxes) {
  for (const auto& b : boxes) {
    if (!b.valid()) continue;
    // pixel i covers [x0 + i, x0 + i + 1); inside iff its centre is in [min, max)
    const long i0 = static_cast<long>(std::ceil(b.x_min - static_cast<double>(r.x0) - 0.5));
    const long i1 = static_cast<long>(std::ceil(b.x_max - static_cast<double>(r.x0) - 0.5));
    const long j0 = static_cast<long>(std::ceil(b.y_min - static_cast<double>(r.y0) - 0.5));
    const long j1 = static_cast<long>(std::ceil(b.y_max - static_cast<double>(r.y0) - 0.5));
    for (long j = std::max(j0, 0L); j < std::min(j1, r.h); ++j) {
      for (long i = std::max(i0, 0L); i < std::min(i1, r.w); ++i) r.at(i, j) = 1;
    }
  }
}

std::vector<std::pair<long, long>> boundary_pixels(const Raster& r) {
  std::vector<std::pair<long, long>> out;
  for (long j = 0; j < r.h; ++j) {
    for (long i = 0; i < r.w; ++i) {
      if (!r.get(i, j)) continue;
      if (!r.get(i - 1, j) || !r.get(i + 1, j) || !r.get(i, j - 1) || !r.get(i, j + 1)) out.emplace_back(i, j);
    }
  }
  return out;
}

double matched_fraction(const std::vector<std::pair<long, long>>& from, const Raster& dilated_to) {
  std::size_t hit = 0;
  for (const auto& [i, j] : from) hit += dilated_to.get(i, j);
  return static_cast<double>(hit) / static_cast<double>(from.size());
}

}  // namespace

double boundary_f(std::span<const BoundingBox> a, std::span<const BoundingBox> b, double tolerance_px) {
  if (!(tolerance_px >= 0.0)) throw Error(ErrorKind::InvalidArgument, "tolerance must be >= 0");
  if (!(union_area(a) > 0.0) || !(union_area(b) > 0.0)) {
    throw Error(ErrorKind::EmptyInput, "boundary F needs two non-empty regions");
  }
  double x_lo = std::numeric_limits<double>::infinity(), y_lo = x_lo;
  double x_hi = -x_lo, y_hi = -x_lo;
  for (auto set : {a, b}) {
    for (const auto& r : set) {
      if (!r.valid()) continue;
      x_lo = std::min(x_lo, r.x_min);
      y_lo = std::min(y_lo, r.y_min);
      x_hi = std::max(x_hi, r.x_max);
      y_hi = std::max(y_hi, r.y_max);
    }
  }
  const long pad = static_cast<long>(std::ceil(tolerance_px)) + 2;
  Raster base;
  base.x0 = static_cast<long>(std::floor(x_lo)) - pad;
  base.y0 = static_cast<long>(std::floor(y_lo)) - pad;
  base.w = static_cast<long>(std::ceil(x_hi)) + pad - base.x0;
  base.h = static_cast<long>(std::ceil(y_hi)) + pad - base.y0;
  base.cells.assign(static_cast<std::size_t>(base.w * base.h), 0);

  Raster ra = base, rb = base;
  fill(ra, a);
  fill(rb, b);
  const auto ba = boundary_pixels(ra);
  const auto bb = boundary_pixels(rb);
  if (ba.empty() || bb.empty()) return ba.empty() && bb.empty() ? 1.0 : 0.0;

  std::vector<std::pair<long, long>> disk;
  const long rad = static_cast<long>(std::floor(tolerance_px));
  for (long dy = -rad; dy <= rad; ++dy) {
    for (long dx = -rad; dx <= rad; ++dx) {
      if (static_cast<double>(dx * dx + dy * dy) <= tolerance_px * tolerance_px) disk.emplace_back(dx, dy);
    }
  }
  auto dilate = [&](const std::vector<std::pair<long, long>>& pixels) {
    Raster d = base;
    for (const auto& [i, j] : pixels) {
      for (const auto& [dx, dy] : disk) {
        const long x = i + dx, y = j + dy;
        if (x >= 0 && y >= 0 && x < d.w && y < d.h) d.at(x, y) = 1;
      }
    }
    return d;
  };
  const double precision = matched_fraction(ba, dilate(bb));
  const double recall = matched_fraction(bb, dilate(ba));
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double miou(const std::map<ComponentClass, double>& per_class) {
  if (per_class.empty()) throw Error(ErrorKind::EmptyMap, "no classes to average");
  double sum = 0.0;
  for (const auto& [cls, v] : per_class) sum += v;
  return sum / static_cast<double>(per_class.size());
}

RegionScore region_score(std::span<const BoundingBox> a, std::span<const BoundingBox> b, double tolerance_px) {
  RegionScore s;
  s.jaccard = jaccard(a, b);
  s.boundary_f = boundary_f(a, b, tolerance_px);
  s.jf_mean = (s.jaccard + s.boundary_f) / 2.0;
  return s;
}

nlohmann::json metrics_to_json(const MetricsRecord& r) {
  nlohmann::json j;
  j["epsilon"] = r.epsilon;
  j["s1_m2"] = r.s1_m2;
  j["s2_m2"] = r.s2_m2;
  j["jaccard"] = r.jaccard;
  j["boundary_f"] = r.boundary_f;
  j["miou"] = r.miou;
  if (!r.per_class.empty()) {
    nlohmann::json pc = nlohmann::json::object();
    for (const auto& [cls, v] : r.per_class) pc[std::string(to_string(cls))] = v;
    j["per_class_jaccard"] = pc;
  }
  return j;
}

namespace {

MetricsRecord region_record(std::span<const BoundingBox> truth, std::span<const BoundingBox> pred,
                            const MetricScale& scale, double tolerance_px) {
  const auto err = area_error(truth, pred, scale);
  MetricsRecord r;
  r.epsilon = err.epsilon;
  r.s1_m2 = err.s_false_negative;
  r.s2_m2 = err.s_false_positive;
  if (union_area(pred) > 0.0) {
    const auto score = region_score(truth, pred, tolerance_px);
    r.jaccard = score.jaccard;
    r.boundary_f = score.boundary_f;
  }
  return r;
}

}  // namespace

MetricsRecord compare_layouts(std::span<const BoundingBox> truth, std::span<const BoundingBox> pred,
                              const MetricScale& scale, double tolerance_px) {
  auto r = region_record(truth, pred, scale, tolerance_px);
  r.miou = r.jaccard;
  return r;
}

MetricsRecord compare_facades(const FacadeDescription& truth, const FacadeDescription& pred, double tolerance_px) {
  const auto& scale = truth.require_scale();
  const auto free_truth = partition_free_wall(truth);
  const auto free_pred = partition_free_wall(pred);
  auto r = region_record(free_truth, free_pred, scale, tolerance_px);

  for (auto cls : {ComponentClass::Wall, ComponentClass::Window, ComponentClass::Door, ComponentClass::Balcony,
                   ComponentClass::Roof, ComponentClass::Other}) {
    const auto a = truth.boxes_of(cls);
    const auto b = pred.boxes_of(cls);
    if (a.empty() && b.empty()) continue;
    const auto ov = region_overlap(a, b);
    if (!(ov.union_area() > 0.0)) continue;
    r.per_class[cls] = ov.intersection / ov.union_area();
  }
  r.miou = r.per_class.empty() ? 0.0 : miou(r.per_class);
  return r;
}

ErrorSummary summarize_errors(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "no values to summarize");
  ErrorSummary s;
  s.n = values.size();
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std_dev = std::sqrt(ss / static_cast<double>(s.n - 1));
    const boost::math::students_t dist(static_cast<double>(s.n - 1));
    const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
    s.ci95_half_width = t * s.std_dev / std::sqrt(static_cast<double>(s.n));
  }
  return s;
}

nlohmann::json summary_to_json(const ErrorSummary& s) {
  return {{"n", s.n}, {"mean", s.mean}, {"std_dev", s.std_dev}, {"ci95_half_width", s.ci95_half_width}};
}

}  // namespace facadepv
