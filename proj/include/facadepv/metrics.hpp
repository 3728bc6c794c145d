#pragma once

#include <map>
#include <span>
#include <vector>

#include <json.hpp>

#include "facadepv/facade.hpp"
#include "facadepv/geometry.hpp"
#include "facadepv/rectify.hpp"

namespace facadepv {

/// Area estimation error of a predicted region against the truth region.
struct AreaErrorReport {
  double s_truth = 0.0;           // m2
  double s_false_negative = 0.0;  // truth not covered by pred, m2
  double s_false_positive = 0.0;  // pred outside truth, m2
  double epsilon = 0.0;           // (s1 + s2) / s_truth
};

/// Throws ZeroTruthArea when the truth region is empty.
AreaErrorReport area_error(std::span<const BoundingBox> truth, std::span<const BoundingBox> pred,
                           const MetricScale& scale);

/// |A ∩ B| / |A ∪ B|. Throws EmptyUnion.
double jaccard(std::span<const BoundingBox> a, std::span<const BoundingBox> b);

/// Boundary F-measure on the 1 px raster. A pixel is inside when its centre
/// lies in the union; boundary pixels are inside pixels with an outside
/// 4-neighbour. Matches count within a disk of `tolerance_px`. Throws
/// EmptyInput when either set has no area.
double boundary_f(std::span<const BoundingBox> a, std::span<const BoundingBox> b, double tolerance_px = 2.0);

/// Mean of the per-class scores. Throws EmptyMap.
double miou(const std::map<ComponentClass, double>& per_class);

struct RegionScore {
  double jaccard = 0.0;
  double boundary_f = 0.0;
  double jf_mean = 0.0;
};
RegionScore region_score(std::span<const BoundingBox> a, std::span<const BoundingBox> b, double tolerance_px = 2.0);

/// Machine-readable comparison record.
struct MetricsRecord {
  double epsilon = 0.0;
  double s1_m2 = 0.0;
  double s2_m2 = 0.0;
  double jaccard = 0.0;
  double boundary_f = 0.0;
  double miou = 0.0;
  std::map<ComponentClass, double> per_class;  // empty for layout comparisons
};
nlohmann::json metrics_to_json(const MetricsRecord& r);

/// Two installable-rectangle layouts over one facade; miou is the single
/// class score.
MetricsRecord compare_layouts(std::span<const BoundingBox> truth, std::span<const BoundingBox> pred,
                              const MetricScale& scale, double tolerance_px = 2.0);

/// Two facade records of one building: per-class Jaccard over every class
/// present in either, area error and region scores on the free wall
/// (walls minus obstructions). The truth record supplies the scale.
MetricsRecord compare_facades(const FacadeDescription& truth, const FacadeDescription& pred,
                              double tolerance_px = 2.0);

/// Spread of per-building errors. Both a sample standard deviation and a 95%
/// confidence half-width of the mean (Student t) are reported, since a bare
/// "mean ± x" is ambiguous.
struct ErrorSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double std_dev = 0.0;           // sample (n - 1); 0 when n == 1
  double ci95_half_width = 0.0;   // 0 when n == 1
};
ErrorSummary summarize_errors(std::span<const double> values);
nlohmann::json summary_to_json(const ErrorSummary& s);

}  // namespace facadepv
