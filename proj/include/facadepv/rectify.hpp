#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "facadepv/geometry.hpp"

namespace facadepv {

/// Projective map q' ~ H q, normalized so that H(2,2) == 1.
struct Homography {
  Eigen::Matrix3d matrix = Eigen::Matrix3d::Identity();
  std::vector<PixelPoint> source;
  std::vector<PixelPoint> target;
  std::vector<std::size_t> inliers;
  double reprojection_rmse = 0.0;  // over inliers only
};

enum class EstimationMethod { DLT, RANSAC };

struct HomographyOptions {
  EstimationMethod method = EstimationMethod::DLT;
  double ransac_threshold = 2.0;  // px
  double confidence = 0.999;
  int max_iterations = 2000;
  std::uint64_t seed = 42;
  bool refine = true;  // Levenberg-Marquardt on the transfer error
};

/// Estimates the homography taking `source` onto `target`.
///
/// DLT fits all correspondences (Hartley-normalized), RANSAC draws minimal
/// 4-point samples and refits on the consensus set. With `refine` set the
/// fit is polished by minimizing the squared transfer error over the inliers.
///
/// Throws InsufficientCorrespondences (< 4 pairs or size mismatch),
/// DegenerateConfiguration (collinear source points) and NoConsensus
/// (RANSAC found fewer than 4 inliers).
Homography estimate_homography(std::span<const PixelPoint> source,
                               std::span<const PixelPoint> target,
                               const HomographyOptions& options = {});

/// Maps the corners of a reference window, ordered TL, TR, BR, BL, onto an
/// axis-aligned square of the given side.
Homography rectify_from_window(std::span<const PixelPoint> window_corners,
                               double square_side = 100.0);

PixelPoint warp_point(const Eigen::Matrix3d& h, PixelPoint p);
inline PixelPoint warp_point(const Homography& h, PixelPoint p) { return warp_point(h.matrix, p); }

/// Warps every box through `h` and returns the AABB of its four warped
/// corners clipped to `canvas`. Boxes that end up entirely outside the
/// canvas are dropped.
std::vector<BoundingBox> warp_boxes(const Homography& h, std::span<const BoundingBox> boxes,
                                    const BoundingBox& canvas);

double transfer_error(const Eigen::Matrix3d& h, PixelPoint src, PixelPoint dst);

/// Pixel-to-metre scale. s == s_x is used for width-based quantities; areas
/// use s_x * s_y.
struct MetricScale {
  double width_m = 0.0;
  double width_px = 0.0;
  double s = 0.0;  // m/px along x
  double height_m = 0.0;
  double height_px = 0.0;
  double s_y = 0.0;  // m/px along y

  double s_x() const noexcept { return s; }
  double area_per_px2() const noexcept { return s * s_y; }
};

/// Isotropic scale from a width measurement (s_y == s).
MetricScale compute_scale(double width_m, double width_px);
/// Anisotropic scale from both facade dimensions.
MetricScale compute_scale(double width_m, double width_px, double height_m, double height_px);

struct ScaleSensitivityReport {
  double width_error_fraction = 0.0;
  double area_error_fraction = 0.0;
  double energy_error_fraction = 0.0;
};

/// Propagates a relative width error into area and energy: both scale with
/// the square of the linear scale factor.
ScaleSensitivityReport scale_sensitivity(double width_error_fraction);

}  // namespace facadepv
