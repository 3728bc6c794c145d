#include "facadepv/rectify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "facadepv/error.hpp"

namespace facadepv {

namespace {

using Mat3 = Eigen::Matrix3d;

// Similarity moving the centroid to the origin with mean distance sqrt(2).
Mat3 normalizing_transform(std::span<const PixelPoint> pts) {
  double cx = 0.0, cy = 0.0;
  for (const auto& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(pts.size());
  cy /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
  mean_dist /= static_cast<double>(pts.size());
  if (!(mean_dist > 0.0)) {
    throw Error(ErrorKind::DegenerateConfiguration, "all points coincide");
  }
  const double s = std::sqrt(2.0) / mean_dist;
  Mat3 t;
  t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
  return t;
}

PixelPoint apply(const Mat3& h, PixelPoint p) {
  const double w = h(2, 0) * p.x + h(2, 1) * p.y + h(2, 2);
  return {(h(0, 0) * p.x + h(0, 1) * p.y + h(0, 2)) / w, (h(1, 0) * p.x + h(1, 1) * p.y + h(1, 2)) / w};
}

bool collinear(PixelPoint a, PixelPoint b, PixelPoint c) {
  const double abx = b.x - a.x, aby = b.y - a.y;
  const double acx = c.x - a.x, acy = c.y - a.y;
  const double cross = abx * acy - aby * acx;
  const double scale = std::hypot(abx, aby) * std::hypot(acx, acy);
  return !(scale > 0.0) || std::abs(cross) <= 1e-9 * scale;
}

bool has_collinear_triple(std::span<const PixelPoint> pts) {
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      for (std::size_t k = j + 1; k < pts.size(); ++k)
        if (collinear(pts[i], pts[j], pts[k])) return true;
  return false;
}

Mat3 normalize_h33(const Mat3& h) {
  if (std::abs(h(2, 2)) <= 1e-12 * h.norm()) {
    throw Error(ErrorKind::DegenerateConfiguration, "homography maps the origin to infinity");
  }
  Mat3 out = h / h(2, 2);
  if (!(std::abs(out.determinant()) > 1e-12) || !out.allFinite()) {
    throw Error(ErrorKind::DegenerateConfiguration, "singular homography");
  }
  return out;
}

// Least-squares DLT in Hartley-normalized coordinates. Returns the matrix in
// normalized coordinates together with the two conditioning transforms.
struct NormalizedFit {
  Mat3 hn;
  Mat3 t_src;
  Mat3 t_dst;
};

NormalizedFit dlt_normalized(std::span<const PixelPoint> src, std::span<const PixelPoint> dst) {
  const std::size_t n = src.size();
  NormalizedFit fit;
  fit.t_src = normalizing_transform(src);
  fit.t_dst = normalizing_transform(dst);

  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = apply(fit.t_src, src[i]);
    const auto q = apply(fit.t_dst, dst[i]);
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.row(r) << -p.x, -p.y, -1.0, 0.0, 0.0, 0.0, q.x * p.x, q.x * p.y, q.x;
    a.row(r + 1) << 0.0, 0.0, 0.0, -p.x, -p.y, -1.0, q.y * p.x, q.y * p.y, q.y;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // A second (near-)zero singular value means the null space is not unique.
  if (n > 4 && sv.size() >= 8 && sv(7) <= 1e-10 * sv(0)) {
    throw Error(ErrorKind::DegenerateConfiguration, "correspondences do not determine a unique homography");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  fit.hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return fit;
}

Mat3 denormalize(const NormalizedFit& fit, const Mat3& hn) {
  return normalize_h33(fit.t_dst.inverse() * hn * fit.t_src);
}

// Levenberg-Marquardt over the 8 free entries of the normalized matrix
// (entry (2,2) fixed to 1), minimizing the squared transfer error.
Mat3 refine_lm(const NormalizedFit& fit, std::span<const PixelPoint> src, std::span<const PixelPoint> dst) {
  const std::size_t n = src.size();
  std::vector<PixelPoint> p(n), q(n);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = apply(fit.t_src, src[i]);
    q[i] = apply(fit.t_dst, dst[i]);
  }
  if (std::abs(fit.hn(2, 2)) <= 1e-12 * fit.hn.norm()) return denormalize(fit, fit.hn);
  Mat3 h = fit.hn / fit.hn(2, 2);

  auto cost_of = [&](const Mat3& m) {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = apply(m, p[i]);
      c += (r.x - q[i].x) * (r.x - q[i].x) + (r.y - q[i].y) * (r.y - q[i].y);
    }
    return c;
  };

  double cost = cost_of(h);
  double lambda = 1e-3;
  for (int iter = 0; iter < 100 && cost > 0.0; ++iter) {
    Eigen::Matrix<double, 8, 8> jtj = Eigen::Matrix<double, 8, 8>::Zero();
    Eigen::Matrix<double, 8, 1> jtr = Eigen::Matrix<double, 8, 1>::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const double x = p[i].x, y = p[i].y;
      const double w = h(2, 0) * x + h(2, 1) * y + 1.0;
      const double u = (h(0, 0) * x + h(0, 1) * y + h(0, 2)) / w;
      const double v = (h(1, 0) * x + h(1, 1) * y + h(1, 2)) / w;
      Eigen::Matrix<double, 8, 1> ju, jv;
      ju << x / w, y / w, 1.0 / w, 0, 0, 0, -u * x / w, -u * y / w;
      jv << 0, 0, 0, x / w, y / w, 1.0 / w, -v * x / w, -v * y / w;
      const double ru = u - q[i].x, rv = v - q[i].y;
      jtj += ju * ju.transpose() + jv * jv.transpose();
      jtr += ju * ru + jv * rv;
    }
    bool improved = false;
    for (int tries = 0; tries < 10; ++tries) {
      Eigen::Matrix<double, 8, 8> aug = jtj;
      aug.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::Matrix<double, 8, 1> step = aug.ldlt().solve(-jtr);
      Mat3 cand = h;
      cand(0, 0) += step(0); cand(0, 1) += step(1); cand(0, 2) += step(2);
      cand(1, 0) += step(3); cand(1, 1) += step(4); cand(1, 2) += step(5);
      cand(2, 0) += step(6); cand(2, 1) += step(7);
      const double c = cost_of(cand);
      if (std::isfinite(c) && c < cost) {
        const double rel = (cost - c) / cost;
        h = cand;
        cost = c;
        lambda = std::max(lambda * 0.1, 1e-12);
        improved = true;
        if (rel < 1e-14) iter = 100;
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) break;
  }
  return denormalize(fit, h);
}

Mat3 fit_homography(std::span<const PixelPoint> src, std::span<const PixelPoint> dst, bool refine) {
  const auto fit = dlt_normalized(src, dst);
  const Mat3 dlt = denormalize(fit, fit.hn);
  if (!refine) return dlt;
  try {
    return refine_lm(fit, src, dst);
  } catch (const Error&) {
    return dlt;
  }
}

double rmse_over(const Mat3& h, std::span<const PixelPoint> src, std::span<const PixelPoint> dst,
                 std::span<const std::size_t> idx) {
  if (idx.empty()) return 0.0;
  double sum = 0.0;
  for (auto i : idx) {
    const double e = transfer_error(h, src[i], dst[i]);
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(idx.size()));
}

std::vector<std::size_t> consensus(const Mat3& h, std::span<const PixelPoint> src,
                                   std::span<const PixelPoint> dst, double threshold, double* score) {
  std::vector<std::size_t> in;
  double s = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double e = transfer_error(h, src[i], dst[i]);
    if (e <= threshold) {
      in.push_back(i);
      s += e * e;
    }
  }
  if (score) *score = s;
  return in;
}

template <typename T>
std::vector<T> gather(std::span<const T> v, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

// Least-squares refit on the consensus set with a threshold that widens then
// shrinks back; a minimal sample alone tends to miss clean points far from the
// sampled four, and a refit on a partial set extrapolates poorly to them.
void local_optimize(std::span<const PixelPoint> src, std::span<const PixelPoint> dst, double threshold,
                    std::vector<std::size_t>& inliers, double& score) {
  auto current = inliers;
  for (const double k : {3.0, 2.0, 1.5, 1.0}) {
    if (current.size() < 4) return;
    Mat3 h;
    try {
      h = fit_homography(gather(src, std::span<const std::size_t>(current)),
                         gather(dst, std::span<const std::size_t>(current)), false);
    } catch (const Error&) {
      return;
    }
    double s = 0.0;
    current = consensus(h, src, dst, threshold * k, &s);
    if (k == 1.0 && (current.size() > inliers.size() || (current.size() == inliers.size() && s < score))) {
      inliers = std::move(current);
      score = s;
      return;
    }
  }
}

Homography estimate_ransac(std::span<const PixelPoint> src, std::span<const PixelPoint> dst,
                           const HomographyOptions& opt) {
  const std::size_t n = src.size();
  std::mt19937_64 rng(opt.seed);
  std::vector<std::size_t> best;
  double best_score = std::numeric_limits<double>::infinity();

  long needed = opt.max_iterations;
  std::array<std::size_t, 4> sample{};
  std::array<PixelPoint, 4> s_src{}, s_dst{};
  for (long iter = 0; iter < needed && iter < opt.max_iterations; ++iter) {
    for (std::size_t k = 0; k < 4; ++k) {
      bool fresh = false;
      while (!fresh) {
        sample[k] = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        fresh = std::find(sample.begin(), sample.begin() + static_cast<long>(k), sample[k]) ==
                sample.begin() + static_cast<long>(k);
      }
      s_src[k] = src[sample[k]];
      s_dst[k] = dst[sample[k]];
    }
    if (has_collinear_triple(s_src) || has_collinear_triple(s_dst)) continue;

    Mat3 h;
    try {
      h = fit_homography(s_src, s_dst, false);
    } catch (const Error&) {
      continue;
    }
    double score = 0.0;
    auto in = consensus(h, src, dst, opt.ransac_threshold, &score);
    if (in.size() > best.size() || (in.size() == best.size() && score < best_score)) {
      local_optimize(src, dst, opt.ransac_threshold, in, score);
      best = std::move(in);
      best_score = score;
      const double w = static_cast<double>(best.size()) / static_cast<double>(n);
      const double p_fail = 1.0 - std::pow(w, 4);
      if (p_fail <= 0.0) {
        needed = iter + 1;
      } else {
        const double k = std::log(1.0 - opt.confidence) / std::log(p_fail);
        needed = std::min<long>(opt.max_iterations, static_cast<long>(std::ceil(k)));
      }
    }
  }
  if (best.size() < 4) {
    throw Error(ErrorKind::NoConsensus, "fewer than 4 inliers after " +
                                            std::to_string(opt.max_iterations) + " iterations");
  }

  Mat3 h;
  std::vector<std::size_t> inliers = best;
  for (int round = 0; round < 5; ++round) {
    const auto fs = gather(src, inliers);
    const auto fd = gather(dst, inliers);
    h = fit_homography(fs, fd, opt.refine);
    auto next = consensus(h, src, dst, opt.ransac_threshold, nullptr);
    if (next.size() < 4 || next == inliers) break;
    inliers = std::move(next);
  }
  inliers = consensus(h, src, dst, opt.ransac_threshold, nullptr);
  if (inliers.size() < 4) {
    throw Error(ErrorKind::NoConsensus, "refit lost consensus");
  }

  Homography out;
  out.matrix = h;
  out.source.assign(src.begin(), src.end());
  out.target.assign(dst.begin(), dst.end());
  out.reprojection_rmse = rmse_over(h, src, dst, inliers);
  out.inliers = std::move(inliers);
  return out;
}

}  // namespace

double transfer_error(const Eigen::Matrix3d& h, PixelPoint src, PixelPoint dst) {
  const auto p = apply(h, src);
  return std::hypot(p.x - dst.x, p.y - dst.y);
}

Homography estimate_homography(std::span<const PixelPoint> source, std::span<const PixelPoint> target,
                               const HomographyOptions& options) {
  if (source.size() != target.size()) {
    throw Error(ErrorKind::InsufficientCorrespondences, "source and target sizes differ");
  }
  if (source.size() < 4) {
    throw Error(ErrorKind::InsufficientCorrespondences,
                "need at least 4 correspondences, got " + std::to_string(source.size()));
  }
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (!std::isfinite(source[i].x) || !std::isfinite(source[i].y) || !std::isfinite(target[i].x) ||
        !std::isfinite(target[i].y)) {
      throw Error(ErrorKind::DegenerateConfiguration, "non-finite coordinate");
    }
  }
  if (source.size() == 4 && (has_collinear_triple(source) || has_collinear_triple(target))) {
    throw Error(ErrorKind::DegenerateConfiguration, "three of the four points are collinear");
  }

  if (options.method == EstimationMethod::RANSAC) return estimate_ransac(source, target, options);

  Homography out;
  out.matrix = fit_homography(source, target, options.refine);
  out.source.assign(source.begin(), source.end());
  out.target.assign(target.begin(), target.end());
  out.inliers.resize(source.size());
  std::iota(out.inliers.begin(), out.inliers.end(), std::size_t{0});
  out.reprojection_rmse = rmse_over(out.matrix, source, target, out.inliers);
  return out;
}

Homography rectify_from_window(std::span<const PixelPoint> window_corners, double square_side) {
  if (window_corners.size() != 4) {
    throw Error(ErrorKind::InsufficientCorrespondences, "window needs exactly 4 corners (TL, TR, BR, BL)");
  }
  if (!(square_side > 0.0)) throw Error(ErrorKind::NonPositiveInput, "square side must be positive");
  const std::array<PixelPoint, 4> square{
      {{0.0, 0.0}, {square_side, 0.0}, {square_side, square_side}, {0.0, square_side}}};
  HomographyOptions opt;
  opt.method = EstimationMethod::DLT;
  return estimate_homography(window_corners, square, opt);
}

PixelPoint warp_point(const Eigen::Matrix3d& h, PixelPoint p) {
  const double w = h(2, 0) * p.x + h(2, 1) * p.y + h(2, 2);
  if (std::abs(w) <= 1e-12) {
    throw Error(ErrorKind::PointAtInfinity, "point maps to infinity");
  }
  return {(h(0, 0) * p.x + h(0, 1) * p.y + h(0, 2)) / w, (h(1, 0) * p.x + h(1, 1) * p.y + h(1, 2)) / w};
}

std::vector<BoundingBox> warp_boxes(const Homography& h, std::span<const BoundingBox> boxes,
                                    const BoundingBox& canvas) {
  std::vector<BoundingBox> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) {
    const std::array<PixelPoint, 4> corners{
        {{b.x_min, b.y_min}, {b.x_max, b.y_min}, {b.x_max, b.y_max}, {b.x_min, b.y_max}}};
    BoundingBox bb{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                   -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& c : corners) {
      const auto q = warp_point(h, c);
      bb.x_min = std::min(bb.x_min, q.x);
      bb.y_min = std::min(bb.y_min, q.y);
      bb.x_max = std::max(bb.x_max, q.x);
      bb.y_max = std::max(bb.y_max, q.y);
    }
    const auto clipped = intersection(bb, canvas);
    if (clipped.valid()) out.push_back(clipped);
  }
  return out;
}

MetricScale compute_scale(double width_m, double width_px) {
  return compute_scale(width_m, width_px, width_m, width_px);
}

MetricScale compute_scale(double width_m, double width_px, double height_m, double height_px) {
  if (!(width_m > 0.0) || !(width_px > 0.0) || !(height_m > 0.0) || !(height_px > 0.0)) {
    throw Error(ErrorKind::NonPositiveInput, "metric and pixel dimensions must be positive");
  }
  MetricScale s;
  s.width_m = width_m;
  s.width_px = width_px;
  s.s = width_m / width_px;
  s.height_m = height_m;
  s.height_px = height_px;
  s.s_y = height_m / height_px;
  return s;
}

ScaleSensitivityReport scale_sensitivity(double width_error_fraction) {
  if (!(width_error_fraction > -1.0)) {
    throw Error(ErrorKind::InvalidArgument, "width error fraction must exceed -1");
  }
  ScaleSensitivityReport r;
  r.width_error_fraction = width_error_fraction;
  const double factor = 1.0 + width_error_fraction;
  r.area_error_fraction = factor * factor - 1.0;
  r.energy_error_fraction = r.area_error_fraction;
  return r;
}

}  // namespace facadepv
