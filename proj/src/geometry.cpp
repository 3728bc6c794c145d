#include "facadepv/geometry.hpp"

#include <cstdint>

#include "facadepv/error.hpp"

namespace facadepv {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::InsufficientCorrespondences: return "InsufficientCorrespondences";
    case ErrorKind::NoConsensus: return "NoConsensus";
    case ErrorKind::PointAtInfinity: return "PointAtInfinity";
    case ErrorKind::NonPositiveInput: return "NonPositiveInput";
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::GeometryViolation: return "GeometryViolation";
    case ErrorKind::ScaleMismatch: return "ScaleMismatch";
    case ErrorKind::EmptyCalibrationSet: return "EmptyCalibrationSet";
    case ErrorKind::ZeroTruthArea: return "ZeroTruthArea";
    case ErrorKind::BiasAtUnity: return "BiasAtUnity";
    case ErrorKind::MissingScale: return "MissingScale";
    case ErrorKind::MalformedResponse: return "MalformedResponse";
    case ErrorKind::TransportError: return "TransportError";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::WeatherGap: return "WeatherGap";
    case ErrorKind::MisalignedTimestamps: return "MisalignedTimestamps";
    case ErrorKind::EmptyUnion: return "EmptyUnion";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::EmptyMap: return "EmptyMap";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

namespace {

std::vector<double> edges(std::span<const BoundingBox> a, std::span<const BoundingBox> b, bool x_axis) {
  std::vector<double> out;
  out.reserve(2 * (a.size() + b.size()));
  for (auto set : {a, b}) {
    for (const auto& r : set) {
      if (!r.valid()) continue;
      out.push_back(x_axis ? r.x_min : r.y_min);
      out.push_back(x_axis ? r.x_max : r.y_max);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t index_of(const std::vector<double>& v, double value) {
  return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), value) - v.begin());
}

}  // namespace

RegionOverlap region_overlap(std::span<const BoundingBox> a, std::span<const BoundingBox> b) {
  RegionOverlap out;
  const auto xs = edges(a, b, true);
  const auto ys = edges(a, b, false);
  if (xs.size() < 2 || ys.size() < 2) return out;

  const std::size_t nx = xs.size() - 1;
  const std::size_t ny = ys.size() - 1;
  // bit 0: covered by A, bit 1: covered by B
  std::vector<std::uint8_t> cells(nx * ny, 0);
  auto paint = [&](std::span<const BoundingBox> set, std::uint8_t bit) {
    for (const auto& r : set) {
      if (!r.valid()) continue;
      const auto i0 = index_of(xs, r.x_min), i1 = index_of(xs, r.x_max);
      const auto j0 = index_of(ys, r.y_min), j1 = index_of(ys, r.y_max);
      for (auto j = j0; j < j1; ++j)
        for (auto i = i0; i < i1; ++i) cells[j * nx + i] |= bit;
    }
  };
  paint(a, 1);
  paint(b, 2);

  for (std::size_t j = 0; j < ny; ++j) {
    const double h = ys[j + 1] - ys[j];
    for (std::size_t i = 0; i < nx; ++i) {
      const auto c = cells[j * nx + i];
      if (c == 0) continue;
      const double area = (xs[i + 1] - xs[i]) * h;
      if (c & 1) out.area_a += area;
      if (c & 2) out.area_b += area;
      if (c == 3) out.intersection += area;
      else if (c == 1) out.a_minus_b += area;
      else out.b_minus_a += area;
    }
  }
  return out;
}

double union_area(std::span<const BoundingBox> boxes) {
  return region_overlap(boxes, {}).area_a;
}

}  // namespace facadepv
