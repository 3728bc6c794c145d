#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace facadepv {

enum class ErrorKind {
  // geometry
  DegenerateConfiguration,
  InsufficientCorrespondences,
  NoConsensus,
  PointAtInfinity,
  NonPositiveInput,
  // facade model
  SchemaViolation,
  GeometryViolation,
  ScaleMismatch,
  EmptyCalibrationSet,
  ZeroTruthArea,
  BiasAtUnity,
  // llm
  MissingScale,
  MalformedResponse,
  TransportError,
  // solar
  NoConvergence,
  WeatherGap,
  MisalignedTimestamps,
  // metrics
  EmptyUnion,
  EmptyInput,
  EmptyMap,
  // pipeline
  EmptyBatch,
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace facadepv
