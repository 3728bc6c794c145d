#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "facadepv/error.hpp"
#include "facadepv/facade.hpp"
#include "facadepv/layout.hpp"
#include "facadepv/llm.hpp"
#include "facadepv/solar.hpp"

namespace facadepv {

enum class LayoutMode { Deterministic, Llm };
enum class SkyMode { ClearSky, Tmy };

struct RunConfig {
  std::string facades_dir;
  std::string weather_dir;  // <id>.csv, else <location>.csv
  std::string out_dir;
  LayoutMode layout_mode = LayoutMode::Deterministic;
  SkyMode sky = SkyMode::ClearSky;
  ElectricalMode electrical = ElectricalMode::Efficiency;
  LayoutConstraints constraints;
  SystemConfig system;
  LlmConfig llm;
  std::string llm_mock_script;  // scripted responses instead of HTTP when set
  int jobs = 1;
  std::uint64_t seed = 42;
  int clear_sky_year = 2023;
  double facade_tilt_deg = 90.0;
  double albedo = 0.2;
  bool apply_rectification = true;
  bool rooftop = false;  // also simulate a horizontal surface of equal area

  /// Throws InvalidArgument / IoError.
  void validate() const;
};

struct StageTimings {
  std::optional<double> segmentation_s;  // only when an adapter ran in-process
  double layout_s = 0.0;
  double energy_s = 0.0;
};

struct BuildingReportRow {
  std::string building_id;
  std::string location;
  std::string building_type;
  std::optional<ErrorKind> error;
  std::string error_message;

  double estimated_area_m2 = 0.0;
  long module_count = 0;
  long modules_by_area = 0;
  double wall_area_m2 = 0.0;
  double wall_area_corrected_m2 = 0.0;
  double annual_irradiation_kwh_m2 = 0.0;
  double annual_yield_kwh = 0.0;  // sum of monthly_kwh, selected sky
  std::array<double, 12> monthly_kwh{};
  double clear_sky_kwh = 0.0;
  std::optional<double> tmy_kwh;
  std::optional<double> rooftop_kwh;
  std::optional<double> facade_rooftop_ratio;
  Provenance provenance = Provenance::Deterministic;
  int attempts_used = 0;
  std::vector<BoundingBox> rectangles;
  StageTimings timings;

  bool ok() const noexcept { return !error.has_value(); }
};

/// Applies the record's keystone hint: every box goes through the window
/// homography and the canvas becomes the warped canvas hull moved to the
/// origin, so the metric block yields the rectified scale.
FacadeDescription rectify_facade(const FacadeDescription& facade);

/// Weather file for a building, or nullopt.
std::optional<std::string> find_weather_file(const std::string& weather_dir, const FacadeDescription& facade);

/// rectify -> layout -> simulate. Stage errors land in the row rather than
/// propagating. `transport` is required in LLM mode.
BuildingReportRow run_building(const FacadeDescription& facade, const RunConfig& config,
                               ChatTransport* transport = nullptr);

struct RooftopComparison {
  double facade_kwh = 0.0;
  double rooftop_kwh = 0.0;
  double ratio = 0.0;  // facade / rooftop, 0 when either is 0
};

/// Re-simulates the row's area as a horizontal surface at the same site.
RooftopComparison compare_facade_rooftop(const BuildingReportRow& row, const FacadeDescription& facade,
                                         const WeatherSeries& weather, const RunConfig& config);

struct GroupTotals {
  std::string key;
  std::size_t buildings = 0;
  std::size_t failed = 0;
  double total_area_m2 = 0.0;
  double clear_sky_kwh = 0.0;
  double tmy_kwh = 0.0;
  std::size_t tmy_buildings = 0;  // rows contributing to tmy_kwh
  double rooftop_kwh = 0.0;
  std::size_t rooftop_buildings = 0;
};

struct BatchReport {
  std::vector<BuildingReportRow> rows;  // sorted by building_id
  GroupTotals overall;
  std::vector<GroupTotals> by_building_type;
  std::vector<GroupTotals> by_location;

  std::size_t failures() const noexcept;
};

BatchReport aggregate(std::vector<BuildingReportRow> rows);

/// Loads every *.json under facades_dir, runs the buildings on `jobs`
/// workers and aggregates. Throws EmptyBatch when no records are found.
BatchReport run_batch(const RunConfig& config);
BatchReport run_batch(const std::vector<FacadeDescription>& facades, const RunConfig& config,
                      ChatTransport* transport = nullptr);

/// buildings.csv, monthly_long.csv, aggregate.json, layouts/<id>.json and
/// timings.csv. Everything but timings.csv depends only on the inputs.
void write_reports(const BatchReport& report, const RunConfig& config);

std::string buildings_csv(const BatchReport& report);
std::string monthly_long_csv(const BatchReport& report);
nlohmann::json aggregate_json(const BatchReport& report, const RunConfig& config);

}  // namespace facadepv
