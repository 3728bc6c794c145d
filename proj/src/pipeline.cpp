#include "facadepv/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <thread>
#include <variant>

#include <fmt/format.h>

#include "facadepv/rectify.hpp"

namespace facadepv {

namespace fs = std::filesystem;
using nlohmann::json;

void RunConfig::validate() const {
  if (jobs < 1) throw Error(ErrorKind::InvalidArgument, "jobs must be >= 1");
  if (out_dir.empty()) throw Error(ErrorKind::InvalidArgument, "an output directory is required");
  if (!facades_dir.empty() && !fs::is_directory(facades_dir)) {
    throw Error(ErrorKind::IoError, "facade directory not found: " + facades_dir);
  }
  if (sky == SkyMode::Tmy && !fs::is_directory(weather_dir)) {
    throw Error(ErrorKind::IoError, "weather directory not found: " + weather_dir);
  }
  if (layout_mode == LayoutMode::Llm) {
    if (!llm_mock_script.empty() && !fs::is_regular_file(llm_mock_script)) {
      throw Error(ErrorKind::IoError, "mock script not found: " + llm_mock_script);
    }
    llm.validate();
  }
  if (!(facade_tilt_deg >= 0.0 && facade_tilt_deg <= 180.0)) {
    throw Error(ErrorKind::InvalidArgument, "facade tilt must be in [0, 180]");
  }
  if (!(albedo >= 0.0 && albedo <= 1.0)) throw Error(ErrorKind::InvalidArgument, "albedo must be in [0, 1]");
  constraints.validate();
  system.validate();
}

FacadeDescription rectify_facade(const FacadeDescription& facade) {
  if (!facade.rectification) return facade;
  const auto h = rectify_from_window(facade.rectification->window_corners, facade.rectification->square_side);

  const auto c = facade.canvas();
  // every canvas corner must sit on the same side of the vanishing line as the window
  const auto& m = h.matrix;
  const auto side = [&](PixelPoint p) { return m(2, 0) * p.x + m(2, 1) * p.y + m(2, 2); };
  const double ref = side(facade.rectification->window_corners.front());
  for (const PixelPoint p : {PixelPoint{c.x_min, c.y_min}, PixelPoint{c.x_max, c.y_min}, PixelPoint{c.x_max, c.y_max},
                             PixelPoint{c.x_min, c.y_max}}) {
    if (!(side(p) * ref > 0.0)) {
      throw Error(ErrorKind::DegenerateConfiguration, "vanishing line of the rectification crosses the canvas");
    }
  }
  double x_lo = 1e300, y_lo = 1e300, x_hi = -1e300, y_hi = -1e300;
  for (const PixelPoint p : {PixelPoint{c.x_min, c.y_min}, PixelPoint{c.x_max, c.y_min}, PixelPoint{c.x_max, c.y_max},
                             PixelPoint{c.x_min, c.y_max}}) {
    const auto q = warp_point(h, p);
    x_lo = std::min(x_lo, q.x);
    y_lo = std::min(y_lo, q.y);
    x_hi = std::max(x_hi, q.x);
    y_hi = std::max(y_hi, q.y);
  }
  const BoundingBox hull{x_lo, y_lo, x_hi, y_hi};
  if (!hull.valid()) throw Error(ErrorKind::DegenerateConfiguration, "rectified canvas has no area");

  FacadeDescription out = facade;
  out.rectification.reset();
  out.width_px = hull.width();
  out.height_px = hull.height();
  out.components.clear();
  for (const auto& comp : facade.components) {
    const BoundingBox one[] = {comp.box};
    for (auto b : warp_boxes(h, one, hull)) {
      b = {b.x_min - x_lo, b.y_min - y_lo, b.x_max - x_lo, b.y_max - y_lo};
      out.components.push_back({comp.cls, b});
    }
  }
  // re-validate: clipping rules and the scale follow the new canvas
  auto warnings = facade.warnings;
  auto parsed = parse_facade(facade_to_json(out));
  warnings.push_back(fmt::format("rectified to {}x{} px", parsed.width_px, parsed.height_px));
  warnings.insert(warnings.end(), parsed.warnings.begin(), parsed.warnings.end());
  parsed.warnings = std::move(warnings);
  return parsed;
}

std::optional<std::string> find_weather_file(const std::string& weather_dir, const FacadeDescription& facade) {
  if (weather_dir.empty()) return std::nullopt;
  for (const auto& stem : {facade.building_id, facade.location}) {
    if (stem.empty()) continue;
    const auto p = fs::path(weather_dir) / (stem + ".csv");
    if (fs::is_regular_file(p)) return p.string();
  }
  return std::nullopt;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

BuildingReportRow run_building(const FacadeDescription& input, const RunConfig& config, ChatTransport* transport) {
  BuildingReportRow row;
  row.building_id = input.building_id;
  row.location = input.location;
  row.building_type = input.building_type;
  try {
    const auto facade =
        config.apply_rectification && input.rectification ? rectify_facade(input) : input;
    const auto& scale = facade.require_scale();

    auto t0 = std::chrono::steady_clock::now();
    LayoutResult layout;
    if (config.layout_mode == LayoutMode::Llm) {
      if (!transport) throw Error(ErrorKind::InvalidArgument, "LLM mode needs a transport");
      auto outcome = reason_layout(facade, config.constraints, config.llm, *transport);
      layout = std::move(*outcome.layout);
      row.attempts_used = outcome.attempts_used;
    } else {
      layout = deterministic_layout(facade, config.constraints);
    }
    row.timings.layout_s = seconds_since(t0);
    row.rectangles = layout.rectangles;
    row.estimated_area_m2 = layout.total_area_m2;
    row.module_count = layout.module_count;
    row.modules_by_area = layout.modules_by_area;
    row.provenance = layout.provenance;
    row.wall_area_m2 = union_area(facade.walls()) * scale.area_per_px2();
    row.wall_area_corrected_m2 = correct_area(row.wall_area_m2, default_bias_models().at(ComponentClass::Wall));

    t0 = std::chrono::steady_clock::now();
    const Site site{facade.latitude, facade.longitude, facade.altitude_m};
    const SurfaceOrientation surf{config.facade_tilt_deg, facade.azimuth_deg, config.albedo};
    auto simulate = [&](const WeatherSeries& w) {
      return simulate_year(site, layout.total_area_m2, layout.modules_by_area, surf, w, config.system,
                           config.electrical);
    };

    const auto clear_weather =
        clear_sky_year(site.latitude, site.longitude, site.altitude_m, config.clear_sky_year, config.system);
    const auto clear = simulate(clear_weather);
    row.clear_sky_kwh = clear.annual_kwh;

    std::optional<WeatherSeries> tmy_weather;
    std::optional<EnergyReport> tmy;
    if (const auto path = find_weather_file(config.weather_dir, facade)) {
      tmy_weather = load_weather_csv(*path);
      tmy = simulate(*tmy_weather);
      row.tmy_kwh = tmy->annual_kwh;
    } else if (config.sky == SkyMode::Tmy) {
      throw Error(ErrorKind::WeatherGap, "no weather file for '" + facade.building_id + "' in " + config.weather_dir);
    }

    const auto& primary = config.sky == SkyMode::Tmy ? *tmy : clear;
    row.monthly_kwh = primary.monthly_kwh;
    row.annual_yield_kwh = primary.annual_kwh;
    row.annual_irradiation_kwh_m2 = primary.annual_irradiation_kwh_m2;

    if (config.rooftop) {
      const auto cmp =
          compare_facade_rooftop(row, facade, config.sky == SkyMode::Tmy ? *tmy_weather : clear_weather, config);
      row.rooftop_kwh = cmp.rooftop_kwh;
      row.facade_rooftop_ratio = cmp.ratio;
    }
    row.timings.energy_s = seconds_since(t0);
  } catch (const Error& e) {
    row.error = e.kind();
    row.error_message = e.what();
  } catch (const std::exception& e) {
    row.error = ErrorKind::IoError;
    row.error_message = e.what();
  }
  return row;
}

RooftopComparison compare_facade_rooftop(const BuildingReportRow& row, const FacadeDescription& facade,
                                         const WeatherSeries& weather, const RunConfig& config) {
  const Site site{facade.latitude, facade.longitude, facade.altitude_m};
  const SurfaceOrientation flat{0.0, facade.azimuth_deg, config.albedo};
  const auto roof = simulate_year(site, row.estimated_area_m2, row.modules_by_area, flat, weather, config.system,
                                  config.electrical);
  RooftopComparison out;
  out.facade_kwh = row.annual_yield_kwh;
  out.rooftop_kwh = roof.annual_kwh;
  out.ratio = out.facade_kwh > 0.0 && out.rooftop_kwh > 0.0 ? out.facade_kwh / out.rooftop_kwh : 0.0;
  return out;
}

std::size_t BatchReport::failures() const noexcept {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return !r.ok(); }));
}

namespace {

void accumulate(GroupTotals& g, const BuildingReportRow& r) {
  ++g.buildings;
  if (!r.ok()) {
    ++g.failed;
    return;
  }
  g.total_area_m2 += r.estimated_area_m2;
  g.clear_sky_kwh += r.clear_sky_kwh;
  if (r.tmy_kwh) {
    g.tmy_kwh += *r.tmy_kwh;
    ++g.tmy_buildings;
  }
  if (r.rooftop_kwh) {
    g.rooftop_kwh += *r.rooftop_kwh;
    ++g.rooftop_buildings;
  }
}

std::vector<GroupTotals> group_by(const std::vector<BuildingReportRow>& rows,
                                  std::string BuildingReportRow::*field) {
  std::map<std::string, GroupTotals> groups;
  for (const auto& r : rows) {
    const std::string key = (r.*field).empty() ? "unspecified" : r.*field;
    auto& g = groups[key];
    g.key = key;
    accumulate(g, r);
  }
  std::vector<GroupTotals> out;
  for (auto& [k, g] : groups) out.push_back(std::move(g));
  return out;
}

}  // namespace

BatchReport aggregate(std::vector<BuildingReportRow> rows) {
  if (rows.empty()) throw Error(ErrorKind::EmptyBatch, "no buildings in batch");
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.building_id < b.building_id; });
  BatchReport report;
  report.overall.key = "all";
  for (const auto& r : rows) accumulate(report.overall, r);
  report.by_building_type = group_by(rows, &BuildingReportRow::building_type);
  report.by_location = group_by(rows, &BuildingReportRow::location);
  report.rows = std::move(rows);
  return report;
}

namespace {

std::unique_ptr<ChatTransport> make_transport(const RunConfig& config) {
  if (!config.llm_mock_script.empty()) {
    return std::make_unique<MockTransport>(MockTransport::load_script(config.llm_mock_script));
  }
  return std::make_unique<HttpChatTransport>(config.llm);
}

using Job = std::variant<FacadeDescription, BuildingReportRow>;

std::vector<BuildingReportRow> run_jobs(const std::vector<Job>& jobs, const RunConfig& config,
                                        ChatTransport* transport) {
  std::vector<BuildingReportRow> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      if (const auto* f = std::get_if<FacadeDescription>(&jobs[i])) {
        rows[i] = run_building(*f, config, transport);
      } else {
        rows[i] = std::get<BuildingReportRow>(jobs[i]);
      }
    }
  };
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(config.jobs), jobs.size());
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();
  return rows;
}

BatchReport run_with_transport(const std::vector<Job>& jobs, const RunConfig& config, ChatTransport* transport) {
  if (jobs.empty()) throw Error(ErrorKind::EmptyBatch, "no buildings in batch");
  std::unique_ptr<ChatTransport> owned;
  std::optional<ThrottledTransport> throttled;
  if (config.layout_mode == LayoutMode::Llm) {
    if (!transport) {
      owned = make_transport(config);
      transport = owned.get();
    }
    throttled.emplace(*transport, config.llm.max_in_flight);
    transport = &*throttled;
  }
  return aggregate(run_jobs(jobs, config, transport));
}

}  // namespace

BatchReport run_batch(const std::vector<FacadeDescription>& facades, const RunConfig& config,
                      ChatTransport* transport) {
  std::vector<Job> jobs(facades.begin(), facades.end());
  return run_with_transport(jobs, config, transport);
}

BatchReport run_batch(const RunConfig& config) {
  config.validate();
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(config.facades_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorKind::EmptyBatch, "no facade records in " + config.facades_dir);

  std::vector<Job> jobs;
  for (const auto& p : files) {
    try {
      jobs.emplace_back(load_facade(p.string()));
    } catch (const Error& e) {
      BuildingReportRow row;
      row.building_id = p.stem().string();
      row.error = e.kind();
      row.error_message = e.what();
      jobs.emplace_back(std::move(row));
    }
  }
  return run_with_transport(jobs, config, nullptr);
}

namespace {

std::string num(double v) { return fmt::format("{}", v); }
std::string opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

json group_json(const GroupTotals& g) {
  json j{{"key", g.key},
         {"buildings", g.buildings},
         {"failed", g.failed},
         {"total_area_m2", g.total_area_m2},
         {"clear_sky_kwh", g.clear_sky_kwh},
         {"tmy_kwh", g.tmy_buildings > 0 ? json(g.tmy_kwh) : json(nullptr)},
         {"tmy_buildings", g.tmy_buildings}};
  if (g.rooftop_buildings > 0) j["rooftop_kwh"] = g.rooftop_kwh;
  return j;
}

}  // namespace

std::string buildings_csv(const BatchReport& report) {
  std::string out =
      "building_id,location,building_type,status,error,estimated_area_m2,module_count,modules_by_area,"
      "wall_area_m2,wall_area_corrected_m2,annual_irradiation_kwh_m2,annual_yield_kwh";
  for (int m = 1; m <= 12; ++m) out += fmt::format(",m{:02d}", m);
  out += ",clear_sky_kwh,tmy_kwh,rooftop_kwh,facade_rooftop_ratio,provenance,attempts_used\n";
  for (const auto& r : report.rows) {
    out += fmt::format("{},{},{},{},{}", csv_field(r.building_id), csv_field(r.location), csv_field(r.building_type),
                       r.ok() ? "ok" : std::string(to_string(*r.error)), csv_field(r.error_message));
    out += fmt::format(",{},{},{},{},{},{},{}", num(r.estimated_area_m2), r.module_count, r.modules_by_area,
                       num(r.wall_area_m2), num(r.wall_area_corrected_m2), num(r.annual_irradiation_kwh_m2),
                       num(r.annual_yield_kwh));
    for (double m : r.monthly_kwh) out += "," + num(m);
    out += fmt::format(",{},{},{},{},{},{}\n", num(r.clear_sky_kwh), opt(r.tmy_kwh), opt(r.rooftop_kwh),
                       opt(r.facade_rooftop_ratio), to_string(r.provenance), r.attempts_used);
  }
  return out;
}

std::string monthly_long_csv(const BatchReport& report) {
  std::string out = "building,month,kwh\n";
  for (const auto& r : report.rows) {
    if (!r.ok()) continue;
    for (std::size_t m = 0; m < 12; ++m) {
      out += fmt::format("{},{},{}\n", csv_field(r.building_id), m + 1, num(r.monthly_kwh[m]));
    }
  }
  return out;
}

json aggregate_json(const BatchReport& report, const RunConfig& config) {
  json j;
  j["settings"] = {
      {"layout_mode", config.layout_mode == LayoutMode::Llm ? "llm" : "deterministic"},
      {"sky", config.sky == SkyMode::Tmy ? "tmy" : "clearsky"},
      {"electrical", config.electrical == ElectricalMode::SingleDiode ? "single_diode" : "efficiency"},
      {"seed", config.seed},
      {"clear_sky_year", config.clear_sky_year},
      {"facade_tilt_deg", config.facade_tilt_deg},
      {"albedo", config.albedo},
      {"min_short_edge_m", config.constraints.min_short_edge_m},
      {"min_long_edge_m", config.constraints.min_long_edge_m},
      {"module_footprint_m2", config.constraints.module_footprint_m2},
      {"module_efficiency", config.system.module_efficiency},
      {"inverter_efficiency", config.system.inverter_efficiency},
      {"other_losses", config.system.other_losses},
      {"temperature_coefficient", config.system.temperature_coefficient},
      {"linke_turbidity", config.system.linke_turbidity},
  };
  if (config.rooftop) {
    j["settings"]["rooftop_assumption"] = "horizontal surface (tilt 0) of the facade's installable area";
  }
  j["overall"] = group_json(report.overall);
  j["by_building_type"] = json::array();
  for (const auto& g : report.by_building_type) j["by_building_type"].push_back(group_json(g));
  j["by_location"] = json::array();
  for (const auto& g : report.by_location) j["by_location"].push_back(group_json(g));
  j["failures"] = json::array();
  for (const auto& r : report.rows) {
    if (!r.ok()) j["failures"].push_back({{"building_id", r.building_id}, {"error", to_string(*r.error)}});
  }
  return j;
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

}  // namespace

void write_reports(const BatchReport& report, const RunConfig& config) {
  const fs::path out(config.out_dir);
  fs::create_directories(out / "layouts");
  write_file(out / "buildings.csv", buildings_csv(report));
  write_file(out / "monthly_long.csv", monthly_long_csv(report));
  write_file(out / "aggregate.json", aggregate_json(report, config).dump(2) + "\n");

  std::string timings = "building_id,segmentation_s,layout_s,energy_s\n";
  for (const auto& r : report.rows) {
    timings += fmt::format("{},{},{},{}\n", csv_field(r.building_id), opt(r.timings.segmentation_s),
                           num(r.timings.layout_s), num(r.timings.energy_s));
    if (!r.ok()) continue;
    json layout = layout_to_json(r.rectangles);
    layout["building_id"] = r.building_id;
    layout["provenance"] = to_string(r.provenance);
    layout["attempts_used"] = r.attempts_used;
    layout["total_area_m2"] = r.estimated_area_m2;
    layout["module_count"] = r.module_count;
    layout["modules_by_area"] = r.modules_by_area;
    write_file(out / "layouts" / (r.building_id + ".json"), layout.dump(2) + "\n");
  }
  write_file(out / "timings.csv", timings);
}

}  // namespace facadepv
