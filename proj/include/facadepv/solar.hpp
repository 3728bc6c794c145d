#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "facadepv/facade.hpp"
#include "facadepv/layout.hpp"

namespace facadepv {

using Timestamp = std::chrono::sys_seconds;

/// Parses ISO-8601 UTC ("2023-06-21T12:00:00Z", "2023-06-21 12:00",
/// "...+00:00"). Throws MisalignedTimestamps on anything else.
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);
Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour = 0, int minute = 0, int second = 0);
/// Calendar fields of a UTC instant.
struct CivilTime {
  int year;
  unsigned month;  // 1..12
  unsigned day;
  int hour, minute, second;
  unsigned day_of_year;  // 1..366
};
CivilTime civil(Timestamp t);
bool is_leap_year(int year) noexcept;

struct SurfaceOrientation {
  double tilt_deg = 90.0;      // from horizontal
  double azimuth_deg = 180.0;  // surface normal, clockwise from north
  double albedo = 0.2;

  void validate() const;
};

struct SolarPosition {
  double zenith_deg = 90.0;  // refraction-corrected
  double azimuth_deg = 0.0;  // clockwise from north
  double apparent_elevation_deg = 0.0;
  Timestamp timestamp{};
};

/// NOAA solar-position equations (Meeus-based) with the NOAA atmospheric
/// refraction correction.
SolarPosition solar_position(double latitude_deg, double longitude_deg, Timestamp t);

struct IrradianceSample {
  double ghi = 0.0;  // W/m2
  double dni = 0.0;
  double dhi = 0.0;
  Timestamp timestamp{};
};

/// Extraterrestrial normal irradiance, Spencer (1971) eccentricity series.
double extraterrestrial_normal(unsigned day_of_year, double solar_constant = 1366.1) noexcept;
/// Kasten & Young (1989) relative air mass; NaN for zenith > 90.
double relative_airmass(double zenith_deg) noexcept;
/// Standard-atmosphere pressure (Pa) at an altitude.
double altitude_to_pressure(double altitude_m) noexcept;

/// Ineichen-Perez clear sky with Linke turbidity. Zero below the horizon.
IrradianceSample clear_sky(const SolarPosition& pos, double site_altitude_m, double linke_turbidity);

/// Angle of incidence between the sun vector and the surface normal (deg).
double aoi(const SolarPosition& pos, const SurfaceOrientation& surf);

struct PoaComponents {
  double e_dir = 0.0;
  double e_dif = 0.0;
  double e_ref = 0.0;
  double e_poa = 0.0;
  double aoi_deg = 0.0;
};

/// Isotropic-sky transposition: beam * cos(AOI), sky diffuse * (1+cos b)/2,
/// ground reflected * albedo * (1-cos b)/2.
PoaComponents transpose_poa(const IrradianceSample& irr, const SolarPosition& pos, const SurfaceOrientation& surf);

/// SAPM thermal model coefficients (open-rack glass/polymer by default).
struct ModuleThermalParams {
  double a = -3.56;
  double b = -0.075;      // s/m
  double delta_t = 3.0;   // K
  double e0 = 1000.0;     // W/m2
};

struct CellTemperature {
  double t_module;
  double t_cell;
};

CellTemperature cell_temperature(double e_poa, double t_ambient, double wind_speed, const ModuleThermalParams& p);

struct SingleDiodeParams {
  double i_l = 7.5;        // A
  double i_0 = 4.0e-11;    // A
  double r_s = 0.3;        // ohm
  double r_sh = 400.0;     // ohm
  double n = 1.0;
  double n_s = 60.0;
  double v_th = 0.025693;  // V at 25 C

  double modified_ideality() const noexcept { return n * n_s * v_th; }
};

/// Solves I = I_L - I_0 (exp((V + I R_s)/(n N_s V_th)) - 1) - (V + I R_s)/R_sh
/// for I by bracketed Newton. Throws NoConvergence after 100 iterations.
double diode_current(double v, const SingleDiodeParams& p);
/// Voltage at which the current vanishes.
double open_circuit_voltage(const SingleDiodeParams& p);

struct MaxPowerPoint {
  double v_mp;
  double i_mp;
  double p_mp;
};

/// Golden-section search for max V*I(V) on [0, V_oc].
MaxPowerPoint max_power_point(const SingleDiodeParams& p);

struct SystemConfig {
  double module_efficiency = 0.20;
  double inverter_efficiency = 0.97;
  double other_losses = 0.86;  // derate applied after the inverter
  double module_area_m2 = 1.2;
  double temperature_coefficient = -0.004;  // 1/K, referenced to 25 C
  ModuleThermalParams thermal;
  SingleDiodeParams diode;
  double linke_turbidity = 3.0;
  // Ambient conditions used with synthetic clear-sky years.
  double clear_sky_temp_air = 20.0;
  double clear_sky_wind_speed = 0.0;

  void validate() const;
};

struct WeatherRecord {
  Timestamp timestamp{};
  double ghi = 0.0;
  double dni = 0.0;
  double dhi = 0.0;
  double temp_air = 0.0;
  double wind_speed = 0.0;
};

/// Hourly weather, each record covering the hour that starts at its
/// timestamp. Missing values are NaN until conform_weather fills them.
struct WeatherSeries {
  std::vector<WeatherRecord> records;
};

/// Reads `timestamp,ghi,dni,dhi,temp_air,wind_speed` CSV with a header row.
/// Empty fields become NaN. Throws SchemaViolation on a malformed header or
/// row and MisalignedTimestamps on an unparsable timestamp.
WeatherSeries read_weather_csv(std::istream& in);
WeatherSeries load_weather_csv(const std::string& path);
void write_weather_csv(std::ostream& out, const WeatherSeries& series);

/// Places the records on the hourly grid of one calendar year (8760/8784
/// slots). Absent slots and records with missing fields count as gaps and
/// are filled with zero irradiance and the previous valid temperature/wind.
/// Throws MisalignedTimestamps (off-grid, duplicate or mixed-year stamps)
/// and WeatherGap (gaps above 1% of the year).
WeatherSeries conform_weather(const WeatherSeries& raw);

/// Synthetic clear-sky year at hour-start timestamps, irradiance evaluated
/// at mid-hour.
WeatherSeries clear_sky_year(double latitude, double longitude, double altitude_m, int year, const SystemConfig& sys);

enum class ElectricalMode { Efficiency, SingleDiode };

struct Site {
  double latitude = 0.0;
  double longitude = 0.0;
  double altitude_m = 0.0;
};

struct HourlyEnergy {
  Timestamp timestamp{};
  double poa = 0.0;     // W/m2
  double t_cell = 0.0;  // C
  double p_dc = 0.0;    // W
  double p_ac = 0.0;    // W
};

struct EnergyReport {
  std::vector<HourlyEnergy> hourly;
  std::array<double, 12> monthly_kwh{};
  std::array<double, 12> monthly_irradiation_kwh_m2{};
  double annual_kwh = 0.0;
  double annual_irradiation_kwh_m2 = 0.0;
};

/// Hourly simulation over one conformed year. Efficiency mode sizes the
/// array by `pv_area_m2`; single-diode mode by `module_count` modules.
EnergyReport simulate_year(const Site& site, double pv_area_m2, long module_count, const SurfaceOrientation& surf,
                           const WeatherSeries& weather, const SystemConfig& sys, ElectricalMode mode);

EnergyReport simulate_year(const FacadeDescription& facade, const LayoutResult& layout,
                           const SurfaceOrientation& surf, const WeatherSeries& weather, const SystemConfig& sys,
                           ElectricalMode mode);

}  // namespace facadepv
