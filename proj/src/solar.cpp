#include "facadepv/solar.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "facadepv/error.hpp"
#include "facadepv/kernels.hpp"

namespace facadepv {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double sind(double d) { return std::sin(d * kDeg); }
double cosd(double d) { return std::cos(d * kDeg); }
double tand(double d) { return std::tan(d * kDeg); }

// Days since 1970-01-01 for a proleptic Gregorian date (H. Hinnant).
long days_from_civil(long y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

void civil_from_days(long z, long& y, unsigned& m, unsigned& d) {
  z += 719468;
  const long era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

}  // namespace

bool is_leap_year(int y) noexcept { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour, int minute, int second) {
  const long days = days_from_civil(year, month, day);
  return Timestamp{std::chrono::seconds{days * 86400L + hour * 3600L + minute * 60L + second}};
}

CivilTime civil(Timestamp t) {
  const long secs = t.time_since_epoch().count();
  long days = secs / 86400;
  long rem = secs % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  long y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  CivilTime c;
  c.year = static_cast<int>(y);
  c.month = m;
  c.day = d;
  c.hour = static_cast<int>(rem / 3600);
  c.minute = static_cast<int>((rem % 3600) / 60);
  c.second = static_cast<int>(rem % 60);
  c.day_of_year = static_cast<unsigned>(days - days_from_civil(y, 1, 1) + 1);
  return c;
}

Timestamp parse_timestamp(std::string_view text) {
  const std::string s(text);
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0, consumed = 0;
  char sep = 0;
  auto fail = [&]() -> Timestamp {
    throw Error(ErrorKind::MisalignedTimestamps, "unparsable timestamp '" + s + "'");
  };
  if (std::sscanf(s.c_str(), "%4d-%2d-%2d%c%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &consumed) != 6) return fail();
  if (sep != 'T' && sep != ' ') return fail();
  std::size_t pos = static_cast<std::size_t>(consumed);
  if (pos < s.size() && s[pos] == ':') {
    int n = 0;
    if (std::sscanf(s.c_str() + pos, ":%2d%n", &sec, &n) != 1) return fail();
    pos += static_cast<std::size_t>(n);
  }
  long offset = 0;
  if (pos < s.size()) {
    const std::string_view zone(s.c_str() + pos);
    if (zone == "Z") {
      // UTC
    } else if (zone.size() == 6 && (zone[0] == '+' || zone[0] == '-') && zone[3] == ':') {
      int oh = 0, om = 0;
      if (std::sscanf(zone.data() + 1, "%2d:%2d", &oh, &om) != 2) return fail();
      offset = (zone[0] == '+' ? 1 : -1) * (oh * 3600L + om * 60L);
    } else {
      return fail();
    }
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || sec > 60) return fail();
  return make_timestamp(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h, mi, sec) -
         std::chrono::seconds{offset};
}

std::string format_timestamp(Timestamp t) {
  const auto c = civil(t);
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", c.year, c.month, c.day, c.hour, c.minute,
                     c.second);
}

void SurfaceOrientation::validate() const {
  if (!(tilt_deg >= 0.0 && tilt_deg <= 180.0)) throw Error(ErrorKind::InvalidArgument, "tilt must be in [0, 180]");
  if (!(azimuth_deg >= 0.0 && azimuth_deg < 360.0)) {
    throw Error(ErrorKind::InvalidArgument, "azimuth must be in [0, 360)");
  }
  if (!(albedo >= 0.0 && albedo <= 1.0)) throw Error(ErrorKind::InvalidArgument, "albedo must be in [0, 1]");
}

SolarPosition solar_position(double latitude, double longitude, Timestamp t) {
  const double unix_s = static_cast<double>(t.time_since_epoch().count());
  const double jd = unix_s / 86400.0 + 2440587.5;
  const double jc = (jd - 2451545.0) / 36525.0;

  const double l0 = std::fmod(280.46646 + jc * (36000.76983 + jc * 0.0003032), 360.0);
  const double m = 357.52911 + jc * (35999.05029 - 0.0001537 * jc);
  const double ecc = 0.016708634 - jc * (0.000042037 + 0.0000001267 * jc);
  const double center = sind(m) * (1.914602 - jc * (0.004817 + 0.000014 * jc)) +
                        sind(2 * m) * (0.019993 - 0.000101 * jc) + sind(3 * m) * 0.000289;
  const double true_long = l0 + center;
  const double omega = 125.04 - 1934.136 * jc;
  const double app_long = true_long - 0.00569 - 0.00478 * sind(omega);
  const double mean_obliq = 23.0 + (26.0 + (21.448 - jc * (46.815 + jc * (0.00059 - jc * 0.001813))) / 60.0) / 60.0;
  const double obliq = mean_obliq + 0.00256 * cosd(omega);
  const double decl = std::asin(sind(obliq) * sind(app_long)) / kDeg;

  const double vy = tand(obliq / 2.0) * tand(obliq / 2.0);
  const double eot_min = 4.0 / kDeg *
                         (vy * sind(2 * l0) - 2 * ecc * sind(m) + 4 * ecc * vy * sind(m) * cosd(2 * l0) -
                          0.5 * vy * vy * sind(4 * l0) - 1.25 * ecc * ecc * sind(2 * m));

  const double day_s = std::fmod(unix_s, 86400.0);
  const double utc_min = (day_s < 0 ? day_s + 86400.0 : day_s) / 60.0;
  double tst = std::fmod(utc_min + eot_min + 4.0 * longitude, 1440.0);
  if (tst < 0) tst += 1440.0;
  const double hour_angle = tst / 4.0 < 0 ? tst / 4.0 + 180.0 : tst / 4.0 - 180.0;

  const double cos_zen =
      std::clamp(sind(latitude) * sind(decl) + cosd(latitude) * cosd(decl) * cosd(hour_angle), -1.0, 1.0);
  const double zen = std::acos(cos_zen) / kDeg;

  double azimuth;
  const double denom = cosd(latitude) * sind(zen);
  if (std::abs(denom) < 1e-12) {
    // pole or sun at zenith: azimuth is undefined, pick the meridian
    azimuth = latitude >= decl ? 180.0 : 0.0;
  } else {
    const double c = std::clamp((sind(latitude) * cosd(zen) - sind(decl)) / denom, -1.0, 1.0);
    const double base = std::acos(c) / kDeg;
    azimuth = hour_angle > 0 ? std::fmod(base + 180.0, 360.0) : std::fmod(540.0 - base, 360.0);
  }

  const double elev = 90.0 - zen;
  double refraction_arcsec;
  if (elev > 85.0) {
    refraction_arcsec = 0.0;
  } else if (elev > 5.0) {
    const double te = tand(elev);
    refraction_arcsec = 58.1 / te - 0.07 / (te * te * te) + 0.000086 / std::pow(te, 5);
  } else if (elev > -0.575) {
    refraction_arcsec = 1735.0 + elev * (-518.2 + elev * (103.4 + elev * (-12.79 + elev * 0.711)));
  } else {
    refraction_arcsec = -20.772 / tand(elev);
  }
  const double apparent_elev = elev + refraction_arcsec / 3600.0;

  SolarPosition pos;
  pos.apparent_elevation_deg = apparent_elev;
  pos.zenith_deg = 90.0 - apparent_elev;
  pos.azimuth_deg = azimuth;
  pos.timestamp = t;
  return pos;
}

double extraterrestrial_normal(unsigned day_of_year, double solar_constant) noexcept {
  const double b = 2.0 * kPi / 365.0 * (static_cast<double>(day_of_year) - 1.0);
  const double r = 1.00011 + 0.034221 * std::cos(b) + 0.00128 * std::sin(b) + 0.000719 * std::cos(2 * b) +
                   0.000077 * std::sin(2 * b);
  return solar_constant * r;
}

double relative_airmass(double zenith_deg) noexcept {
  if (zenith_deg > 90.0) return kNaN;
  return 1.0 / (cosd(zenith_deg) + 0.50572 * std::pow(96.07995 - zenith_deg, -1.6364));
}

double altitude_to_pressure(double altitude_m) noexcept {
  return 100.0 * std::pow((44331.514 - altitude_m) / 11880.516, 1.0 / 0.1902632);
}

IrradianceSample clear_sky(const SolarPosition& pos, double altitude, double tl) {
  IrradianceSample out;
  out.timestamp = pos.timestamp;
  if (!(pos.zenith_deg < 90.0)) return out;

  const double cos_zen = std::max(cosd(pos.zenith_deg), 0.0);
  const double am = relative_airmass(pos.zenith_deg) * altitude_to_pressure(altitude) / 101325.0;
  const double dni_extra = extraterrestrial_normal(civil(pos.timestamp).day_of_year);

  const double fh1 = std::exp(-altitude / 8000.0);
  const double fh2 = std::exp(-altitude / 1250.0);
  const double cg1 = 5.09e-05 * altitude + 0.868;
  const double cg2 = 3.92e-05 * altitude + 0.0387;

  const double ghi = cg1 * dni_extra * cos_zen * std::max(std::exp(-cg2 * am * (fh1 + fh2 * (tl - 1.0))), 0.0);
  const double b = 0.664 + 0.163 / fh1;
  const double bnci = dni_extra * std::max(b * std::exp(-0.09 * am * (tl - 1.0)), 0.0);
  const double bnci_2 =
      ghi * std::clamp((1.0 - (0.1 - 0.2 * std::exp(-tl)) / (0.1 + 0.882 / fh1)) / cos_zen, 0.0, 1e20);
  out.ghi = ghi;
  out.dni = std::min(bnci, bnci_2);
  out.dhi = ghi - out.dni * cos_zen;
  return out;
}

double aoi(const SolarPosition& pos, const SurfaceOrientation& surf) {
  const double c = cosd(pos.zenith_deg) * cosd(surf.tilt_deg) +
                   sind(pos.zenith_deg) * sind(surf.tilt_deg) * cosd(pos.azimuth_deg - surf.azimuth_deg);
  return std::acos(std::clamp(c, -1.0, 1.0)) / kDeg;
}

PoaComponents transpose_poa(const IrradianceSample& irr, const SolarPosition& pos, const SurfaceOrientation& surf) {
  PoaComponents p;
  p.aoi_deg = aoi(pos, surf);
  const double cos_tilt = cosd(surf.tilt_deg);
  p.e_dir = p.aoi_deg >= 90.0 ? 0.0 : irr.dni * std::max(cosd(p.aoi_deg), 0.0);
  p.e_dif = irr.dhi * (1.0 + cos_tilt) / 2.0;
  p.e_ref = irr.ghi * surf.albedo * (1.0 - cos_tilt) / 2.0;
  p.e_poa = p.e_dir + p.e_dif + p.e_ref;
  return p;
}

CellTemperature cell_temperature(double e_poa, double t_ambient, double wind_speed, const ModuleThermalParams& p) {
  const double t_module = e_poa * std::exp(p.a + p.b * wind_speed) + t_ambient;
  return {t_module, t_module + e_poa / p.e0 * p.delta_t};
}

double diode_current(double v, const SingleDiodeParams& p) {
  const double a = p.modified_ideality();
  // Residual, decreasing in I.
  auto f = [&](double i) {
    const double vd = v + i * p.r_s;
    return p.i_l - p.i_0 * std::expm1(vd / a) - vd / p.r_sh - i;
  };
  auto df = [&](double i) {
    const double vd = v + i * p.r_s;
    return -p.i_0 * std::exp(vd / a) * p.r_s / a - p.r_s / p.r_sh - 1.0;
  };

  // f(I_L + I_0) <= 0 whenever V + I R_s >= 0; walk down until f > 0.
  double hi = p.i_l + p.i_0;
  double lo = std::min(0.0, hi) - 1.0;
  while (f(lo) <= 0.0) {
    lo = 2.0 * lo - 1.0;
    if (lo < -1e12) throw Error(ErrorKind::NoConvergence, "cannot bracket diode current");
  }
  if (f(hi) > 0.0) hi = p.i_l + p.i_0 + std::abs(v) / p.r_sh + 1.0;

  double i = std::clamp(p.i_l - v / p.r_sh, lo, hi);
  for (int iter = 0; iter < 100; ++iter) {
    const double r = f(i);
    if (std::abs(r) < 1e-10) return i;
    if (r > 0.0) lo = i;
    else hi = i;
    const double d = df(i);
    double next = i - r / d;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == i) return i;
    i = next;
  }
  const double r = f(i);
  if (std::abs(r) < 1e-10) return i;
  throw Error(ErrorKind::NoConvergence, fmt::format("diode current residual {} after 100 iterations", r));
}

double open_circuit_voltage(const SingleDiodeParams& p) {
  const double a = p.modified_ideality();
  // At I = 0: I_L - I_0 (exp(V/a) - 1) - V/R_sh = 0, decreasing in V.
  auto g = [&](double v) { return p.i_l - p.i_0 * std::expm1(v / a) - v / p.r_sh; };
  double hi = a * std::log1p(p.i_l / p.i_0);  // R_sh -> inf bound, g(hi) <= 0
  double lo = 0.0;
  if (g(hi) >= 0.0) return hi;
  double v = hi;
  for (int iter = 0; iter < 200; ++iter) {
    const double r = g(v);
    if (std::abs(r) < 1e-13) return v;
    if (r > 0.0) lo = v;
    else hi = v;
    const double d = -p.i_0 * std::exp(v / a) / a - 1.0 / p.r_sh;
    double next = v - r / d;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == v) return v;
    v = next;
  }
  return v;
}

MaxPowerPoint max_power_point(const SingleDiodeParams& p) {
  const double voc = open_circuit_voltage(p);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0, hi = voc;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double p1 = x1 * diode_current(x1, p);
  double p2 = x2 * diode_current(x2, p);
  while (hi - lo > 1e-9 * std::max(voc, 1.0)) {
    if (p1 < p2) {
      lo = x1;
      x1 = x2;
      p1 = p2;
      x2 = lo + inv_phi * (hi - lo);
      p2 = x2 * diode_current(x2, p);
    } else {
      hi = x2;
      x2 = x1;
      p2 = p1;
      x1 = hi - inv_phi * (hi - lo);
      p1 = x1 * diode_current(x1, p);
    }
  }
  const double v = 0.5 * (lo + hi);
  const double i = diode_current(v, p);
  return {v, i, v * i};
}

void SystemConfig::validate() const {
  auto unit = [](double v) { return v > 0.0 && v <= 1.0; };
  if (!unit(module_efficiency) || !unit(inverter_efficiency) || !unit(other_losses)) {
    throw Error(ErrorKind::InvalidArgument, "efficiencies and derate must lie in (0, 1]");
  }
  if (!(module_area_m2 > 0.0)) throw Error(ErrorKind::InvalidArgument, "module area must be positive");
  if (!(thermal.delta_t >= 0.0) || thermal.e0 != 1000.0) {
    throw Error(ErrorKind::InvalidArgument, "thermal delta_t must be >= 0 and e0 == 1000");
  }
  if (!(linke_turbidity > 0.0)) throw Error(ErrorKind::InvalidArgument, "turbidity must be positive");
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double field_value(const std::string& raw, std::size_t line_no) {
  const auto s = trim(raw);
  if (s.empty()) return kNaN;
  std::size_t used = 0;
  double v;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw Error(ErrorKind::SchemaViolation, fmt::format("line {}: '{}' is not a number", line_no, s));
  }
  if (used != s.size()) throw Error(ErrorKind::SchemaViolation, fmt::format("line {}: '{}' is not a number", line_no, s));
  return v;
}

}  // namespace

WeatherSeries read_weather_csv(std::istream& in) {
  static const std::vector<std::string> kHeader{"timestamp", "ghi", "dni", "dhi", "temp_air", "wind_speed"};
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::SchemaViolation, "weather CSV is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  auto header = split_csv(line);
  for (auto& h : header) h = trim(h);
  if (header != kHeader) {
    throw Error(ErrorKind::SchemaViolation, "weather CSV header must be timestamp,ghi,dni,dhi,temp_air,wind_speed");
  }
  WeatherSeries series;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != kHeader.size()) {
      throw Error(ErrorKind::SchemaViolation, fmt::format("line {}: expected 6 fields, got {}", line_no, fields.size()));
    }
    WeatherRecord r;
    r.timestamp = parse_timestamp(trim(fields[0]));
    r.ghi = field_value(fields[1], line_no);
    r.dni = field_value(fields[2], line_no);
    r.dhi = field_value(fields[3], line_no);
    r.temp_air = field_value(fields[4], line_no);
    r.wind_speed = field_value(fields[5], line_no);
    series.records.push_back(r);
  }
  return series;
}

WeatherSeries load_weather_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::WeatherGap, "weather file not found: " + path);
  return read_weather_csv(in);
}

void write_weather_csv(std::ostream& out, const WeatherSeries& series) {
  out << "timestamp,ghi,dni,dhi,temp_air,wind_speed\n";
  auto f = [](double v) { return std::isnan(v) ? std::string() : fmt::format("{}", v); };
  for (const auto& r : series.records) {
    out << format_timestamp(r.timestamp) << ',' << f(r.ghi) << ',' << f(r.dni) << ',' << f(r.dhi) << ','
        << f(r.temp_air) << ',' << f(r.wind_speed) << '\n';
  }
}

WeatherSeries conform_weather(const WeatherSeries& raw) {
  if (raw.records.empty()) throw Error(ErrorKind::WeatherGap, "weather series is empty");
  const int year = civil(raw.records.front().timestamp).year;
  const std::size_t hours = is_leap_year(year) ? 8784 : 8760;
  const Timestamp start = make_timestamp(year, 1, 1);

  std::vector<const WeatherRecord*> slot(hours, nullptr);
  for (const auto& r : raw.records) {
    const long offset = (r.timestamp - start).count();
    if (offset < 0 || offset % 3600 != 0 || static_cast<std::size_t>(offset / 3600) >= hours) {
      throw Error(ErrorKind::MisalignedTimestamps,
                  fmt::format("{} is not an hour of {}", format_timestamp(r.timestamp), year));
    }
    auto& s = slot[static_cast<std::size_t>(offset / 3600)];
    if (s) throw Error(ErrorKind::MisalignedTimestamps, "duplicate timestamp " + format_timestamp(r.timestamp));
    s = &r;
  }

  auto complete = [](const WeatherRecord& r) {
    return std::isfinite(r.ghi) && std::isfinite(r.dni) && std::isfinite(r.dhi) && std::isfinite(r.temp_air) &&
           std::isfinite(r.wind_speed);
  };
  std::size_t gaps = 0;
  for (const auto* s : slot) gaps += (s == nullptr || !complete(*s)) ? 1 : 0;
  if (static_cast<double>(gaps) > 0.01 * static_cast<double>(hours)) {
    throw Error(ErrorKind::WeatherGap, fmt::format("{} of {} hours missing (limit 1%)", gaps, hours));
  }

  WeatherSeries out;
  out.records.resize(hours);
  double last_temp = kNaN, last_wind = kNaN;
  for (const auto* s : slot) {
    if (s && std::isfinite(s->temp_air) && std::isnan(last_temp)) last_temp = s->temp_air;
    if (s && std::isfinite(s->wind_speed) && std::isnan(last_wind)) last_wind = s->wind_speed;
  }
  if (std::isnan(last_temp)) last_temp = 20.0;
  if (std::isnan(last_wind)) last_wind = 0.0;
  for (std::size_t h = 0; h < hours; ++h) {
    WeatherRecord r;
    r.timestamp = start + std::chrono::hours{static_cast<long>(h)};
    if (const auto* s = slot[h]) {
      auto pick = [](double v) { return std::isfinite(v) ? std::max(v, 0.0) : 0.0; };
      r.ghi = pick(s->ghi);
      r.dni = pick(s->dni);
      r.dhi = pick(s->dhi);
      if (std::isfinite(s->temp_air)) last_temp = s->temp_air;
      if (std::isfinite(s->wind_speed)) last_wind = std::max(s->wind_speed, 0.0);
      // a record with any missing irradiance field counts as dark
      if (!std::isfinite(s->ghi) || !std::isfinite(s->dni) || !std::isfinite(s->dhi)) r.ghi = r.dni = r.dhi = 0.0;
    }
    r.temp_air = last_temp;
    r.wind_speed = last_wind;
    out.records[h] = r;
  }
  return out;
}

WeatherSeries clear_sky_year(double latitude, double longitude, double altitude_m, int year, const SystemConfig& sys) {
  const std::size_t hours = is_leap_year(year) ? 8784 : 8760;
  const Timestamp start = make_timestamp(year, 1, 1);
  WeatherSeries out;
  out.records.reserve(hours);
  for (std::size_t h = 0; h < hours; ++h) {
    const Timestamp t = start + std::chrono::hours{static_cast<long>(h)};
    const auto pos = solar_position(latitude, longitude, t + std::chrono::minutes{30});
    const auto irr = clear_sky(pos, altitude_m, sys.linke_turbidity);
    out.records.push_back({t, irr.ghi, irr.dni, irr.dhi, sys.clear_sky_temp_air, sys.clear_sky_wind_speed});
  }
  return out;
}

EnergyReport simulate_year(const Site& site, double pv_area_m2, long module_count, const SurfaceOrientation& surf,
                           const WeatherSeries& weather, const SystemConfig& sys, ElectricalMode mode) {
  surf.validate();
  sys.validate();
  if (pv_area_m2 < 0.0 || module_count < 0) throw Error(ErrorKind::InvalidArgument, "negative array size");
  const auto conformed = conform_weather(weather);
  const auto& recs = conformed.records;
  const std::size_t n = recs.size();

  std::vector<double> sun_e(n), sun_n(n), sun_u(n), dni(n), dhi(n), ghi(n), ta(n), ws(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto pos = solar_position(site.latitude, site.longitude, recs[i].timestamp + std::chrono::minutes{30});
    const double sz = sind(pos.zenith_deg);
    sun_e[i] = sz * sind(pos.azimuth_deg);
    sun_n[i] = sz * cosd(pos.azimuth_deg);
    sun_u[i] = cosd(pos.zenith_deg);
    dni[i] = recs[i].dni;
    dhi[i] = recs[i].dhi;
    ghi[i] = recs[i].ghi;
    ta[i] = recs[i].temp_air;
    ws[i] = recs[i].wind_speed;
  }

  kernels::HourlyParams kp;
  kp.normal_east = sind(surf.tilt_deg) * sind(surf.azimuth_deg);
  kp.normal_north = sind(surf.tilt_deg) * cosd(surf.azimuth_deg);
  kp.normal_up = cosd(surf.tilt_deg);
  kp.diffuse_factor = (1.0 + cosd(surf.tilt_deg)) / 2.0;
  kp.ground_factor = surf.albedo * (1.0 - cosd(surf.tilt_deg)) / 2.0;
  kp.a = sys.thermal.a;
  kp.b = sys.thermal.b;
  kp.delta_t = sys.thermal.delta_t;
  kp.e0 = sys.thermal.e0;
  kp.area_efficiency = pv_area_m2 * sys.module_efficiency;
  kp.gamma = sys.temperature_coefficient;
  kp.ac_factor = sys.inverter_efficiency * sys.other_losses;

  std::vector<double> e_dir(n), e_dif(n), e_ref(n), poa(n), t_cell(n), p_dc(n), p_ac(n);
  kernels::hourly_power({sun_e, sun_n, sun_u, dni, dhi, ghi, ta, ws}, kp,
                        {e_dir, e_dif, e_ref, poa, t_cell, p_dc, p_ac});

  if (mode == ElectricalMode::SingleDiode) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!(poa[i] > 0.0) || module_count == 0) {
        p_dc[i] = p_ac[i] = 0.0;
        continue;
      }
      SingleDiodeParams dp = sys.diode;
      dp.i_l = sys.diode.i_l * poa[i] / sys.thermal.e0;
      const double per_module = max_power_point(dp).p_mp;
      const double derate = 1.0 + sys.temperature_coefficient * (t_cell[i] - 25.0);
      p_dc[i] = std::max(per_module * static_cast<double>(module_count) * derate, 0.0);
      p_ac[i] = p_dc[i] * kp.ac_factor;
    }
  }

  EnergyReport report;
  report.hourly.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    report.hourly[i] = {recs[i].timestamp, poa[i], t_cell[i], p_dc[i], p_ac[i]};
    const auto month = civil(recs[i].timestamp).month - 1;
    report.monthly_kwh[month] += p_ac[i] / 1000.0;
    report.monthly_irradiation_kwh_m2[month] += poa[i] / 1000.0;
  }
  for (std::size_t m = 0; m < 12; ++m) {
    report.annual_kwh += report.monthly_kwh[m];
    report.annual_irradiation_kwh_m2 += report.monthly_irradiation_kwh_m2[m];
  }
  return report;
}

EnergyReport simulate_year(const FacadeDescription& facade, const LayoutResult& layout,
                           const SurfaceOrientation& surf, const WeatherSeries& weather, const SystemConfig& sys,
                           ElectricalMode mode) {
  return simulate_year(Site{facade.latitude, facade.longitude, facade.altitude_m}, layout.total_area_m2,
                       layout.modules_by_area, surf, weather, sys, mode);
}

}  // namespace facadepv
