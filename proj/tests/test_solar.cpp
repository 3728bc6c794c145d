#include <doctest.h>

#include <cmath>
#include <sstream>

#include "facadepv/solar.hpp"
#include "test_support.hpp"

using namespace facadepv;
using facadepv::testing::error_kind_of;

namespace {

double angle_diff(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

SolarPosition at_zenith(double zenith, int year, unsigned month, unsigned day) {
  SolarPosition p;
  p.zenith_deg = zenith;
  p.apparent_elevation_deg = 90.0 - zenith;
  p.azimuth_deg = 180.0;
  p.timestamp = make_timestamp(year, month, day, 12);
  return p;
}

double daily_poa_kwh(double lat, double lon, int month, int day, const SurfaceOrientation& surf) {
  double wh = 0.0;
  for (int h = 0; h < 24; ++h) {
    for (int m = 0; m < 60; m += 5) {
      const auto pos = solar_position(lat, lon, make_timestamp(2023, month, day, h, m));
      const auto irr = clear_sky(pos, 0.0, 3.0);
      wh += transpose_poa(irr, pos, surf).e_poa * (5.0 / 60.0);
    }
  }
  return wh / 1000.0;
}

}  // namespace

TEST_SUITE("solar") {
  TEST_CASE("timestamps") {
    const auto t = make_timestamp(2023, 6, 21, 12);
    CHECK(parse_timestamp("2023-06-21T12:00:00Z") == t);
    CHECK(parse_timestamp("2023-06-21 12:00") == t);
    CHECK(parse_timestamp("2023-06-21T12:00:00+00:00") == t);
    CHECK(parse_timestamp("2023-06-21T20:00:00+08:00") == t);
    CHECK(format_timestamp(t) == "2023-06-21T12:00:00Z");
    CHECK(civil(t).day_of_year == 172);
    CHECK(civil(make_timestamp(2024, 12, 31)).day_of_year == 366);
    CHECK(civil(make_timestamp(1969, 12, 31, 23, 59, 59)).year == 1969);
    CHECK(is_leap_year(2024));
    CHECK(!is_leap_year(2100));
    CHECK(is_leap_year(2000));
    CHECK(error_kind_of([] { parse_timestamp("yesterday"); }) == ErrorKind::MisalignedTimestamps);
    CHECK(error_kind_of([] { parse_timestamp("2023-13-01T00:00"); }) == ErrorKind::MisalignedTimestamps);
    CHECK(error_kind_of([] { parse_timestamp("2023-01-01T00:00 UTC"); }) == ErrorKind::MisalignedTimestamps);
  }

  TEST_CASE("solar position against the NREL SPA reference") {
    struct Case {
      double lat, lon;
      const char* t;
      double zenith, azimuth;
    };
    // apparent zenith and azimuth from pvlib spa_python (pressure 101325 Pa, 12 C)
    const Case cases[] = {
        {39.08, 117.2, "2023-06-21T04:00:00Z", 15.876126, 169.125112},
        {39.08, 117.2, "2023-12-21T04:00:00Z", 62.519890, 177.681615},
        {30.27, 120.15, "2023-03-20T02:30:00Z", 38.300792, 138.491534},
        {-33.87, 151.21, "2023-07-01T01:00:00Z", 58.677380, 15.884661},
        {51.5, -0.12, "2023-09-10T15:45:00Z", 66.051963, 245.900117},
        {39.93, 32.86, "2023-01-15T09:00:00Z", 62.513988, 164.795323},
        {64.1, -21.9, "2023-06-21T23:30:00Z", 89.008329, 332.808498},
        {0.0, 0.0, "2024-02-29T12:00:00Z", 8.269231, 158.137754},
    };
    for (const auto& c : cases) {
      const auto p = solar_position(c.lat, c.lon, parse_timestamp(c.t));
      INFO(c.t);
      CHECK(std::abs(p.zenith_deg - c.zenith) < 0.05);
      CHECK(angle_diff(p.azimuth_deg, c.azimuth) < 0.05);
      CHECK(p.apparent_elevation_deg == doctest::Approx(90.0 - p.zenith_deg));
    }
  }

  TEST_CASE("clear-sky components against pvlib") {
    struct Case {
      double zenith, altitude, tl;
      int month, day;
      double am, pressure, dni_extra, ghi, dni, dhi;
    };
    // pvlib ineichen with kastenyoung1989 airmass, alt2pres and Spencer (1366.1 W/m2)
    const Case cases[] = {
        {30.0, 0, 3.0, 6, 21, 1.1539922333636758, 101324.9987478768, 1321.6235925714136, 868.9044427827395,
         887.9780913035092, 99.89285770988272},
        {60.0, 0, 3.0, 12, 21, 1.9942928525292494, 101324.9987478768, 1412.7085643562702, 486.39252674068695,
         815.9399938602928, 78.42252981054042},
        {10.0, 1500, 2.5, 3, 21, 1.0150711594323112, 84556.26233880947, 1376.8923612194285, 1151.9753387520102,
         1056.9268640121911, 111.10556870592472},
        {80.0, 200, 4.0, 1, 1, 5.5860358798512, 98945.36356268197, 1413.981805, 87.96501536840478,
         269.4500184797332, 41.17551068707838},
        {45.0, 0, 3.0, 7, 19, 1.4125952520262743, 101324.9987478768, 1321.7686199481045, 688.5490249124904,
         847.6842808765648, 89.1457215994293},
    };
    for (const auto& c : cases) {
      const auto pos = at_zenith(c.zenith, 2023, c.month, c.day);
      CHECK(relative_airmass(c.zenith) == doctest::Approx(c.am).epsilon(1e-12));
      CHECK(altitude_to_pressure(c.altitude) == doctest::Approx(c.pressure).epsilon(1e-12));
      CHECK(extraterrestrial_normal(civil(pos.timestamp).day_of_year) == doctest::Approx(c.dni_extra).epsilon(1e-9));
      const auto irr = clear_sky(pos, c.altitude, c.tl);
      CHECK(irr.ghi == doctest::Approx(c.ghi).epsilon(1e-9));
      CHECK(irr.dni == doctest::Approx(c.dni).epsilon(1e-9));
      CHECK(irr.dhi == doctest::Approx(c.dhi).epsilon(1e-9));
    }
    const auto night = clear_sky(at_zenith(95.0, 2023, 6, 21), 0.0, 3.0);
    CHECK(night.ghi == 0.0);
    CHECK(night.dni == 0.0);
    CHECK(std::isnan(relative_airmass(91.0)));
  }

  TEST_CASE("transposition identities") {
    const IrradianceSample irr{800.0, 700.0, 120.0};
    SolarPosition sun = at_zenith(0.0, 2023, 6, 21);
    const auto flat = transpose_poa(irr, sun, {0.0, 180.0, 0.2});
    CHECK(flat.aoi_deg == doctest::Approx(0.0));
    CHECK(std::abs(flat.e_dir - 700.0) < 1e-12);
    CHECK(std::abs(flat.e_dif - 120.0) < 1e-12);
    CHECK(std::abs(flat.e_ref) < 1e-12);

    sun = at_zenith(60.0, 2023, 6, 21);
    const auto wall = transpose_poa(irr, sun, {90.0, 180.0, 0.25});
    CHECK(std::abs(wall.e_dif - 60.0) < 1e-12);
    CHECK(std::abs(wall.e_ref - 800.0 * 0.25 / 2.0) < 1e-12);
    CHECK(wall.aoi_deg == doctest::Approx(30.0));
    CHECK(wall.e_dir == doctest::Approx(700.0 * std::cos(30.0 * M_PI / 180.0)));
    CHECK(wall.e_poa == doctest::Approx(wall.e_dir + wall.e_dif + wall.e_ref));

    const auto behind = transpose_poa(irr, sun, {90.0, 0.0, 0.2});
    CHECK(behind.e_dir == 0.0);
    CHECK(behind.aoi_deg > 90.0);
  }

  TEST_CASE("cell temperature") {
    const ModuleThermalParams p;
    const auto t = cell_temperature(1000.0, 25.0, 1.0, p);
    const double tm = 1000.0 * std::exp(-3.56 - 0.075) + 25.0;
    CHECK(t.t_module == doctest::Approx(tm));
    CHECK(t.t_cell == doctest::Approx(tm + 3.0));
    CHECK(cell_temperature(0.0, 12.0, 3.0, p).t_cell == 12.0);
  }

  TEST_CASE("single diode") {
    SingleDiodeParams p;
    p.r_s = 0.0;
    CHECK(diode_current(0.0, p) == p.i_l);

    SingleDiodeParams ideal;
    ideal.r_sh = 1e300;
    const double a = ideal.modified_ideality();
    CHECK(std::abs(open_circuit_voltage(ideal) - a * std::log1p(ideal.i_l / ideal.i_0)) < 1e-8);

    const SingleDiodeParams d;
    const double voc = open_circuit_voltage(d);
    CHECK(std::abs(diode_current(voc, d)) < 1e-8);
    double prev = diode_current(0.0, d);
    for (int i = 1; i <= 50; ++i) {
      const double cur = diode_current(voc * i / 50.0, d);
      CHECK(cur < prev);
      prev = cur;
    }
    const auto mpp = max_power_point(d);
    double best = 0.0;
    for (int i = 0; i <= 10000; ++i) {
      const double v = voc * i / 10000.0;
      best = std::max(best, v * diode_current(v, d));
    }
    CHECK(std::abs(mpp.p_mp - best) / best < 1e-3);
    CHECK(mpp.p_mp >= best * (1 - 1e-9));
    CHECK(mpp.p_mp == doctest::Approx(mpp.v_mp * mpp.i_mp));
  }

  TEST_CASE("weather csv") {
    std::istringstream in(
        "timestamp,ghi,dni,dhi,temp_air,wind_speed\n"
        "2023-01-01T00:00:00Z,0,0,0,-3.5,2\n"
        "2023-01-01T01:00:00Z,,0,0,-3,\n");
    const auto w = read_weather_csv(in);
    REQUIRE(w.records.size() == 2);
    CHECK(w.records[0].temp_air == -3.5);
    CHECK(std::isnan(w.records[1].ghi));
    std::ostringstream out;
    write_weather_csv(out, w);
    std::istringstream back(out.str());
    const auto again = read_weather_csv(back);
    CHECK(again.records[0].timestamp == w.records[0].timestamp);
    CHECK(std::isnan(again.records[1].wind_speed));

    std::istringstream bad_header("time,ghi\n");
    CHECK(error_kind_of([&] { read_weather_csv(bad_header); }) == ErrorKind::SchemaViolation);
    std::istringstream bad_row("timestamp,ghi,dni,dhi,temp_air,wind_speed\n2023-01-01T00:00:00Z,a,0,0,0,0\n");
    CHECK(error_kind_of([&] { read_weather_csv(bad_row); }) == ErrorKind::SchemaViolation);
    CHECK(error_kind_of([] { load_weather_csv("/nonexistent/weather.csv"); }) == ErrorKind::WeatherGap);
  }

  TEST_CASE("conforming to the hourly grid") {
    const SystemConfig sys;
    auto year = clear_sky_year(39.08, 117.2, 0.0, 2023, sys);
    REQUIRE(year.records.size() == 8760);
    CHECK(year.records.front().timestamp == make_timestamp(2023, 1, 1));
    CHECK(clear_sky_year(0, 0, 0, 2024, sys).records.size() == 8784);

    auto gappy = year;
    gappy.records.erase(gappy.records.begin() + 100, gappy.records.begin() + 150);
    gappy.records[10].temp_air = std::nan("");
    const auto filled = conform_weather(gappy);
    CHECK(filled.records.size() == 8760);
    CHECK(filled.records[120].ghi == 0.0);
    CHECK(filled.records[120].temp_air == year.records[99].temp_air);
    CHECK(filled.records[10].temp_air == year.records[9].temp_air);

    auto sparse = year;
    sparse.records.erase(sparse.records.begin(), sparse.records.begin() + 100);
    CHECK(error_kind_of([&] { conform_weather(sparse); }) == ErrorKind::WeatherGap);

    auto shifted = year;
    shifted.records[5].timestamp += std::chrono::minutes(30);
    CHECK(error_kind_of([&] { conform_weather(shifted); }) == ErrorKind::MisalignedTimestamps);
    auto dup = year;
    dup.records[6].timestamp = dup.records[5].timestamp;
    CHECK(error_kind_of([&] { conform_weather(dup); }) == ErrorKind::MisalignedTimestamps);
    auto mixed = year;
    mixed.records.back().timestamp = make_timestamp(2024, 1, 1);
    CHECK(error_kind_of([&] { conform_weather(mixed); }) == ErrorKind::MisalignedTimestamps);
    CHECK(error_kind_of([] { conform_weather({}); }) == ErrorKind::WeatherGap);
  }

  TEST_CASE("annual simulation bookkeeping") {
    const SystemConfig sys;
    const Site site{39.08, 117.2, 0.0};
    const SurfaceOrientation south{90.0, 180.0, 0.2};
    const auto weather = clear_sky_year(site.latitude, site.longitude, 0.0, 2023, sys);
    const auto r = simulate_year(site, 50.0, 41, south, weather, sys, ElectricalMode::Efficiency);
    REQUIRE(r.hourly.size() == 8760);
    double sum = 0.0;
    for (double m : r.monthly_kwh) sum += m;
    CHECK(r.annual_kwh == doctest::Approx(sum).epsilon(1e-12));
    CHECK(r.annual_kwh > 0.0);

    const auto twice = simulate_year(site, 100.0, 82, south, weather, sys, ElectricalMode::Efficiency);
    CHECK(twice.annual_kwh == doctest::Approx(2.0 * r.annual_kwh).epsilon(1e-12));
    CHECK(simulate_year(site, 0.0, 0, south, weather, sys, ElectricalMode::Efficiency).annual_kwh == 0.0);

    // one daylight hour recomputed by hand
    std::size_t noon = 0;
    for (std::size_t i = 0; i < r.hourly.size(); ++i) {
      if (r.hourly[i].poa > r.hourly[noon].poa) noon = i;
    }
    const auto& rec = weather.records[noon];
    const auto pos = solar_position(site.latitude, site.longitude, rec.timestamp + std::chrono::minutes(30));
    const auto poa = transpose_poa({rec.ghi, rec.dni, rec.dhi}, pos, south);
    const auto tc = cell_temperature(poa.e_poa, rec.temp_air, rec.wind_speed, sys.thermal);
    const double p_ac = poa.e_poa * 50.0 * 0.20 * (1 - 0.004 * (tc.t_cell - 25.0)) * 0.97 * 0.86;
    CHECK(r.hourly[noon].poa == doctest::Approx(poa.e_poa).epsilon(1e-9));
    CHECK(r.hourly[noon].t_cell == doctest::Approx(tc.t_cell).epsilon(1e-9));
    CHECK(r.hourly[noon].p_ac == doctest::Approx(p_ac).epsilon(1e-9));

    const auto diode = simulate_year(site, 50.0, 41, south, weather, sys, ElectricalMode::SingleDiode);
    CHECK(diode.annual_kwh > 0.0);
    CHECK(diode.annual_irradiation_kwh_m2 == doctest::Approx(r.annual_irradiation_kwh_m2));

    SurfaceOrientation bad = south;
    bad.tilt_deg = 200.0;
    CHECK(error_kind_of([&] { simulate_year(site, 1.0, 1, bad, weather, sys, ElectricalMode::Efficiency); }) ==
          ErrorKind::InvalidArgument);
  }

  TEST_CASE("south wall peaks in winter at mid latitude") {
    const SurfaceOrientation south{90.0, 180.0, 0.2};
    CHECK(daily_poa_kwh(39.08, 117.2, 12, 21, south) > daily_poa_kwh(39.08, 117.2, 6, 21, south));
    const SurfaceOrientation roof{0.0, 180.0, 0.2};
    CHECK(daily_poa_kwh(39.08, 117.2, 12, 21, roof) < daily_poa_kwh(39.08, 117.2, 6, 21, roof));
  }
}
