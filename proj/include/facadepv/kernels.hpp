#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace facadepv::kernels {

/// Per-hour inputs in structure-of-arrays form. The sun vector is a unit
/// vector (east, north, up); hours with sun_up <= 0 produce zero output.
struct HourlyInputs {
  std::span<const double> sun_east;
  std::span<const double> sun_north;
  std::span<const double> sun_up;
  std::span<const double> dni;
  std::span<const double> dhi;
  std::span<const double> ghi;
  std::span<const double> temp_air;
  std::span<const double> wind_speed;

  std::size_t size() const noexcept { return sun_up.size(); }
};

struct HourlyOutputs {
  std::span<double> e_dir;
  std::span<double> e_dif;
  std::span<double> e_ref;
  std::span<double> poa;
  std::span<double> t_cell;
  std::span<double> p_dc;
  std::span<double> p_ac;
};

struct HourlyParams {
  // unit surface normal (east, north, up)
  double normal_east = 0.0;
  double normal_north = -1.0;
  double normal_up = 0.0;
  double diffuse_factor = 0.5;  // (1 + cos tilt) / 2
  double ground_factor = 0.1;   // albedo * (1 - cos tilt) / 2
  // SAPM thermal
  double a = -3.56;
  double b = -0.075;
  double delta_t = 3.0;
  double e0 = 1000.0;
  // efficiency-mode electrical chain
  double area_efficiency = 0.0;  // area * module efficiency
  double gamma = -0.004;
  double ac_factor = 1.0;  // inverter efficiency * derate
};

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa) noexcept;

/// Widest variant this binary was built with and the CPU supports.
Isa best_isa() noexcept;
bool isa_available(Isa isa) noexcept;

/// Transposition, SAPM cell temperature and efficiency-mode power per hour.
void hourly_power_scalar(const HourlyInputs& in, const HourlyParams& p, const HourlyOutputs& out);
#if defined(FACADEPV_HAVE_AVX2)
void hourly_power_avx2(const HourlyInputs& in, const HourlyParams& p, const HourlyOutputs& out);
#endif

/// Dispatches to `isa`, falling back to scalar when unavailable.
void hourly_power(const HourlyInputs& in, const HourlyParams& p, const HourlyOutputs& out, Isa isa = best_isa());

}  // namespace facadepv::kernels
