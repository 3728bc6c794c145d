#include "facadepv/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace facadepv::kernels {

std::string_view to_string(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "scalar";
}

bool isa_available(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(FACADEPV_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa best_isa() noexcept {
  static const Isa best = isa_available(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
  return best;
}

void hourly_power_scalar(const HourlyInputs& in, const HourlyParams& p, const HourlyOutputs& out) {
  const std::size_t n = in.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(in.sun_up[i] > 0.0)) {
      out.e_dir[i] = out.e_dif[i] = out.e_ref[i] = out.poa[i] = 0.0;
      out.t_cell[i] = in.temp_air[i];
      out.p_dc[i] = out.p_ac[i] = 0.0;
      continue;
    }
    const double cos_aoi =
        in.sun_east[i] * p.normal_east + in.sun_north[i] * p.normal_north + in.sun_up[i] * p.normal_up;
    const double e_dir = in.dni[i] * std::max(cos_aoi, 0.0);
    const double e_dif = in.dhi[i] * p.diffuse_factor;
    const double e_ref = in.ghi[i] * p.ground_factor;
    const double poa = e_dir + e_dif + e_ref;
    const double t_module = poa * std::exp(p.a + p.b * in.wind_speed[i]) + in.temp_air[i];
    const double t_cell = t_module + poa / p.e0 * p.delta_t;
    const double p_dc = std::max(poa * p.area_efficiency * (1.0 + p.gamma * (t_cell - 25.0)), 0.0);
    out.e_dir[i] = e_dir;
    out.e_dif[i] = e_dif;
    out.e_ref[i] = e_ref;
    out.poa[i] = poa;
    out.t_cell[i] = t_cell;
    out.p_dc[i] = p_dc;
    out.p_ac[i] = p_dc * p.ac_factor;
  }
}

void hourly_power(const HourlyInputs& in, const HourlyParams& p, const HourlyOutputs& out, Isa isa) {
#if defined(FACADEPV_HAVE_AVX2)
  if (isa == Isa::Avx2 && isa_available(Isa::Avx2)) {
    hourly_power_avx2(in, p, out);
    return;
  }
#endif
  (void)isa;
  hourly_power_scalar(in, p, out);
}

}  // namespace facadepv::kernels
