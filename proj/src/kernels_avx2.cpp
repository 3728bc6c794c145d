// Compiled with -mavx2 -mfma; only reached after the runtime CPU check.
#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "facadepv/kernels.hpp"

namespace facadepv::kernels {

namespace {

// Cephes exp(): range reduction by ln 2 and a (3,4) rational approximation
// of exp on [-ln2/2, ln2/2]. Within 2 ulp of std::exp for |x| < 708.
inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(708.0);
  const __m256d lo = _mm256_set1_pd(-708.0);
  x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const __m256d fx = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634073599)),
                                     _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_sub_pd(x, _mm256_mul_pd(fx, _mm256_set1_pd(6.93145751953125E-1)));
  x = _mm256_sub_pd(x, _mm256_mul_pd(fx, _mm256_set1_pd(1.42860682030941723212E-6)));

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d px = _mm256_set1_pd(1.26177193074810590878E-4);
  px = _mm256_add_pd(_mm256_mul_pd(px, xx), _mm256_set1_pd(3.02994407707441961300E-2));
  px = _mm256_add_pd(_mm256_mul_pd(px, xx), _mm256_set1_pd(9.99999999999999999910E-1));
  px = _mm256_mul_pd(px, x);
  __m256d qx = _mm256_set1_pd(3.00198505138664455042E-6);
  qx = _mm256_add_pd(_mm256_mul_pd(qx, xx), _mm256_set1_pd(2.52448340349684104192E-3));
  qx = _mm256_add_pd(_mm256_mul_pd(qx, xx), _mm256_set1_pd(2.27265548208155028766E-1));
  qx = _mm256_add_pd(_mm256_mul_pd(qx, xx), _mm256_set1_pd(2.00000000000000000009E0));

  __m256d r = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  r = _mm256_add_pd(_mm256_set1_pd(1.0), _mm256_add_pd(r, r));

  // 2^fx assembled in the exponent field
  const __m128i n32 = _mm256_cvtpd_epi32(fx);
  __m256i n64 = _mm256_cvtepi32_epi64(n32);
  n64 = _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(r, _mm256_castsi256_pd(n64));
}

}  // namespace

void hourly_power_avx2(const HourlyInputs& in, const HourlyParams& p, const HourlyOutputs& out) {
  const std::size_t n = in.size();
  const std::size_t body = n - n % 4;

  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d ne = _mm256_set1_pd(p.normal_east);
  const __m256d nn = _mm256_set1_pd(p.normal_north);
  const __m256d nu = _mm256_set1_pd(p.normal_up);
  const __m256d df = _mm256_set1_pd(p.diffuse_factor);
  const __m256d gf = _mm256_set1_pd(p.ground_factor);
  const __m256d a = _mm256_set1_pd(p.a);
  const __m256d b = _mm256_set1_pd(p.b);
  const __m256d e0 = _mm256_set1_pd(p.e0);
  const __m256d dt = _mm256_set1_pd(p.delta_t);
  const __m256d ae = _mm256_set1_pd(p.area_efficiency);
  const __m256d gamma = _mm256_set1_pd(p.gamma);
  const __m256d t_ref = _mm256_set1_pd(25.0);
  const __m256d ac = _mm256_set1_pd(p.ac_factor);

  for (std::size_t i = 0; i < body; i += 4) {
    const __m256d up = _mm256_loadu_pd(&in.sun_up[i]);
    const __m256d day = _mm256_cmp_pd(up, zero, _CMP_GT_OQ);

    __m256d cos_aoi = _mm256_mul_pd(_mm256_loadu_pd(&in.sun_east[i]), ne);
    cos_aoi = _mm256_add_pd(cos_aoi, _mm256_mul_pd(_mm256_loadu_pd(&in.sun_north[i]), nn));
    cos_aoi = _mm256_add_pd(cos_aoi, _mm256_mul_pd(up, nu));

    const __m256d e_dir =
        _mm256_and_pd(day, _mm256_mul_pd(_mm256_loadu_pd(&in.dni[i]), _mm256_max_pd(cos_aoi, zero)));
    const __m256d e_dif = _mm256_and_pd(day, _mm256_mul_pd(_mm256_loadu_pd(&in.dhi[i]), df));
    const __m256d e_ref = _mm256_and_pd(day, _mm256_mul_pd(_mm256_loadu_pd(&in.ghi[i]), gf));
    const __m256d poa = _mm256_add_pd(_mm256_add_pd(e_dir, e_dif), e_ref);

    const __m256d ta = _mm256_loadu_pd(&in.temp_air[i]);
    const __m256d ws = _mm256_loadu_pd(&in.wind_speed[i]);
    const __m256d t_module = _mm256_add_pd(_mm256_mul_pd(poa, exp_pd(_mm256_add_pd(a, _mm256_mul_pd(b, ws)))), ta);
    const __m256d t_cell = _mm256_add_pd(t_module, _mm256_mul_pd(_mm256_div_pd(poa, e0), dt));

    const __m256d derate = _mm256_add_pd(one, _mm256_mul_pd(gamma, _mm256_sub_pd(t_cell, t_ref)));
    const __m256d p_dc = _mm256_max_pd(_mm256_mul_pd(_mm256_mul_pd(poa, ae), derate), zero);

    _mm256_storeu_pd(&out.e_dir[i], e_dir);
    _mm256_storeu_pd(&out.e_dif[i], e_dif);
    _mm256_storeu_pd(&out.e_ref[i], e_ref);
    _mm256_storeu_pd(&out.poa[i], poa);
    _mm256_storeu_pd(&out.t_cell[i], _mm256_blendv_pd(ta, t_cell, day));
    _mm256_storeu_pd(&out.p_dc[i], p_dc);
    _mm256_storeu_pd(&out.p_ac[i], _mm256_mul_pd(p_dc, ac));
  }

  if (body < n) {
    const auto tail = [&](auto s) { return s.subspan(body); };
    const HourlyInputs rest{tail(in.sun_east), tail(in.sun_north), tail(in.sun_up), tail(in.dni),
                            tail(in.dhi),      tail(in.ghi),       tail(in.temp_air), tail(in.wind_speed)};
    const HourlyOutputs rest_out{tail(out.e_dir), tail(out.e_dif), tail(out.e_ref), tail(out.poa),
                                 tail(out.t_cell), tail(out.p_dc), tail(out.p_ac)};
    hourly_power_scalar(rest, p, rest_out);
  }
}

}  // namespace facadepv::kernels
