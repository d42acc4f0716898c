// Compiled with -mavx2 -mfma. Nothing in here may run before the dispatcher
// has confirmed CPU support.

#include <immintrin.h>

#include <algorithm>

#include "phagoq/simd/kernels.hpp"

namespace phagoq::simd {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

void axpy_avx2(float* y, const float* x, float a, std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    __m256 y0 = _mm256_loadu_ps(y + i);
    __m256 y1 = _mm256_loadu_ps(y + i + 8);
    __m256 y2 = _mm256_loadu_ps(y + i + 16);
    __m256 y3 = _mm256_loadu_ps(y + i + 24);
    y0 = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), y0);
    y1 = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i + 8), y1);
    y2 = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i + 16), y2);
    y3 = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i + 24), y3);
    _mm256_storeu_ps(y + i, y0);
    _mm256_storeu_ps(y + i + 8, y1);
    _mm256_storeu_ps(y + i + 16, y2);
    _mm256_storeu_ps(y + i + 24, y3);
  }
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void laplace_row_avx2(const float* up, const float* mid, const float* down, float* dst, std::size_t n) {
  const __m256 four = _mm256_set1_ps(4.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 s = _mm256_add_ps(_mm256_loadu_ps(up + i), _mm256_loadu_ps(down + i));
    s = _mm256_add_ps(s, _mm256_loadu_ps(mid + i - 1));
    s = _mm256_add_ps(s, _mm256_loadu_ps(mid + i + 1));
    s = _mm256_fnmadd_ps(four, _mm256_loadu_ps(mid + i), s);
    _mm256_storeu_ps(dst + i, s);
  }
  for (; i < n; ++i) dst[i] = up[i] + down[i] + mid[i - 1] + mid[i + 1] - 4.0f * mid[i];
}

void blend4_row_avx2(const float* a0, const float* a1, const float* b0, const float* b1, float w00, float w01,
                     float w10, float w11, float* dst, std::size_t n) {
  const __m256 v00 = _mm256_set1_ps(w00);
  const __m256 v01 = _mm256_set1_ps(w01);
  const __m256 v10 = _mm256_set1_ps(w10);
  const __m256 v11 = _mm256_set1_ps(w11);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 s = _mm256_mul_ps(v00, _mm256_loadu_ps(a0 + i));
    s = _mm256_fmadd_ps(v01, _mm256_loadu_ps(a1 + i), s);
    s = _mm256_fmadd_ps(v10, _mm256_loadu_ps(b0 + i), s);
    s = _mm256_fmadd_ps(v11, _mm256_loadu_ps(b1 + i), s);
    _mm256_storeu_ps(dst + i, s);
  }
  for (; i < n; ++i) dst[i] = w00 * a0[i] + w01 * a1[i] + w10 * b0[i] + w11 * b1[i];
}

void diff_row_avx2(const float* plus, const float* minus, float scale, float* dst, std::size_t n) {
  const __m256 vs = _mm256_set1_ps(scale);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 d = _mm256_sub_ps(_mm256_loadu_ps(plus + i), _mm256_loadu_ps(minus + i));
    _mm256_storeu_ps(dst + i, _mm256_mul_ps(vs, d));
  }
  for (; i < n; ++i) dst[i] = scale * (plus[i] - minus[i]);
}

void ecc_moments_avx2(const float* tmpl, const float* img, const float* gx, const float* gy, std::size_t n,
                      MomentSums& acc) {
  __m256d s[kMomentCount];
  for (auto& v : s) v = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d t = _mm256_cvtps_pd(_mm_loadu_ps(tmpl + i));
    const __m256d v = _mm256_cvtps_pd(_mm_loadu_ps(img + i));
    const __m256d x = _mm256_cvtps_pd(_mm_loadu_ps(gx + i));
    const __m256d y = _mm256_cvtps_pd(_mm_loadu_ps(gy + i));
    s[kSumT] = _mm256_add_pd(s[kSumT], t);
    s[kSumI] = _mm256_add_pd(s[kSumI], v);
    s[kSumTT] = _mm256_fmadd_pd(t, t, s[kSumTT]);
    s[kSumII] = _mm256_fmadd_pd(v, v, s[kSumII]);
    s[kSumTI] = _mm256_fmadd_pd(t, v, s[kSumTI]);
    s[kSumGx] = _mm256_add_pd(s[kSumGx], x);
    s[kSumGy] = _mm256_add_pd(s[kSumGy], y);
    s[kSumGxGx] = _mm256_fmadd_pd(x, x, s[kSumGxGx]);
    s[kSumGxGy] = _mm256_fmadd_pd(x, y, s[kSumGxGy]);
    s[kSumGyGy] = _mm256_fmadd_pd(y, y, s[kSumGyGy]);
    s[kSumGxI] = _mm256_fmadd_pd(x, v, s[kSumGxI]);
    s[kSumGyI] = _mm256_fmadd_pd(y, v, s[kSumGyI]);
    s[kSumGxT] = _mm256_fmadd_pd(x, t, s[kSumGxT]);
    s[kSumGyT] = _mm256_fmadd_pd(y, t, s[kSumGyT]);
  }
  MomentSums tail{};
  for (; i < n; ++i) {
    const double t = tmpl[i];
    const double v = img[i];
    const double x = gx[i];
    const double y = gy[i];
    tail[kSumT] += t;
    tail[kSumI] += v;
    tail[kSumTT] += t * t;
    tail[kSumII] += v * v;
    tail[kSumTI] += t * v;
    tail[kSumGx] += x;
    tail[kSumGy] += y;
    tail[kSumGxGx] += x * x;
    tail[kSumGxGy] += x * y;
    tail[kSumGyGy] += y * y;
    tail[kSumGxI] += x * v;
    tail[kSumGyI] += y * v;
    tail[kSumGxT] += x * t;
    tail[kSumGyT] += y * t;
  }
  for (std::size_t k = 0; k < kMomentCount; ++k) acc[k] += hsum(s[k]) + tail[k];
}

void sum_sumsq_avx2(const float* x, std::size_t n, double* sum, double* sumsq) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  __m256d q0 = _mm256_setzero_pd();
  __m256d q1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256d lo = _mm256_cvtps_pd(_mm256_castps256_ps128(v));
    const __m256d hi = _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1));
    s0 = _mm256_add_pd(s0, lo);
    s1 = _mm256_add_pd(s1, hi);
    q0 = _mm256_fmadd_pd(lo, lo, q0);
    q1 = _mm256_fmadd_pd(hi, hi, q1);
  }
  double s = hsum(_mm256_add_pd(s0, s1));
  double q = hsum(_mm256_add_pd(q0, q1));
  for (; i < n; ++i) {
    const double v = x[i];
    s += v;
    q += v * v;
  }
  *sum += s;
  *sumsq += q;
}

void clamp01_avx2(float* x, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  const __m256 one = _mm256_set1_ps(1.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(x + i, _mm256_min_ps(_mm256_max_ps(_mm256_loadu_ps(x + i), zero), one));
  }
  for (; i < n; ++i) x[i] = std::clamp(x[i], 0.0f, 1.0f);
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{
      Level::Avx2,     "avx2",           axpy_avx2,      laplace_row_avx2, blend4_row_avx2,
      diff_row_avx2,   ecc_moments_avx2, sum_sumsq_avx2, clamp01_avx2,
  };
  return table;
}

}  // namespace phagoq::simd
