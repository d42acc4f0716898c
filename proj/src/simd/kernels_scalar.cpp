#include "phagoq/simd/kernels.hpp"

#include <algorithm>

namespace phagoq::simd {
namespace {

void axpy_scalar(float* y, const float* x, float a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void laplace_row_scalar(const float* up, const float* mid, const float* down, float* dst, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    dst[i] = up[i] + down[i] + mid[i - 1] + mid[i + 1] - 4.0f * mid[i];
  }
}

void blend4_row_scalar(const float* a0, const float* a1, const float* b0, const float* b1, float w00, float w01,
                       float w10, float w11, float* dst, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    dst[i] = w00 * a0[i] + w01 * a1[i] + w10 * b0[i] + w11 * b1[i];
  }
}

void diff_row_scalar(const float* plus, const float* minus, float scale, float* dst, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = scale * (plus[i] - minus[i]);
}

void ecc_moments_scalar(const float* tmpl, const float* img, const float* gx, const float* gy, std::size_t n,
                        MomentSums& acc) {
  MomentSums s{};
  for (std::size_t i = 0; i < n; ++i) {
    const double t = tmpl[i];
    const double v = img[i];
    const double x = gx[i];
    const double y = gy[i];
    s[kSumT] += t;
    s[kSumI] += v;
    s[kSumTT] += t * t;
    s[kSumII] += v * v;
    s[kSumTI] += t * v;
    s[kSumGx] += x;
    s[kSumGy] += y;
    s[kSumGxGx] += x * x;
    s[kSumGxGy] += x * y;
    s[kSumGyGy] += y * y;
    s[kSumGxI] += x * v;
    s[kSumGyI] += y * v;
    s[kSumGxT] += x * t;
    s[kSumGyT] += y * t;
  }
  for (std::size_t k = 0; k < kMomentCount; ++k) acc[k] += s[k];
}

void sum_sumsq_scalar(const float* x, std::size_t n, double* sum, double* sumsq) {
  double s = 0.0;
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x[i];
    s += v;
    q += v * v;
  }
  *sum += s;
  *sumsq += q;
}

void clamp01_scalar(float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], 0.0f, 1.0f);
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      Level::Scalar,     "scalar",           axpy_scalar,      laplace_row_scalar, blend4_row_scalar,
      diff_row_scalar,   ecc_moments_scalar, sum_sumsq_scalar, clamp01_scalar,
  };
  return table;
}

}  // namespace phagoq::simd
