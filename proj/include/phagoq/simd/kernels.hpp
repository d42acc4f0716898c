#pragma once

// Inner-loop kernels shared by the raster operations.
//
// Every kernel has a portable scalar reference in kernels_scalar.cpp and, on
// x86-64, an AVX2+FMA variant in kernels_avx2.cpp. The variant is chosen once
// at startup from CPUID; PHAGOQ_SIMD=scalar forces the reference path.
// Callers only ever go through a KernelTable so both paths stay testable in
// one binary.

#include <array>
#include <cstddef>
#include <string_view>

namespace phagoq::simd {

enum class Level { Scalar, Avx2 };

// Sums accumulated by ecc_moments, in this order.
enum Moment : std::size_t {
  kSumT,
  kSumI,
  kSumTT,
  kSumII,
  kSumTI,
  kSumGx,
  kSumGy,
  kSumGxGx,
  kSumGxGy,
  kSumGyGy,
  kSumGxI,
  kSumGyI,
  kSumGxT,
  kSumGyT,
  kMomentCount
};

using MomentSums = std::array<double, kMomentCount>;

struct KernelTable {
  Level level;
  std::string_view name;

  // y[i] += a * x[i]
  void (*axpy)(float* y, const float* x, float a, std::size_t n);

  // dst[i] = up[i] + down[i] + mid[i-1] + mid[i+1] - 4 mid[i].
  // mid[-1] and mid[n] must be readable.
  void (*laplace_row)(const float* up, const float* mid, const float* down, float* dst, std::size_t n);

  // dst[i] = w00 a0[i] + w01 a1[i] + w10 b0[i] + w11 b1[i]
  void (*blend4_row)(const float* a0, const float* a1, const float* b0, const float* b1, float w00, float w01,
                     float w10, float w11, float* dst, std::size_t n);

  // dst[i] = scale * (plus[i] - minus[i])
  void (*diff_row)(const float* plus, const float* minus, float scale, float* dst, std::size_t n);

  // Adds the ECC moment sums of one row to acc (double accumulation).
  void (*ecc_moments)(const float* tmpl, const float* img, const float* gx, const float* gy, std::size_t n,
                      MomentSums& acc);

  // *sum += sum x[i], *sumsq += sum x[i]^2 (double accumulation).
  void (*sum_sumsq)(const float* x, std::size_t n, double* sum, double* sumsq);

  // x[i] = min(max(x[i], 0), 1)
  void (*clamp01)(float* x, std::size_t n);
};

const KernelTable& scalar_kernels();

// Null when the build or the CPU lacks the instruction set.
const KernelTable* avx2_kernels();

// The table selected for this process.
const KernelTable& active();

// Table for a level; falls back to scalar when unavailable.
const KernelTable& for_level(Level level);

bool cpu_has_avx2();

}  // namespace phagoq::simd
