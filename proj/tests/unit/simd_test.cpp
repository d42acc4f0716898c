#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "generators.hpp"
#include "phagoq/imgcore/ops.hpp"
#include "phagoq/simd/kernels.hpp"

using namespace phagoq;

namespace {

std::vector<float> random_vec(std::size_t n, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(lo, hi);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

const simd::KernelTable* vector_table() {
  const simd::KernelTable* t = simd::avx2_kernels();
  if (t == nullptr) MESSAGE("AVX2 unavailable on this CPU; equivalence checks reduce to scalar vs scalar");
  return t != nullptr ? t : &simd::scalar_kernels();
}

constexpr std::size_t kLengths[] = {0, 1, 3, 7, 8, 9, 31, 32, 33, 100, 257};

}  // namespace

TEST_SUITE("simd") {
  TEST_CASE("dispatcher returns a usable table") {
    const auto& k = simd::active();
    CHECK(!k.name.empty());
    CHECK(&simd::for_level(simd::Level::Scalar) == &simd::scalar_kernels());
    if (simd::cpu_has_avx2()) CHECK(simd::avx2_kernels() != nullptr);
  }

  TEST_CASE("axpy matches scalar reference") {
    const auto& s = simd::scalar_kernels();
    const auto* v = vector_table();
    for (std::size_t n : kLengths) {
      auto x = random_vec(n, 1 + n);
      auto y1 = random_vec(n, 100 + n);
      auto y2 = y1;
      s.axpy(y1.data(), x.data(), 0.37f, n);
      v->axpy(y2.data(), x.data(), 0.37f, n);
      for (std::size_t i = 0; i < n; ++i) CHECK(y2[i] == doctest::Approx(y1[i]).epsilon(1e-6));
    }
  }

  TEST_CASE("laplace_row matches scalar reference") {
    const auto& s = simd::scalar_kernels();
    const auto* v = vector_table();
    for (std::size_t n : kLengths) {
      auto up = random_vec(n, 3);
      auto mid = random_vec(n + 2, 4);
      auto down = random_vec(n, 5);
      std::vector<float> a(n), b(n);
      s.laplace_row(up.data(), mid.data() + 1, down.data(), a.data(), n);
      v->laplace_row(up.data(), mid.data() + 1, down.data(), b.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-5));
    }
  }

  TEST_CASE("blend4_row and diff_row match scalar reference") {
    const auto& s = simd::scalar_kernels();
    const auto* v = vector_table();
    for (std::size_t n : kLengths) {
      auto a = random_vec(n + 1, 6, 0, 1);
      auto b = random_vec(n + 1, 7, 0, 1);
      std::vector<float> r1(n), r2(n);
      s.blend4_row(a.data(), a.data() + 1, b.data(), b.data() + 1, 0.42f, 0.18f, 0.28f, 0.12f, r1.data(), n);
      v->blend4_row(a.data(), a.data() + 1, b.data(), b.data() + 1, 0.42f, 0.18f, 0.28f, 0.12f, r2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(r2[i] == doctest::Approx(r1[i]).epsilon(1e-6));
      s.diff_row(a.data(), b.data(), 0.5f, r1.data(), n);
      v->diff_row(a.data(), b.data(), 0.5f, r2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(r2[i] == r1[i]);
    }
  }

  TEST_CASE("ecc_moments and sum_sumsq match scalar reference") {
    const auto& s = simd::scalar_kernels();
    const auto* v = vector_table();
    for (std::size_t n : kLengths) {
      auto t = random_vec(n, 8, 0, 1);
      auto i = random_vec(n, 9, 0, 1);
      auto gx = random_vec(n, 10);
      auto gy = random_vec(n, 11);
      simd::MomentSums m1{}, m2{};
      s.ecc_moments(t.data(), i.data(), gx.data(), gy.data(), n, m1);
      v->ecc_moments(t.data(), i.data(), gx.data(), gy.data(), n, m2);
      for (std::size_t k = 0; k < simd::kMomentCount; ++k) CHECK(m2[k] == doctest::Approx(m1[k]).epsilon(1e-12));
      double s1 = 0, q1 = 0, s2 = 0, q2 = 0;
      s.sum_sumsq(t.data(), n, &s1, &q1);
      v->sum_sumsq(t.data(), n, &s2, &q2);
      CHECK(s2 == doctest::Approx(s1).epsilon(1e-12));
      CHECK(q2 == doctest::Approx(q1).epsilon(1e-12));
    }
  }

  TEST_CASE("clamp01 is exact on both paths") {
    const auto& s = simd::scalar_kernels();
    const auto* v = vector_table();
    auto x1 = random_vec(77, 12, -0.5f, 1.5f);
    auto x2 = x1;
    s.clamp01(x1.data(), x1.size());
    v->clamp01(x2.data(), x2.size());
    CHECK(x1 == x2);
  }

  TEST_CASE("whole-frame operators agree across kernel tables") {
    const auto& s = simd::scalar_kernels();
    const auto* v = vector_table();
    const Frame f = testing::random_frame(53, 41, 99);
    const auto spec = GaussianSpec::from_kernel_size(9);
    const Frame g1 = gaussian_smooth(f, spec, BorderMode::Reflect, s);
    const Frame g2 = gaussian_smooth(f, spec, BorderMode::Reflect, *v);
    const Field l1 = laplacian5(f, BorderMode::Reflect, s);
    const Field l2 = laplacian5(f, BorderMode::Reflect, *v);
    const Frame w1 = warp_translate(f, 2.3, -1.6, s);
    const Frame w2 = warp_translate(f, 2.3, -1.6, *v);
    for (std::size_t i = 0; i < f.size(); ++i) {
      CHECK(std::abs(g1.pixels()[i] - g2.pixels()[i]) < 1e-6f);
      CHECK(std::abs(l1.pixels()[i] - l2.pixels()[i]) < 1e-5f);
      CHECK(std::abs(w1.pixels()[i] - w2.pixels()[i]) < 1e-6f);
    }
  }
}
