#include <cstdlib>
#include <string_view>

#include "phagoq/simd/kernels.hpp"

namespace phagoq::simd {

#if defined(PHAGOQ_HAVE_AVX2_TU)
const KernelTable& avx2_table();
#endif

bool cpu_has_avx2() {
#if defined(PHAGOQ_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* avx2_kernels() {
#if defined(PHAGOQ_HAVE_AVX2_TU)
  if (cpu_has_avx2()) return &avx2_table();
#endif
  return nullptr;
}

const KernelTable& for_level(Level level) {
  if (level == Level::Avx2) {
    if (const KernelTable* t = avx2_kernels()) return *t;
  }
  return scalar_kernels();
}

namespace {

const KernelTable& select() {
  if (const char* env = std::getenv("PHAGOQ_SIMD")) {
    if (std::string_view(env) == "scalar") return scalar_kernels();
  }
  return for_level(Level::Avx2);
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace phagoq::simd
