#include <atomic>
#include <cstdlib>
#include <string>

#include "clarigen/simd/kernels.h"

namespace clarigen::simd {

#if !defined(CLARIGEN_HAVE_AVX2)
const KernelTable* avx2_kernels() { return nullptr; }
#endif

namespace {

bool cpu_has_avx2() {
#if defined(CLARIGEN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  const char* forced = std::getenv("CLARIGEN_SIMD");
  if (forced != nullptr && std::string(forced) == "scalar") {
    return &scalar_kernels();
  }
  if (backend_available(Backend::kAvx2)) return avx2_kernels();
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

bool backend_available(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
      return avx2_kernels() != nullptr && cpu_has_avx2();
  }
  return false;
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

Backend active_backend() { return active().backend; }

void set_backend(Backend b) {
  if (!backend_available(b)) b = Backend::kScalar;
  current().store(b == Backend::kAvx2 ? avx2_kernels() : &scalar_kernels());
}

std::string_view backend_name(Backend b) {
  return b == Backend::kAvx2 ? "avx2" : "scalar";
}

}  // namespace clarigen::simd
