#pragma once

// Double-precision inner loops behind the tensor ops. Every kernel has a
// portable scalar reference and, on x86-64, an AVX2+FMA variant selected at
// runtime. All matrices are dense row-major.
//
// Output rows of the gemm kernels depend only on the matching input row, so a
// row's result is independent of the other rows in the batch.

#include <cstddef>
#include <string_view>

namespace clarigen::simd {

enum class Backend { kScalar, kAvx2 };

struct KernelTable {
  Backend backend;

  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out = x + y
  void (*add)(const double* x, const double* y, double* out, std::size_t n);
  // out = x * y (elementwise)
  void (*mul)(const double* x, const double* y, double* out, std::size_t n);
  // out += x * y (elementwise)
  void (*mul_acc)(const double* x, const double* y, double* out, std::size_t n);
  void (*scale)(double alpha, const double* x, double* out, std::size_t n);

  // c[m×n] += a[m×k] · b[k×n]
  void (*gemm_nn)(std::size_t m, std::size_t k, std::size_t n, const double* a,
                  const double* b, double* c);
  // c[m×k] += a[m×n] · b[k×n]ᵀ
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);
  // c[k×n] += a[m×k]ᵀ · b[m×n]
  void (*gemm_tn)(std::size_t m, std::size_t k, std::size_t n, const double* a,
                  const double* b, double* c);

  // One Adam update over a contiguous block; grad is zeroed afterwards.
  // step_size already folds in the first-moment bias correction and
  // v_correction is 1/(1 - beta2^t).
  void (*adam)(double* w, double* grad, double* m, double* v, std::size_t n,
               double beta1, double beta2, double step_size,
               double v_correction, double eps);
};

const KernelTable& scalar_kernels();
// Null when the binary was built without AVX2 support for this target.
const KernelTable* avx2_kernels();

bool backend_available(Backend b);

// The table used by the tensor ops. Chosen once from CPU features; the
// CLARIGEN_SIMD environment variable ("scalar" or "avx2") overrides it.
const KernelTable& active();
Backend active_backend();
void set_backend(Backend b);

std::string_view backend_name(Backend b);

}  // namespace clarigen::simd
