#include <cmath>

#include "clarigen/simd/kernels.h"

namespace clarigen::simd {
namespace {

double dot(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

void mul(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void mul_acc(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += x[i] * y[i];
}

void scale(double alpha, const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a,
             const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      c[i * k + j] += dot(a + i * n, b + j * n, n);
    }
  }
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a,
             const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void adam(double* w, double* grad, double* m, double* v, std::size_t n,
          double beta1, double beta2, double step_size, double v_correction,
          double eps) {
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
    w[i] -= step_size * m[i] / (std::sqrt(v[i] * v_correction) + eps);
    grad[i] = 0.0;
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Backend::kScalar, dot,     axpy,    add,
                                 mul,              mul_acc, scale,   gemm_nn,
                                 gemm_nt,          gemm_tn, adam};
  return table;
}

}  // namespace clarigen::simd
