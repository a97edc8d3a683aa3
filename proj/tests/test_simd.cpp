#include <cmath>
#include <vector>

#include "clarigen/numerics/rng.h"
#include "clarigen/simd/kernels.h"
#include "doctest.h"

using clarigen::numerics::Rng;
namespace simd = clarigen::simd;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

void require_close(const std::vector<double>& a, const std::vector<double>& b,
                   double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    INFO("index " << i);
    CHECK(std::abs(a[i] - b[i]) <= tol * (1.0 + std::abs(a[i])));
  }
}

const std::size_t kSizes[] = {0, 1, 3, 4, 5, 7, 8, 9, 16, 17, 33, 100};

}  // namespace

TEST_CASE("simd: scalar backend is always available") {
  CHECK(simd::backend_available(simd::Backend::kScalar));
  CHECK(simd::scalar_kernels().backend == simd::Backend::kScalar);
}

TEST_CASE("simd: avx2 kernels agree with the scalar reference") {
  if (!simd::backend_available(simd::Backend::kAvx2)) {
    MESSAGE("AVX2 not available on this machine; equivalence not exercised");
    return;
  }
  const auto& ref = simd::scalar_kernels();
  const auto& vec = *simd::avx2_kernels();
  Rng rng(17);
  for (std::size_t n : kSizes) {
    CAPTURE(n);
    const auto x = random_vec(rng, n);
    const auto y = random_vec(rng, n);

    CHECK(std::abs(ref.dot(x.data(), y.data(), n) - vec.dot(x.data(), y.data(), n)) <=
          1e-12 * (1.0 + n));

    auto y1 = y, y2 = y;
    ref.axpy(0.7, x.data(), y1.data(), n);
    vec.axpy(0.7, x.data(), y2.data(), n);
    require_close(y1, y2, 1e-14);

    std::vector<double> o1(n), o2(n);
    ref.add(x.data(), y.data(), o1.data(), n);
    vec.add(x.data(), y.data(), o2.data(), n);
    CHECK(o1 == o2);
    ref.mul(x.data(), y.data(), o1.data(), n);
    vec.mul(x.data(), y.data(), o2.data(), n);
    CHECK(o1 == o2);
    ref.scale(-1.5, x.data(), o1.data(), n);
    vec.scale(-1.5, x.data(), o2.data(), n);
    CHECK(o1 == o2);
    ref.mul_acc(x.data(), y.data(), o1.data(), n);
    vec.mul_acc(x.data(), y.data(), o2.data(), n);
    require_close(o1, o2, 1e-14);
  }
}

TEST_CASE("simd: gemm variants agree with the scalar reference") {
  if (!simd::backend_available(simd::Backend::kAvx2)) return;
  const auto& ref = simd::scalar_kernels();
  const auto& vec = *simd::avx2_kernels();
  Rng rng(5);
  for (std::size_t m : {1u, 3u, 8u}) {
    for (std::size_t k : {1u, 5u, 16u}) {
      for (std::size_t n : {1u, 4u, 7u, 13u}) {
        CAPTURE(m);
        CAPTURE(k);
        CAPTURE(n);
        const auto a = random_vec(rng, m * k);
        const auto b = random_vec(rng, k * n);
        std::vector<double> c1(m * n, 0.5), c2(m * n, 0.5);
        ref.gemm_nn(m, k, n, a.data(), b.data(), c1.data());
        vec.gemm_nn(m, k, n, a.data(), b.data(), c2.data());
        require_close(c1, c2, 1e-12);

        // a[m×n]·b[k×n]ᵀ
        const auto an = random_vec(rng, m * n);
        const auto bn = random_vec(rng, k * n);
        std::vector<double> d1(m * k, 0.0), d2(m * k, 0.0);
        ref.gemm_nt(m, n, k, an.data(), bn.data(), d1.data());
        vec.gemm_nt(m, n, k, an.data(), bn.data(), d2.data());
        require_close(d1, d2, 1e-12);

        // a[m×k]ᵀ·b[m×n]
        const auto bm = random_vec(rng, m * n);
        std::vector<double> e1(k * n, 0.0), e2(k * n, 0.0);
        ref.gemm_tn(m, k, n, a.data(), bm.data(), e1.data());
        vec.gemm_tn(m, k, n, a.data(), bm.data(), e2.data());
        require_close(e1, e2, 1e-12);
      }
    }
  }
}

TEST_CASE("simd: adam update is bit-identical across backends") {
  if (!simd::backend_available(simd::Backend::kAvx2)) return;
  Rng rng(3);
  for (std::size_t n : kSizes) {
    auto w1 = random_vec(rng, n), g1 = random_vec(rng, n);
    auto m1 = random_vec(rng, n), v1 = random_vec(rng, n);
    for (double& v : v1) v = std::abs(v);
    auto w2 = w1, g2 = g1, m2 = m1, v2 = v1;
    simd::scalar_kernels().adam(w1.data(), g1.data(), m1.data(), v1.data(), n, 0.9,
                                0.999, 1e-3, 1.0 / (1.0 - 0.999), 1e-8);
    simd::avx2_kernels()->adam(w2.data(), g2.data(), m2.data(), v2.data(), n, 0.9,
                               0.999, 1e-3, 1.0 / (1.0 - 0.999), 1e-8);
    CHECK(w1 == w2);
    CHECK(m1 == m2);
    CHECK(v1 == v2);
    CHECK(g1 == std::vector<double>(n, 0.0));
    CHECK(g2 == std::vector<double>(n, 0.0));
  }
}

TEST_CASE("simd: gemm rows do not depend on the rest of the batch") {
  Rng rng(11);
  const std::size_t m = 6, k = 9, n = 11;
  const auto a = random_vec(rng, m * k);
  const auto b = random_vec(rng, k * n);
  for (auto backend : {simd::Backend::kScalar, simd::Backend::kAvx2}) {
    if (!simd::backend_available(backend)) continue;
    const auto& kt = backend == simd::Backend::kAvx2 ? *simd::avx2_kernels()
                                                      : simd::scalar_kernels();
    std::vector<double> full(m * n, 0.0);
    kt.gemm_nn(m, k, n, a.data(), b.data(), full.data());
    for (std::size_t r = 0; r < m; ++r) {
      std::vector<double> single(n, 0.0);
      kt.gemm_nn(1, k, n, a.data() + r * k, b.data(), single.data());
      CHECK(std::vector<double>(full.begin() + r * n, full.begin() + (r + 1) * n) ==
            single);
    }
  }
}

TEST_CASE("simd: backend can be forced and restored") {
  const auto before = simd::active_backend();
  simd::set_backend(simd::Backend::kScalar);
  CHECK(simd::active_backend() == simd::Backend::kScalar);
  simd::set_backend(before);
  CHECK(simd::active_backend() == before);
  CHECK(simd::backend_name(simd::Backend::kAvx2) == "avx2");
}
