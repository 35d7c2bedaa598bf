#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "qmsan/kernels.hpp"
#include "qmsan/rng.hpp"

using qmsan::Rng;
using qmsan::kern::Backend;
using qmsan::kern::c64;

namespace {

std::vector<c64> random_cvec(std::size_t len, Rng& rng) {
  std::vector<c64> v(len);
  for (auto& z : v) z = c64{rng.normal(), rng.normal()};
  return v;
}

std::vector<double> random_rvec(std::size_t len, Rng& rng) {
  std::vector<double> v(len);
  for (auto& x : v) x = rng.normal();
  return v;
}

double max_cdiff(const std::vector<c64>& a, const std::vector<c64>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("scalar backend is always available") {
  CHECK(qmsan::kern::available(Backend::Scalar));
  CHECK(qmsan::kern::ops(Backend::Scalar).name == std::string("scalar"));
}

TEST_CASE("apply_1q scalar sanity: X and identity") {
  const auto& ops = qmsan::kern::ops(Backend::Scalar);
  std::vector<c64> psi = {1.0, 0.0};
  const c64 x_gate[4] = {0.0, 1.0, 1.0, 0.0};
  ops.apply_1q(psi.data(), 2, 1, x_gate);
  CHECK(std::abs(psi[0]) < 1e-15);
  CHECK(std::abs(psi[1] - 1.0) < 1e-15);

  const c64 id[4] = {1.0, 0.0, 0.0, 1.0};
  std::vector<c64> v = {{0.1, 0.2}, {0.3, -0.4}, {0.5, 0.6}, {-0.7, 0.8}};
  auto w = v;
  ops.apply_1q(w.data(), 4, 2, id);
  CHECK(max_cdiff(v, w) == 0.0);
}

TEST_CASE("scalar/avx2 equivalence across kernel table") {
  if (!qmsan::kern::available(Backend::Avx2)) {
    MESSAGE("AVX2 unavailable on this CPU; equivalence suite skipped");
    return;
  }
  const auto& sc = qmsan::kern::ops(Backend::Scalar);
  const auto& vx = qmsan::kern::ops(Backend::Avx2);
  Rng rng(20240917);

  SUBCASE("apply_1q over dims and strides") {
    for (int n = 1; n <= 10; ++n) {
      const std::size_t dim = std::size_t{1} << n;
      for (std::size_t stride = 1; stride < dim; stride *= 2) {
        auto a = random_cvec(dim, rng);
        auto b = a;
        c64 u[4];
        for (auto& z : u) z = c64{rng.normal(), rng.normal()};
        sc.apply_1q(a.data(), dim, stride, u);
        vx.apply_1q(b.data(), dim, stride, u);
        CAPTURE(n);
        CAPTURE(stride);
        CHECK(max_cdiff(a, b) < 1e-13);
      }
    }
  }

  SUBCASE("apply_phase_parity with random masks") {
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 1 + static_cast<int>(rng.uniform_index(9));
      const std::size_t dim = std::size_t{1} << n;
      const std::uint64_t mask = rng.next_u64() & (dim - 1);
      const c64 even{std::cos(0.3 * trial), std::sin(0.3 * trial)};
      const c64 odd{std::cos(1.1 * trial), -std::sin(1.1 * trial)};
      auto a = random_cvec(dim, rng);
      auto b = a;
      sc.apply_phase_parity(a.data(), dim, mask, even, odd);
      vx.apply_phase_parity(b.data(), dim, mask, even, odd);
      CHECK(max_cdiff(a, b) < 1e-13);
    }
  }

  SUBCASE("exp_z reductions") {
    for (int n = 1; n <= 10; ++n) {
      const std::size_t dim = std::size_t{1} << n;
      const auto v = random_cvec(dim, rng);
      for (std::size_t stride = 1; stride < dim; stride *= 2) {
        const double a = sc.exp_z(v.data(), dim, stride);
        const double b = vx.exp_z(v.data(), dim, stride);
        CHECK(std::abs(a - b) < 1e-12 * dim);
      }
    }
  }

  SUBCASE("inner_conj") {
    for (const std::size_t len : {1u, 2u, 3u, 7u, 16u, 255u, 1024u}) {
      const auto a = random_cvec(len, rng);
      const auto b = random_cvec(len, rng);
      const c64 x = sc.inner_conj(a.data(), b.data(), len);
      const c64 y = vx.inner_conj(a.data(), b.data(), len);
      CHECK(std::abs(x - y) < 1e-11);
    }
  }

  SUBCASE("squared_dist and axpy") {
    for (const std::size_t len : {1u, 3u, 4u, 31u, 32u, 1000u}) {
      const auto a = random_rvec(len, rng);
      const auto b = random_rvec(len, rng);
      CHECK(std::abs(sc.squared_dist(a.data(), b.data(), len) -
                     vx.squared_dist(a.data(), b.data(), len)) < 1e-11);

      auto y1 = random_rvec(len, rng);
      auto y2 = y1;
      sc.axpy(y1.data(), a.data(), 0.37, len);
      vx.axpy(y2.data(), a.data(), 0.37, len);
      for (std::size_t i = 0; i < len; ++i) CHECK(std::abs(y1[i] - y2[i]) < 1e-14);
    }
  }

  SUBCASE("adam_update") {
    for (const std::size_t len : {1u, 5u, 64u, 513u}) {
      auto p1 = random_rvec(len, rng);
      auto m1 = random_rvec(len, rng);
      auto v1 = random_rvec(len, rng);
      for (auto& x : v1) x = std::abs(x);  // second moments stay nonnegative
      const auto g = random_rvec(len, rng);
      auto p2 = p1, m2 = m1, v2 = v1;
      sc.adam_update(p1.data(), m1.data(), v1.data(), g.data(), len, 0.01, 0.9, 0.999, 1e-8,
                     0.1, 0.001);
      vx.adam_update(p2.data(), m2.data(), v2.data(), g.data(), len, 0.01, 0.9, 0.999, 1e-8,
                     0.1, 0.001);
      for (std::size_t i = 0; i < len; ++i) {
        CHECK(std::abs(p1[i] - p2[i]) < 1e-12);
        CHECK(std::abs(m1[i] - m2[i]) < 1e-14);
        CHECK(std::abs(v1[i] - v2[i]) < 1e-14);
      }
    }
  }
}

TEST_CASE("dispatch honors QMSAN_SIMD") {
  // active() latches on first call; just confirm it resolves to a known table
  const std::string name = qmsan::kern::active_name();
  CHECK((name == "scalar" || name == "avx2"));
}
