// AVX2+FMA variants of the kernel table. This translation unit is compiled
// with -mavx2 -mfma; dispatch.cpp only hands out the table after a runtime
// CPU check, so nothing here executes on machines without the extensions.

#include "qmsan/kernels.hpp"

#if defined(QMSAN_HAVE_AVX2)

#include <immintrin.h>

#include <bit>
#include <cmath>

namespace qmsan::kern::avx2 {
namespace {

// lane-pairwise complex product of [a0, a1] and [b0, b1]
inline __m256d cmul(__m256d va, __m256d vb) {
  const __m256d vb_re = _mm256_movedup_pd(vb);
  const __m256d vb_im = _mm256_permute_pd(vb, 0xF);
  const __m256d va_sw = _mm256_permute_pd(va, 0x5);
  return _mm256_fmaddsub_pd(va, vb_re, _mm256_mul_pd(va_sw, vb_im));
}

// lane-pairwise a * conj(b)
inline __m256d cmul_conj(__m256d va, __m256d vb) {
  const __m256d vb_re = _mm256_movedup_pd(vb);
  const __m256d vb_im = _mm256_permute_pd(vb, 0xF);
  const __m256d va_sw = _mm256_permute_pd(va, 0x5);
  return _mm256_fmsubadd_pd(va, vb_re, _mm256_mul_pd(va_sw, vb_im));
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline __m256d broadcast_c64(c64 z) {
  return _mm256_setr_pd(z.real(), z.imag(), z.real(), z.imag());
}

}  // namespace

void apply_1q(c64* psi, std::size_t dim, std::size_t stride, const c64 u[4]) {
  double* p = reinterpret_cast<double*>(psi);
  if (stride >= 2) {
    const __m256d u00 = broadcast_c64(u[0]);
    const __m256d u01 = broadcast_c64(u[1]);
    const __m256d u10 = broadcast_c64(u[2]);
    const __m256d u11 = broadcast_c64(u[3]);
    for (std::size_t base = 0; base < dim; base += 2 * stride) {
      for (std::size_t i = base; i < base + stride; i += 2) {
        double* pa = p + 2 * i;
        double* pb = p + 2 * (i + stride);
        const __m256d a = _mm256_loadu_pd(pa);
        const __m256d b = _mm256_loadu_pd(pb);
        _mm256_storeu_pd(pa, _mm256_add_pd(cmul(a, u00), cmul(b, u01)));
        _mm256_storeu_pd(pb, _mm256_add_pd(cmul(a, u10), cmul(b, u11)));
      }
    }
    return;
  }
  // stride == 1: one (a, b) pair per 256-bit vector
  const __m256d d1 = _mm256_setr_pd(u[0].real(), u[0].imag(), u[3].real(), u[3].imag());
  const __m256d d2 = _mm256_setr_pd(u[1].real(), u[1].imag(), u[2].real(), u[2].imag());
  for (std::size_t i = 0; i < dim; i += 2) {
    double* pa = p + 2 * i;
    const __m256d ab = _mm256_loadu_pd(pa);
    const __m256d ba = _mm256_permute2f128_pd(ab, ab, 0x01);
    _mm256_storeu_pd(pa, _mm256_add_pd(cmul(ab, d1), cmul(ba, d2)));
  }
}

void apply_phase_parity(c64* psi, std::size_t dim, std::uint64_t mask, c64 even, c64 odd) {
  double* p = reinterpret_cast<double*>(psi);
  __m256d tab[4];
  tab[0] = _mm256_setr_pd(even.real(), even.imag(), even.real(), even.imag());
  tab[1] = _mm256_setr_pd(even.real(), even.imag(), odd.real(), odd.imag());
  tab[2] = _mm256_setr_pd(odd.real(), odd.imag(), even.real(), even.imag());
  tab[3] = _mm256_setr_pd(odd.real(), odd.imag(), odd.real(), odd.imag());
  for (std::size_t i = 0; i < dim; i += 2) {
    const unsigned p0 = std::popcount(i & mask) & 1u;
    const unsigned p1 = std::popcount((i + 1) & mask) & 1u;
    const __m256d v = _mm256_loadu_pd(p + 2 * i);
    _mm256_storeu_pd(p + 2 * i, cmul(v, tab[(p0 << 1) | p1]));
  }
}

double exp_z(const c64* psi, std::size_t dim, std::size_t stride) {
  const double* p = reinterpret_cast<const double*>(psi);
  if (stride == 1) {
    // lanes accumulate [re+, im+, re-, im-]
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < dim; i += 2) {
      const __m256d v = _mm256_loadu_pd(p + 2 * i);
      acc = _mm256_fmadd_pd(v, v, acc);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    return (lanes[0] + lanes[1]) - (lanes[2] + lanes[3]);
  }
  __m256d plus = _mm256_setzero_pd();
  __m256d minus = _mm256_setzero_pd();
  for (std::size_t base = 0; base < dim; base += 2 * stride) {
    for (std::size_t i = base; i < base + stride; i += 2) {
      const __m256d a = _mm256_loadu_pd(p + 2 * i);
      const __m256d b = _mm256_loadu_pd(p + 2 * (i + stride));
      plus = _mm256_fmadd_pd(a, a, plus);
      minus = _mm256_fmadd_pd(b, b, minus);
    }
  }
  return hsum(plus) - hsum(minus);
}

c64 inner_conj(const c64* a, const c64* b, std::size_t len) {
  const double* pa = reinterpret_cast<const double*>(a);
  const double* pb = reinterpret_cast<const double*>(b);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= len; i += 2) {
    const __m256d va = _mm256_loadu_pd(pa + 2 * i);
    const __m256d vb = _mm256_loadu_pd(pb + 2 * i);
    acc = _mm256_add_pd(acc, cmul_conj(va, vb));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double re = lanes[0] + lanes[2];
  double im = lanes[1] + lanes[3];
  for (; i < len; ++i) {
    const c64 v = a[i] * std::conj(b[i]);
    re += v.real();
    im += v.imag();
  }
  return {re, im};
}

double squared_dist(const double* a, const double* b, std::size_t len) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= len; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double tail = 0.0;
  for (; i < len; ++i) {
    const double d = a[i] - b[i];
    tail += d * d;
  }
  return hsum(acc) + tail;
}

void axpy(double* y, const double* x, double alpha, std::size_t len) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= len; i += 4) {
    const __m256d vy = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy));
  }
  for (; i < len; ++i) y[i] += alpha * x[i];
}

void adam_update(double* p, double* m, double* v, const double* g, std::size_t len,
                 double lr, double beta1, double beta2, double eps,
                 double bc1, double bc2) {
  const __m256d vb1 = _mm256_set1_pd(beta1);
  const __m256d vb1c = _mm256_set1_pd(1.0 - beta1);
  const __m256d vb2 = _mm256_set1_pd(beta2);
  const __m256d vb2c = _mm256_set1_pd(1.0 - beta2);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vbc1 = _mm256_set1_pd(bc1);
  const __m256d vbc2 = _mm256_set1_pd(bc2);
  std::size_t i = 0;
  for (; i + 4 <= len; i += 4) {
    const __m256d vg = _mm256_loadu_pd(g + i);
    __m256d vm = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    vm = _mm256_fmadd_pd(vb1, vm, _mm256_mul_pd(vb1c, vg));
    vv = _mm256_fmadd_pd(vb2, vv, _mm256_mul_pd(vb2c, _mm256_mul_pd(vg, vg)));
    _mm256_storeu_pd(m + i, vm);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_div_pd(vm, vbc1);
    const __m256d vhat = _mm256_div_pd(vv, vbc2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
  }
  for (; i < len; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

extern const Ops kOps;
const Ops kOps = {
    "avx2", apply_1q, apply_phase_parity, exp_z, inner_conj,
    squared_dist, axpy, adam_update,
};

}  // namespace qmsan::kern::avx2

#endif  // QMSAN_HAVE_AVX2
