#include <bit>
#include <cmath>

#include "qmsan/kernels.hpp"

namespace qmsan::kern::scalar {

void apply_1q(c64* psi, std::size_t dim, std::size_t stride, const c64 u[4]) {
  for (std::size_t base = 0; base < dim; base += 2 * stride) {
    for (std::size_t i = base; i < base + stride; ++i) {
      const c64 a = psi[i];
      const c64 b = psi[i + stride];
      psi[i] = u[0] * a + u[1] * b;
      psi[i + stride] = u[2] * a + u[3] * b;
    }
  }
}

void apply_phase_parity(c64* psi, std::size_t dim, std::uint64_t mask, c64 even, c64 odd) {
  for (std::size_t i = 0; i < dim; ++i) {
    psi[i] *= (std::popcount(i & mask) & 1u) ? odd : even;
  }
}

double exp_z(const c64* psi, std::size_t dim, std::size_t stride) {
  double plus = 0.0, minus = 0.0;
  for (std::size_t base = 0; base < dim; base += 2 * stride) {
    for (std::size_t i = base; i < base + stride; ++i) {
      plus += std::norm(psi[i]);
      minus += std::norm(psi[i + stride]);
    }
  }
  return plus - minus;
}

c64 inner_conj(const c64* a, const c64* b, std::size_t len) {
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const c64 v = a[i] * std::conj(b[i]);
    re += v.real();
    im += v.imag();
  }
  return {re, im};
}

double squared_dist(const double* a, const double* b, std::size_t len) {
  double acc = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void axpy(double* y, const double* x, double alpha, std::size_t len) {
  for (std::size_t i = 0; i < len; ++i) y[i] += alpha * x[i];
}

void adam_update(double* p, double* m, double* v, const double* g, std::size_t len,
                 double lr, double beta1, double beta2, double eps,
                 double bc1, double bc2) {
  for (std::size_t i = 0; i < len; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

extern const Ops kOps;
const Ops kOps = {
    "scalar", apply_1q, apply_phase_parity, exp_z, inner_conj,
    squared_dist, axpy, adam_update,
};

}  // namespace qmsan::kern::scalar
