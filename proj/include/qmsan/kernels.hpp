#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>

namespace qmsan::kern {

using c64 = std::complex<double>;

// Data-parallel inner loops shared by the simulator, the attention stack and
// the optimizer. Every entry has a scalar reference implementation and, on
// x86-64 with AVX2+FMA, a vectorized variant; the two are equivalence-tested
// against each other. Dispatch is resolved once at first use.
struct Ops {
  const char* name;

  // |psi'> = U |psi| on the qubit whose pair stride is `stride`
  // (stride = 2^k groups amplitude pairs (i, i+stride)).
  void (*apply_1q)(c64* psi, std::size_t dim, std::size_t stride, const c64 u[4]);

  // psi[i] *= (popcount(i & mask) even ? even : odd).  Covers Rz (single-bit
  // mask) and Rzz (two-bit mask) on state vectors and on flattened density
  // matrices.
  void (*apply_phase_parity)(c64* psi, std::size_t dim, std::uint64_t mask, c64 even, c64 odd);

  // sum_i |psi[i]|^2 * (-1)^{bit}, where bit flips every `stride` entries.
  double (*exp_z)(const c64* psi, std::size_t dim, std::size_t stride);

  // sum_k a[k] * conj(b[k])
  c64 (*inner_conj)(const c64* a, const c64* b, std::size_t len);

  // sum_k (a[k] - b[k])^2
  double (*squared_dist)(const double* a, const double* b, std::size_t len);

  // y[k] += alpha * x[k]
  void (*axpy)(double* y, const double* x, double alpha, std::size_t len);

  // one Adam step over a flat parameter block; bc1/bc2 are the
  // bias-correction factors 1 - beta^t for the current step.
  void (*adam_update)(double* p, double* m, double* v, const double* g, std::size_t len,
                      double lr, double beta1, double beta2, double eps,
                      double bc1, double bc2);
};

enum class Backend { Scalar, Avx2 };

// true when the backend is both compiled in and usable on this CPU
bool available(Backend backend);

// table for an explicit backend; throws std::runtime_error if unavailable
const Ops& ops(Backend backend);

// Backend picked at first call: QMSAN_SIMD={auto,scalar,avx2} in the
// environment, otherwise the best available.
const Ops& active();

// name of the backend active() resolves to
std::string active_name();

}  // namespace qmsan::kern
