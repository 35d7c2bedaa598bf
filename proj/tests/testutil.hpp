#pragma once

// Shared test helpers: random state generation, an independent complex
// Hermitian Jacobi eigensolver, naive matrix arithmetic and a
// finite-difference loss gradient. These deliberately avoid the library's
// fast paths so they can serve as oracles.

#include <unistd.h>

#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "qmsan/qcore.hpp"
#include "qmsan/rng.hpp"
#include "qmsan/textdata.hpp"
#include "qmsan/train.hpp"

namespace testutil {

using qmsan::Rng;
using qmsan::qcore::c64;
using qmsan::qcore::DensityMatrix;
using qmsan::qcore::StateVector;

inline StateVector random_state(int n_qubits, Rng& rng) {
  StateVector sv;
  sv.n_qubits = n_qubits;
  sv.amps.resize(std::size_t{1} << n_qubits);
  double norm2 = 0.0;
  for (auto& a : sv.amps) {
    a = c64{rng.normal(), rng.normal()};
    norm2 += std::norm(a);
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& a : sv.amps) a *= inv;
  return sv;
}

// induced random mixed state: partial trace of a random pure state on twice
// the qubits
inline DensityMatrix random_mixed(int k_qubits, Rng& rng) {
  const StateVector pure = random_state(2 * k_qubits, rng);
  std::vector<int> keep(k_qubits);
  for (int q = 0; q < k_qubits; ++q) keep[q] = q;
  return qmsan::qcore::partial_trace(qmsan::qcore::to_density(pure), keep);
}

inline StateVector random_product_state(int n_qubits, Rng& rng) {
  StateVector sv;
  sv.n_qubits = n_qubits;
  sv.amps = {1.0};
  for (int q = 0; q < n_qubits; ++q) {
    c64 a{rng.normal(), rng.normal()};
    c64 b{rng.normal(), rng.normal()};
    const double inv = 1.0 / std::sqrt(std::norm(a) + std::norm(b));
    a *= inv;
    b *= inv;
    std::vector<c64> next(sv.amps.size() * 2);
    for (std::size_t i = 0; i < sv.amps.size(); ++i) {
      next[2 * i] = sv.amps[i] * a;
      next[2 * i + 1] = sv.amps[i] * b;
    }
    sv.amps = std::move(next);
  }
  return sv;
}

// --- naive dense helpers (independent of the library's kernels) ---

inline std::vector<c64> matmul(const std::vector<c64>& a, const std::vector<c64>& b,
                               std::size_t d) {
  std::vector<c64> out(d * d, c64{});
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < d; ++k)
      for (std::size_t j = 0; j < d; ++j) out[i * d + j] += a[i * d + k] * b[k * d + j];
  return out;
}

inline std::vector<c64> dagger(const std::vector<c64>& a, std::size_t d) {
  std::vector<c64> out(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) out[j * d + i] = std::conj(a[i * d + j]);
  return out;
}

inline c64 naive_trace_product(const std::vector<c64>& a, const std::vector<c64>& b,
                               std::size_t d) {
  c64 acc = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) acc += a[i * d + j] * b[j * d + i];
  return acc;
}

// brute-force partial trace: double loop over all full-register index pairs,
// summing those whose traced bits agree
inline DensityMatrix naive_partial_trace(const DensityMatrix& rho, const std::vector<int>& keep) {
  const int n = rho.n_qubits;
  const std::size_t d = rho.dim();
  const int k = static_cast<int>(keep.size());
  const std::size_t dk = std::size_t{1} << k;

  auto kept_bits = [&](std::size_t full) {
    std::size_t out = 0;
    for (int j = 0; j < k; ++j) {
      const std::size_t bit = (full >> (n - 1 - keep[j])) & 1u;
      out |= bit << (k - 1 - j);
    }
    return out;
  };
  auto traced_bits = [&](std::size_t full) {
    std::size_t out = 0;
    for (int q = 0; q < n; ++q) {
      bool is_kept = false;
      for (int j = 0; j < k; ++j) is_kept |= keep[j] == q;
      if (is_kept) continue;
      out = (out << 1) | ((full >> (n - 1 - q)) & 1u);
    }
    return out;
  };

  DensityMatrix out;
  out.n_qubits = k;
  out.entries.assign(dk * dk, c64{});
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (traced_bits(i) == traced_bits(j))
        out.entries[kept_bits(i) * dk + kept_bits(j)] += rho.entries[i * d + j];
  return out;
}

// --- complex Hermitian Jacobi eigensolver (test oracle) ---

struct EigH {
  std::size_t d = 0;
  std::vector<double> values;   // unsorted
  std::vector<c64> vectors;     // row-major; column k is the k-th eigenvector
};

inline EigH jacobi_hermitian(std::vector<c64> a, std::size_t d) {
  std::vector<c64> v(d * d, c64{});
  for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) off += std::norm(a[p * d + q]);
    if (off < 1e-26) break;

    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) {
        const c64 apq = a[p * d + q];
        const double alpha = std::abs(apq);
        if (alpha < 1e-15) continue;
        const c64 phase = apq / alpha;
        const double app = a[p * d + p].real();
        const double aqq = a[q * d + q].real();
        const double tau = (aqq - app) / (2.0 * alpha);
        const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        std::vector<c64> rot(d * d, c64{});
        for (std::size_t i = 0; i < d; ++i) rot[i * d + i] = 1.0;
        rot[p * d + p] = c;
        rot[p * d + q] = -s * phase;
        rot[q * d + p] = s * std::conj(phase);
        rot[q * d + q] = c;

        a = matmul(matmul(dagger(rot, d), a, d), rot, d);
        v = matmul(v, rot, d);
      }
  }

  EigH out;
  out.d = d;
  out.values.resize(d);
  for (std::size_t i = 0; i < d; ++i) out.values[i] = a[i * d + i].real();
  out.vectors = std::move(v);
  return out;
}

// minimum eigenvalue, for positivity checks
inline double min_eigenvalue(const DensityMatrix& rho) {
  const auto eig = jacobi_hermitian(rho.entries, rho.dim());
  double lo = eig.values[0];
  for (double x : eig.values) lo = std::min(lo, x);
  return lo;
}

// Eq.-style mixed-state expansion: sum_{ij} p_i q_j |<e_i|f_j>|^2 computed
// from independent eigendecompositions
inline double overlap_by_eigen(const DensityMatrix& rho, const DensityMatrix& sigma) {
  const std::size_t d = rho.dim();
  const auto er = jacobi_hermitian(rho.entries, d);
  const auto es = jacobi_hermitian(sigma.entries, d);
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      c64 ip = 0.0;
      for (std::size_t m = 0; m < d; ++m)
        ip += std::conj(er.vectors[m * d + i]) * es.vectors[m * d + j];
      acc += er.values[i] * es.values[j] * std::norm(ip);
    }
  return acc;
}

// --- finite-difference gradient oracle ---

inline double batch_loss(const qmsan::train::TrainState& state,
                         const qmsan::textdata::Corpus& corpus,
                         const std::vector<std::size_t>& batch,
                         const qmsan::train::TrainConfig& cfg) {
  std::vector<double> preds, labels;
  for (const auto idx : batch) {
    const auto& sample = corpus.samples[idx];
    preds.push_back(
        qmsan::train::forward(sample.tokens, corpus.vocab, state, cfg, false).y_hat);
    labels.push_back(sample.label);
  }
  return qmsan::train::mse_loss(preds, labels);
}

inline std::vector<double> fd_gradient(qmsan::train::TrainState state,
                                       const qmsan::textdata::Corpus& corpus,
                                       const std::vector<std::size_t>& batch,
                                       const qmsan::train::TrainConfig& cfg, double h = 1e-5) {
  std::vector<double> grad(state.params.size());
  for (std::size_t i = 0; i < state.params.size(); ++i) {
    const double orig = state.params[i];
    state.params[i] = orig + h;
    const double lp = batch_loss(state, corpus, batch, cfg);
    state.params[i] = orig - h;
    const double lm = batch_loss(state, corpus, batch, cfg);
    state.params[i] = orig;
    grad[i] = (lp - lm) / (2.0 * h);
  }
  return grad;
}

// writes text to a unique file under the system temp dir
inline std::string write_temp(const std::string& stem, const std::string& text) {
  static int counter = 0;
  const auto path = std::filesystem::temp_directory_path() /
                    (stem + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::ofstream out(path);
  out << text;
  return path.string();
}

}  // namespace testutil
