#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "qmsan/kernels.hpp"

// Exact dense simulation of small qubit registers: pure-state evolution,
// density matrices, partial trace, Z observables, the SWAP test, and Kraus
// channels.
//
// Index convention, fixed globally: qubit 0 is the MOST significant bit of
// the basis-state index. For n qubits, basis state |b0 b1 ... b_{n-1}> has
// index sum_q b_q * 2^(n-1-q). Density matrices are row-major with the row
// (ket) index following the same rule.
namespace qmsan::qcore {

using c64 = std::complex<double>;

struct StateVector {
  int n_qubits = 0;
  std::vector<c64> amps;  // length 2^n_qubits

  static StateVector zero_state(int n_qubits);
  std::size_t dim() const { return amps.size(); }
  double norm() const;
};

struct DensityMatrix {
  int n_qubits = 0;
  std::vector<c64> entries;  // row-major, 2^n x 2^n

  static DensityMatrix zero_state(int n_qubits);
  std::size_t dim() const { return std::size_t{1} << n_qubits; }
  c64& at(std::size_t row, std::size_t col) { return entries[row * dim() + col]; }
  const c64& at(std::size_t row, std::size_t col) const { return entries[row * dim() + col]; }
  c64 trace() const;
  double purity() const;  // tr(rho^2)
  bool is_hermitian(double tol = 1e-10) const;
};

enum class GateKind { Rx, Ry, Rz, Rzz, ControlledSwap };

struct Gate {
  GateKind kind;
  double angle = 0.0;  // unused for ControlledSwap
  std::vector<int> targets;

  static Gate rx(int q, double theta) { return {GateKind::Rx, theta, {q}}; }
  static Gate ry(int q, double theta) { return {GateKind::Ry, theta, {q}}; }
  static Gate rz(int q, double theta) { return {GateKind::Rz, theta, {q}}; }
  static Gate rzz(int a, int b, double theta) { return {GateKind::Rzz, theta, {a, b}}; }
  static Gate cswap(int control, int a, int b) {
    return {GateKind::ControlledSwap, 0.0, {control, a, b}};
  }
};

// 2x2 matrix of a single-qubit rotation, row-major
void rotation_matrix(GateKind kind, double angle, c64 out[4]);

StateVector apply_gate(const StateVector& state, const Gate& gate);
DensityMatrix apply_gate_dm(const DensityMatrix& rho, const Gate& gate);

// in-place variants used on hot paths
void apply_gate_inplace(StateVector& state, const Gate& gate);
void apply_gate_dm_inplace(DensityMatrix& rho, const Gate& gate);

// Hadamard is not part of the model's trainable gate set; it exists as an
// internal primitive for the SWAP-test circuit.
void apply_hadamard_inplace(StateVector& state, int qubit);
void apply_hadamard_dm_inplace(DensityMatrix& rho, int qubit);

DensityMatrix to_density(const StateVector& state);

// keep: qubit indices retained, in increasing order in the result.
// Must be a nonempty strict subset of 0..n-1.
DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<int>& keep);

double expectation_z(const StateVector& state, int qubit);
double expectation_z(const DensityMatrix& rho, int qubit);

// tr(rho * sigma) for Hermitian inputs; the imaginary residue is checked
// against 1e-10 and discarded.
double trace_overlap(const DensityMatrix& rho, const DensityMatrix& sigma);

// Probability of measuring the ancilla in |0> for the explicit
// (2k+1)-qubit SWAP-test circuit on rho (x) sigma. Equals
// 1/2 + tr(rho sigma)/2 and serves as the circuit-level oracle for
// trace_overlap.
double swap_test_probability(const DensityMatrix& rho, const DensityMatrix& sigma);

struct KrausChannel {
  int arity = 1;                       // 1 or 2 qubits
  std::vector<std::vector<c64>> operators;  // row-major 2x2 or 4x4

  // sum_i K_i^dag K_i == I within tol
  bool is_complete(double tol = 1e-12) const;
};

KrausChannel make_depolarizing_1q(double p);
KrausChannel make_depolarizing_2q(double p);
KrausChannel make_amplitude_damping(double p);
KrausChannel make_phase_damping(double p);

DensityMatrix apply_channel(const DensityMatrix& rho, const KrausChannel& channel,
                            const std::vector<int>& targets);
void apply_channel_inplace(DensityMatrix& rho, const KrausChannel& channel,
                           const std::vector<int>& targets);

// Allocation-free fast paths for the embedding gate set; targets must be
// valid (callers construct them from validated circuit specs).
void apply_rotation_inplace(StateVector& state, GateKind kind, int qubit, double angle);
void apply_rzz_inplace(StateVector& state, int a, int b, double angle);
void apply_rotation_dm_inplace(DensityMatrix& rho, GateKind kind, int qubit, double angle);
void apply_rzz_dm_inplace(DensityMatrix& rho, int a, int b, double angle);

// --- helpers shared with the attention/training stack ---

// rho -> M rho N for arbitrary (not necessarily unitary) square M, N of
// dimension 2^k placed on the given qubits.
void apply_left_right(DensityMatrix& rho, const std::vector<c64>& m,
                      const std::vector<c64>& n, const std::vector<int>& qubits);

// |psi> -> (P_q0 ... ) |psi| for a Pauli string given as (qubit, pauli) with
// pauli in {1:X, 2:Y, 3:Z}; used by gradient code.
void apply_pauli_inplace(std::vector<c64>& amps, int n_qubits, int qubit, int pauli);

// Heisenberg-picture update A -> sum_i K_i^dag A K_i
void apply_channel_adjoint_inplace(DensityMatrix& a, const KrausChannel& channel,
                                   const std::vector<int>& targets);

std::vector<c64> kron(const std::vector<c64>& a, std::size_t da,
                      const std::vector<c64>& b, std::size_t db);

inline c64 hermitian_inner(const c64* a, const c64* b, std::size_t len) {
  return kern::active().inner_conj(a, b, len);
}

}  // namespace qmsan::qcore
