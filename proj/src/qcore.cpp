#include "qmsan/qcore.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qmsan::qcore {

namespace {

constexpr c64 kI{0.0, 1.0};

// pair stride of qubit q in an n-qubit register (qubit 0 = MSB)
inline std::size_t stride_of(int n_qubits, int q) {
  return std::size_t{1} << (n_qubits - 1 - q);
}

inline std::uint64_t bit_mask(int n_qubits, int q) {
  return std::uint64_t{1} << (n_qubits - 1 - q);
}

void check_targets(int n_qubits, const Gate& gate) {
  std::size_t want = 0;
  switch (gate.kind) {
    case GateKind::Rx:
    case GateKind::Ry:
    case GateKind::Rz:
      want = 1;
      break;
    case GateKind::Rzz:
      want = 2;
      break;
    case GateKind::ControlledSwap:
      want = 3;
      break;
  }
  if (gate.targets.size() != want)
    throw std::invalid_argument("gate has wrong number of target qubits");
  for (std::size_t i = 0; i < gate.targets.size(); ++i) {
    const int q = gate.targets[i];
    if (q < 0 || q >= n_qubits) throw std::invalid_argument("gate target out of range");
    for (std::size_t j = i + 1; j < gate.targets.size(); ++j)
      if (gate.targets[j] == q) throw std::invalid_argument("duplicate gate targets");
  }
}

// Gate application on a flat amplitude array holding `reg_qubits` register
// qubits. Density matrices reuse these with the register doubled: ket qubit q
// lives at register position q, bra qubit q at position n + q.
void reg_apply_1q(std::vector<c64>& amps, int reg_qubits, int pos, const c64 u[4]) {
  kern::active().apply_1q(amps.data(), amps.size(), stride_of(reg_qubits, pos), u);
}

void reg_apply_phase(std::vector<c64>& amps, int reg_qubits, std::uint64_t qubit_mask,
                     c64 even, c64 odd) {
  kern::active().apply_phase_parity(amps.data(), amps.size(), qubit_mask, even, odd);
  (void)reg_qubits;
}

void reg_apply_cswap(std::vector<c64>& amps, int reg_qubits, int control, int a, int b) {
  const std::uint64_t mc = bit_mask(reg_qubits, control);
  const std::uint64_t ma = bit_mask(reg_qubits, a);
  const std::uint64_t mb = bit_mask(reg_qubits, b);
  const std::size_t dim = amps.size();
  for (std::size_t i = 0; i < dim; ++i) {
    if ((i & mc) && (i & ma) && !(i & mb)) std::swap(amps[i], amps[i ^ (ma | mb)]);
  }
}

// general 2-qubit matrix on register positions (pa, pb); matrix row index is
// (bit_pa << 1) | bit_pb
void reg_apply_2q(std::vector<c64>& amps, int reg_qubits, int pa, int pb,
                  const std::vector<c64>& u) {
  const std::uint64_t ma = bit_mask(reg_qubits, pa);
  const std::uint64_t mb = bit_mask(reg_qubits, pb);
  const std::size_t dim = amps.size();
  for (std::size_t i = 0; i < dim; ++i) {
    if (i & (ma | mb)) continue;  // i is the 00 member of its quadruple
    const std::size_t idx[4] = {i, i | mb, i | ma, i | ma | mb};
    c64 in[4];
    for (int k = 0; k < 4; ++k) in[k] = amps[idx[k]];
    for (int r = 0; r < 4; ++r) {
      c64 acc = 0.0;
      for (int c = 0; c < 4; ++c) acc += u[4 * r + c] * in[c];
      amps[idx[r]] = acc;
    }
  }
}

void reg_apply_gate(std::vector<c64>& amps, int reg_qubits, const Gate& gate, bool conjugated,
                    int pos_offset) {
  const double sign = conjugated ? -1.0 : 1.0;  // conj(U(theta)) = flip of i
  switch (gate.kind) {
    case GateKind::Rx:
    case GateKind::Ry: {
      c64 u[4];
      rotation_matrix(gate.kind, gate.angle, u);
      if (conjugated)
        for (auto& z : u) z = std::conj(z);
      reg_apply_1q(amps, reg_qubits, gate.targets[0] + pos_offset, u);
      break;
    }
    case GateKind::Rz: {
      const c64 even = std::exp(-kI * (sign * gate.angle / 2.0));
      const c64 odd = std::exp(kI * (sign * gate.angle / 2.0));
      reg_apply_phase(amps, reg_qubits, bit_mask(reg_qubits, gate.targets[0] + pos_offset),
                      even, odd);
      break;
    }
    case GateKind::Rzz: {
      // exp(-i theta Z(x)Z): equal bits pick up e^{-i theta}, unequal e^{+i theta}
      const c64 even = std::exp(-kI * (sign * gate.angle));
      const c64 odd = std::exp(kI * (sign * gate.angle));
      const std::uint64_t mask = bit_mask(reg_qubits, gate.targets[0] + pos_offset) |
                                 bit_mask(reg_qubits, gate.targets[1] + pos_offset);
      reg_apply_phase(amps, reg_qubits, mask, even, odd);
      break;
    }
    case GateKind::ControlledSwap:
      reg_apply_cswap(amps, reg_qubits, gate.targets[0] + pos_offset,
                      gate.targets[1] + pos_offset, gate.targets[2] + pos_offset);
      break;
  }
}

std::vector<c64> dagger(const std::vector<c64>& m, std::size_t d) {
  std::vector<c64> out(d * d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) out[c * d + r] = std::conj(m[r * d + c]);
  return out;
}

const std::vector<c64> kPauli1[3] = {
    {0, 1, 1, 0},            // X
    {0, -kI, kI, 0},         // Y
    {1, 0, 0, -1},           // Z
};

}  // namespace

StateVector StateVector::zero_state(int n_qubits) {
  if (n_qubits < 1) throw std::invalid_argument("state needs at least one qubit");
  StateVector sv;
  sv.n_qubits = n_qubits;
  sv.amps.assign(std::size_t{1} << n_qubits, c64{0.0, 0.0});
  sv.amps[0] = 1.0;
  return sv;
}

double StateVector::norm() const {
  double acc = 0.0;
  for (const auto& a : amps) acc += std::norm(a);
  return std::sqrt(acc);
}

DensityMatrix DensityMatrix::zero_state(int n_qubits) {
  if (n_qubits < 1) throw std::invalid_argument("state needs at least one qubit");
  DensityMatrix rho;
  rho.n_qubits = n_qubits;
  rho.entries.assign((std::size_t{1} << n_qubits) * (std::size_t{1} << n_qubits), c64{});
  rho.entries[0] = 1.0;
  return rho;
}

c64 DensityMatrix::trace() const {
  const std::size_t d = dim();
  c64 acc = 0.0;
  for (std::size_t i = 0; i < d; ++i) acc += entries[i * d + i];
  return acc;
}

double DensityMatrix::purity() const {
  return hermitian_inner(entries.data(), entries.data(), entries.size()).real();
}

bool DensityMatrix::is_hermitian(double tol) const {
  const std::size_t d = dim();
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = r; c < d; ++c)
      if (std::abs(entries[r * d + c] - std::conj(entries[c * d + r])) > tol) return false;
  return true;
}

void rotation_matrix(GateKind kind, double angle, c64 out[4]) {
  const double c = std::cos(angle / 2.0);
  const double s = std::sin(angle / 2.0);
  switch (kind) {
    case GateKind::Rx:
      out[0] = c;
      out[1] = -kI * s;
      out[2] = -kI * s;
      out[3] = c;
      return;
    case GateKind::Ry:
      out[0] = c;
      out[1] = -s;
      out[2] = s;
      out[3] = c;
      return;
    case GateKind::Rz:
      out[0] = std::exp(-kI * (angle / 2.0));
      out[1] = 0.0;
      out[2] = 0.0;
      out[3] = std::exp(kI * (angle / 2.0));
      return;
    default:
      throw std::invalid_argument("rotation_matrix: not a single-qubit rotation");
  }
}

void apply_gate_inplace(StateVector& state, const Gate& gate) {
  check_targets(state.n_qubits, gate);
  reg_apply_gate(state.amps, state.n_qubits, gate, /*conjugated=*/false, /*pos_offset=*/0);
}

StateVector apply_gate(const StateVector& state, const Gate& gate) {
  StateVector out = state;
  apply_gate_inplace(out, gate);
  return out;
}

void apply_gate_dm_inplace(DensityMatrix& rho, const Gate& gate) {
  check_targets(rho.n_qubits, gate);
  const int reg = 2 * rho.n_qubits;
  reg_apply_gate(rho.entries, reg, gate, /*conjugated=*/false, /*pos_offset=*/0);
  reg_apply_gate(rho.entries, reg, gate, /*conjugated=*/true, /*pos_offset=*/rho.n_qubits);
}

DensityMatrix apply_gate_dm(const DensityMatrix& rho, const Gate& gate) {
  DensityMatrix out = rho;
  apply_gate_dm_inplace(out, gate);
  return out;
}

void apply_hadamard_inplace(StateVector& state, int qubit) {
  if (qubit < 0 || qubit >= state.n_qubits) throw std::invalid_argument("qubit out of range");
  const double h = 1.0 / std::sqrt(2.0);
  const c64 u[4] = {h, h, h, -h};
  reg_apply_1q(state.amps, state.n_qubits, qubit, u);
}

void apply_hadamard_dm_inplace(DensityMatrix& rho, int qubit) {
  if (qubit < 0 || qubit >= rho.n_qubits) throw std::invalid_argument("qubit out of range");
  const double h = 1.0 / std::sqrt(2.0);
  const c64 u[4] = {h, h, h, -h};
  const int reg = 2 * rho.n_qubits;
  reg_apply_1q(rho.entries, reg, qubit, u);
  reg_apply_1q(rho.entries, reg, qubit + rho.n_qubits, u);  // H is real
}

void apply_rotation_inplace(StateVector& state, GateKind kind, int qubit, double angle) {
  c64 u[4];
  rotation_matrix(kind, angle, u);
  reg_apply_1q(state.amps, state.n_qubits, qubit, u);
}

void apply_rzz_inplace(StateVector& state, int a, int b, double angle) {
  const c64 even = std::exp(-kI * angle);
  const c64 odd = std::exp(kI * angle);
  reg_apply_phase(state.amps, state.n_qubits,
                  bit_mask(state.n_qubits, a) | bit_mask(state.n_qubits, b), even, odd);
}

void apply_rotation_dm_inplace(DensityMatrix& rho, GateKind kind, int qubit, double angle) {
  c64 u[4];
  rotation_matrix(kind, angle, u);
  const int reg = 2 * rho.n_qubits;
  reg_apply_1q(rho.entries, reg, qubit, u);
  c64 uc[4] = {std::conj(u[0]), std::conj(u[1]), std::conj(u[2]), std::conj(u[3])};
  reg_apply_1q(rho.entries, reg, qubit + rho.n_qubits, uc);
}

void apply_rzz_dm_inplace(DensityMatrix& rho, int a, int b, double angle) {
  const int n = rho.n_qubits;
  const int reg = 2 * n;
  const c64 even = std::exp(-kI * angle);
  const c64 odd = std::exp(kI * angle);
  reg_apply_phase(rho.entries, reg, bit_mask(reg, a) | bit_mask(reg, b), even, odd);
  reg_apply_phase(rho.entries, reg, bit_mask(reg, a + n) | bit_mask(reg, b + n),
                  std::conj(even), std::conj(odd));
}

DensityMatrix to_density(const StateVector& state) {
  DensityMatrix rho;
  rho.n_qubits = state.n_qubits;
  const std::size_t d = state.dim();
  rho.entries.resize(d * d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) rho.entries[r * d + c] = state.amps[r] * std::conj(state.amps[c]);
  return rho;
}

DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<int>& keep) {
  const int n = rho.n_qubits;
  std::vector<int> kept = keep;
  std::sort(kept.begin(), kept.end());
  if (kept.empty()) throw std::invalid_argument("partial_trace: keep set is empty");
  if (static_cast<int>(kept.size()) >= n)
    throw std::invalid_argument("partial_trace: keep set must be a strict subset");
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (kept[i] < 0 || kept[i] >= n) throw std::invalid_argument("partial_trace: qubit out of range");
    if (i > 0 && kept[i] == kept[i - 1]) throw std::invalid_argument("partial_trace: duplicate qubit");
  }

  std::vector<int> traced;
  for (int q = 0; q < n; ++q)
    if (!std::binary_search(kept.begin(), kept.end(), q)) traced.push_back(q);

  const int k = static_cast<int>(kept.size());
  const std::size_t dk = std::size_t{1} << k;
  const std::size_t dt = std::size_t{1} << traced.size();
  const std::size_t d = rho.dim();

  // scatter result/traced sub-index bits into full-register positions
  std::vector<std::size_t> keep_map(dk, 0), trace_map(dt, 0);
  for (std::size_t a = 0; a < dk; ++a)
    for (int j = 0; j < k; ++j)
      if (a & (std::size_t{1} << (k - 1 - j))) keep_map[a] |= bit_mask(n, kept[j]);
  for (std::size_t t = 0; t < dt; ++t)
    for (std::size_t j = 0; j < traced.size(); ++j)
      if (t & (std::size_t{1} << (traced.size() - 1 - j))) trace_map[t] |= bit_mask(n, traced[j]);

  DensityMatrix out;
  out.n_qubits = k;
  out.entries.assign(dk * dk, c64{});
  for (std::size_t a = 0; a < dk; ++a) {
    for (std::size_t b = 0; b < dk; ++b) {
      c64 acc = 0.0;
      for (std::size_t t = 0; t < dt; ++t)
        acc += rho.entries[(keep_map[a] | trace_map[t]) * d + (keep_map[b] | trace_map[t])];
      out.entries[a * dk + b] = acc;
    }
  }
  return out;
}

double expectation_z(const StateVector& state, int qubit) {
  if (qubit < 0 || qubit >= state.n_qubits) throw std::invalid_argument("qubit out of range");
  return kern::active().exp_z(state.amps.data(), state.dim(), stride_of(state.n_qubits, qubit));
}

double expectation_z(const DensityMatrix& rho, int qubit) {
  if (qubit < 0 || qubit >= rho.n_qubits) throw std::invalid_argument("qubit out of range");
  const std::size_t d = rho.dim();
  const std::uint64_t mask = bit_mask(rho.n_qubits, qubit);
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double v = rho.entries[i * d + i].real();
    acc += (i & mask) ? -v : v;
  }
  return acc;
}

double trace_overlap(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.n_qubits != sigma.n_qubits)
    throw std::invalid_argument("trace_overlap: dimension mismatch");
  // tr(rho sigma) = sum_ij rho_ij conj(sigma_ij) for Hermitian sigma
  return hermitian_inner(rho.entries.data(), sigma.entries.data(), rho.entries.size()).real();
}

double swap_test_probability(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.n_qubits != sigma.n_qubits)
    throw std::invalid_argument("swap_test_probability: dimension mismatch");
  const int k = rho.n_qubits;
  const int total = 2 * k + 1;

  // ancilla (x) rho (x) sigma
  std::vector<c64> anc = {1, 0, 0, 0};
  std::vector<c64> joint = kron(anc, 2, rho.entries, rho.dim());
  joint = kron(joint, 2 * rho.dim(), sigma.entries, sigma.dim());
  DensityMatrix full{total, std::move(joint)};

  apply_hadamard_dm_inplace(full, 0);
  for (int i = 0; i < k; ++i)
    apply_gate_dm_inplace(full, Gate::cswap(0, 1 + i, 1 + k + i));
  apply_hadamard_dm_inplace(full, 0);

  const std::size_t d = full.dim();
  const std::uint64_t anc_mask = bit_mask(total, 0);
  double p0 = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    if (!(i & anc_mask)) p0 += full.entries[i * d + i].real();
  return p0;
}

bool KrausChannel::is_complete(double tol) const {
  const std::size_t d = std::size_t{1} << arity;
  std::vector<c64> acc(d * d, c64{});
  for (const auto& k : operators) {
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < d; ++c) {
        c64 v = 0.0;
        for (std::size_t m = 0; m < d; ++m) v += std::conj(k[m * d + r]) * k[m * d + c];
        acc[r * d + c] += v;
      }
  }
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      const c64 want = (r == c) ? c64{1.0, 0.0} : c64{};
      if (std::abs(acc[r * d + c] - want) > tol) return false;
    }
  return true;
}

namespace {
void check_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("noise level must lie in [0, 1]");
}
}  // namespace

KrausChannel make_depolarizing_1q(double p) {
  check_probability(p);
  KrausChannel ch;
  ch.arity = 1;
  const double a = std::sqrt(1.0 - p);
  const double b = std::sqrt(p / 3.0);
  ch.operators.push_back({a, 0, 0, a});
  for (const auto& pauli : kPauli1) {
    std::vector<c64> k = pauli;
    for (auto& z : k) z *= b;
    ch.operators.push_back(std::move(k));
  }
  return ch;
}

KrausChannel make_depolarizing_2q(double p) {
  check_probability(p);
  KrausChannel ch;
  ch.arity = 2;
  const std::vector<c64> id = {1, 0, 0, 1};
  std::vector<const std::vector<c64>*> basis = {&id, &kPauli1[0], &kPauli1[1], &kPauli1[2]};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double w = (i == 0 && j == 0) ? std::sqrt(1.0 - p) : std::sqrt(p / 15.0);
      std::vector<c64> k = kron(*basis[i], 2, *basis[j], 2);
      for (auto& z : k) z *= w;
      ch.operators.push_back(std::move(k));
    }
  return ch;
}

KrausChannel make_amplitude_damping(double p) {
  check_probability(p);
  KrausChannel ch;
  ch.arity = 1;
  ch.operators.push_back({1, 0, 0, std::sqrt(1.0 - p)});
  ch.operators.push_back({0, std::sqrt(p), 0, 0});
  return ch;
}

KrausChannel make_phase_damping(double p) {
  check_probability(p);
  KrausChannel ch;
  ch.arity = 1;
  ch.operators.push_back({1, 0, 0, std::sqrt(1.0 - p)});
  ch.operators.push_back({0, 0, 0, std::sqrt(p)});
  return ch;
}

void apply_left_right(DensityMatrix& rho, const std::vector<c64>& m,
                      const std::vector<c64>& n, const std::vector<int>& qubits) {
  const int nq = rho.n_qubits;
  const int reg = 2 * nq;
  for (int q : qubits)
    if (q < 0 || q >= nq) throw std::invalid_argument("qubit out of range");
  // left-multiply by m on the ket side, right-multiply by n via n^T on the bra side
  if (qubits.size() == 1) {
    const c64 mk[4] = {m[0], m[1], m[2], m[3]};
    const c64 nt[4] = {n[0], n[2], n[1], n[3]};
    reg_apply_1q(rho.entries, reg, qubits[0], mk);
    reg_apply_1q(rho.entries, reg, qubits[0] + nq, nt);
  } else if (qubits.size() == 2) {
    std::vector<c64> nt(16);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) nt[r * 4 + c] = n[c * 4 + r];
    reg_apply_2q(rho.entries, reg, qubits[0], qubits[1], m);
    reg_apply_2q(rho.entries, reg, qubits[0] + nq, qubits[1] + nq, nt);
  } else {
    throw std::invalid_argument("apply_left_right supports 1 or 2 qubits");
  }
}

void apply_pauli_inplace(std::vector<c64>& amps, int n_qubits, int qubit, int pauli) {
  if (pauli < 1 || pauli > 3) throw std::invalid_argument("pauli index must be 1..3");
  if (pauli == 3) {
    kern::active().apply_phase_parity(amps.data(), amps.size(), bit_mask(n_qubits, qubit),
                                      c64{1.0, 0.0}, c64{-1.0, 0.0});
    return;
  }
  const auto& u = kPauli1[pauli - 1];
  const c64 m[4] = {u[0], u[1], u[2], u[3]};
  kern::active().apply_1q(amps.data(), amps.size(), stride_of(n_qubits, qubit), m);
}

void apply_channel_inplace(DensityMatrix& rho, const KrausChannel& channel,
                           const std::vector<int>& targets) {
  if (static_cast<int>(targets.size()) != channel.arity)
    throw std::invalid_argument("apply_channel: target count does not match channel arity");
  for (std::size_t i = 0; i < targets.size(); ++i)
    for (std::size_t j = i + 1; j < targets.size(); ++j)
      if (targets[i] == targets[j]) throw std::invalid_argument("apply_channel: duplicate targets");

  const std::size_t d = std::size_t{1} << channel.arity;
  std::vector<c64> acc(rho.entries.size(), c64{});
  DensityMatrix scratch;
  scratch.n_qubits = rho.n_qubits;
  for (const auto& k : channel.operators) {
    scratch.entries = rho.entries;
    apply_left_right(scratch, k, dagger(k, d), targets);
    kern::active().axpy(reinterpret_cast<double*>(acc.data()),
                        reinterpret_cast<const double*>(scratch.entries.data()), 1.0,
                        2 * acc.size());
  }
  rho.entries = std::move(acc);
}

DensityMatrix apply_channel(const DensityMatrix& rho, const KrausChannel& channel,
                            const std::vector<int>& targets) {
  DensityMatrix out = rho;
  apply_channel_inplace(out, channel, targets);
  return out;
}

void apply_channel_adjoint_inplace(DensityMatrix& a, const KrausChannel& channel,
                                   const std::vector<int>& targets) {
  if (static_cast<int>(targets.size()) != channel.arity)
    throw std::invalid_argument("channel adjoint: target count does not match channel arity");
  const std::size_t d = std::size_t{1} << channel.arity;
  std::vector<c64> acc(a.entries.size(), c64{});
  DensityMatrix scratch;
  scratch.n_qubits = a.n_qubits;
  for (const auto& k : channel.operators) {
    scratch.entries = a.entries;
    apply_left_right(scratch, dagger(k, d), k, targets);
    kern::active().axpy(reinterpret_cast<double*>(acc.data()),
                        reinterpret_cast<const double*>(scratch.entries.data()), 1.0,
                        2 * acc.size());
  }
  a.entries = std::move(acc);
}

std::vector<c64> kron(const std::vector<c64>& a, std::size_t da,
                      const std::vector<c64>& b, std::size_t db) {
  std::vector<c64> out(da * db * da * db);
  const std::size_t d = da * db;
  for (std::size_t ra = 0; ra < da; ++ra)
    for (std::size_t ca = 0; ca < da; ++ca)
      for (std::size_t rb = 0; rb < db; ++rb)
        for (std::size_t cb = 0; cb < db; ++cb)
          out[(ra * db + rb) * d + (ca * db + cb)] = a[ra * da + ca] * b[rb * db + cb];
  return out;
}

}  // namespace qmsan::qcore
