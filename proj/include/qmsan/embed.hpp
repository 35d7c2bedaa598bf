#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qmsan/qcore.hpp"

// The trainable embedding circuit U_emb(x, theta, L): alternating data-encoding
// blocks and trainable blocks, in Ring / Circuit-block / All-to-all entangler
// configurations, optionally with fixed positional rotations.
//
// Circuit order for L layers (first gate applied first):
//   repeat L times: [Rx(x_i) per qubit; Rx(t_i) per qubit if positional;
//                    Rzz(theta) per entangler pair; Ry(theta) per qubit]
//   then one final data block [Rx(x_i); Rx(t_i) if positional].
// L = 0 yields the bare data block.
namespace qmsan::embed {

using qcore::c64;
using qcore::DensityMatrix;
using qcore::Gate;
using qcore::StateVector;

enum class EntanglerConfig { Ring, CircuitBlock, AllToAll };

std::string to_string(EntanglerConfig config);
EntanglerConfig entangler_from_string(const std::string& name);

// Two-qubit interaction pairs for one layer, in the drawn order:
//   Ring:         (0,1),(1,2),...,(n-2,n-1),(n-1,0)
//   CircuitBlock: (0,1),(1,2),...,(n-2,n-1),(0,n-1)
//   AllToAll:     all C(n,2) pairs in lexicographic order
// For n = 2, Ring and CircuitBlock both emit (0,1),(1,0).
std::vector<std::pair<int, int>> entangler_pairs(EntanglerConfig config, int n_qubits);

// trainable angles per embedding: L * (|pairs| + n)
std::size_t params_per_embedding(EntanglerConfig config, int n_qubits, int layers);

// How a gate angle is bound when the circuit runs.
enum class SlotKind { Data, Position, Trainable };

struct ParamSlot {
  SlotKind kind;
  int index;  // data/position: qubit index; trainable: index into theta
};

struct CircuitGate {
  qcore::GateKind kind;
  std::vector<int> targets;
  ParamSlot slot;
};

struct CircuitSpec {
  int n_qubits = 0;
  int layers = 0;
  EntanglerConfig config = EntanglerConfig::Ring;
  bool positional = false;
  std::vector<CircuitGate> gates;

  std::string to_json() const;  // canonical serialization for inspect-circuit
};

CircuitSpec build_circuit(int n_qubits, int layers, EntanglerConfig config, bool positional);

// sinusoidal position encoding: entry 2i = sin(s / 10000^{2i/d}),
// entry 2i+1 = cos(s / 10000^{2i/d})
std::vector<double> sinusoidal_pe(int position, int d_model);

// Affine maps onto the rotation ranges. Extrema are global over the supplied
// values; a degenerate range (max == min) is an error.
struct ScaleMap {
  double lo = 0.0;
  double hi = 1.0;
  double range_max = 3.141592653589793;  // pi for data, 2*pi for positions

  double apply(double v) const;        // clamped to [0, range_max]
  double derivative() const;           // d(apply)/dv inside the range
};

ScaleMap make_scale_map(double lo, double hi, double range_max);

// positional angles for positions 0..max_positions-1, jointly scaled to
// [0, 2*pi] over the whole PE matrix
std::vector<std::vector<double>> scale_positions(int max_positions, int d_model);

// Bound angles for one run of the circuit.
struct Bindings {
  const double* x = nullptr;          // scaled data, length n
  const double* t = nullptr;          // positional angles, length n (may be null)
  const double* theta = nullptr;      // trainable angles
  std::size_t theta_len = 0;
};

double slot_angle(const ParamSlot& slot, const Bindings& b);

// Runs the circuit schedule directly (hot path; no CircuitSpec materialized).
StateVector run_embedding(const std::vector<double>& x, const double* t,
                          const double* theta, std::size_t theta_len, int layers,
                          EntanglerConfig config);

// Reference interpreter over an explicit CircuitSpec; cross-checked against
// run_embedding in the tests.
StateVector run_circuit(const CircuitSpec& spec, const Bindings& b);

// Noise placement for density-matrix runs. two_qubit channels are inserted
// immediately after each Rzz; single_qubit channels act on every qubit after
// the final gate of the circuit.
struct NoisePlan {
  enum class Kind { Depolarizing, AmplitudeDamping, PhaseDamping };
  struct Single {
    Kind kind = Kind::Depolarizing;
    double p = 0.0;
  };
  struct Two {
    double p = 0.0;  // always depolarizing
  };
  std::optional<Single> single_qubit;
  std::optional<Two> two_qubit;

  bool empty() const { return !single_qubit && !two_qubit; }
  std::string to_string() const;                       // Table-style notation
  static NoisePlan parse(const std::string& text);     // e.g. "D(0.01_s+0.05_t)"
};

DensityMatrix run_embedding_noisy(const std::vector<double>& x, const double* t,
                                  const double* theta, std::size_t theta_len, int layers,
                                  EntanglerConfig config, const NoisePlan& plan);

}  // namespace qmsan::embed
