#include "qmsan/embed.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "json.hpp"

namespace qmsan::embed {

namespace {

constexpr double kPi = 3.14159265358979323846;

void apply_sv(StateVector& sv, const CircuitGate& g, double angle) {
  if (g.kind == qcore::GateKind::Rzz)
    qcore::apply_rzz_inplace(sv, g.targets[0], g.targets[1], angle);
  else
    qcore::apply_rotation_inplace(sv, g.kind, g.targets[0], angle);
}

void apply_dm(DensityMatrix& rho, const CircuitGate& g, double angle) {
  if (g.kind == qcore::GateKind::Rzz)
    qcore::apply_rzz_dm_inplace(rho, g.targets[0], g.targets[1], angle);
  else
    qcore::apply_rotation_dm_inplace(rho, g.kind, g.targets[0], angle);
}

const char* gate_name(qcore::GateKind kind) {
  switch (kind) {
    case qcore::GateKind::Rx:
      return "rx";
    case qcore::GateKind::Ry:
      return "ry";
    case qcore::GateKind::Rz:
      return "rz";
    case qcore::GateKind::Rzz:
      return "rzz";
    case qcore::GateKind::ControlledSwap:
      return "cswap";
  }
  return "?";
}

const char* slot_name(SlotKind kind) {
  switch (kind) {
    case SlotKind::Data:
      return "data";
    case SlotKind::Position:
      return "position";
    case SlotKind::Trainable:
      return "trainable";
  }
  return "?";
}

std::string format_level(double p) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", p);
  return buf;
}

}  // namespace

std::string to_string(EntanglerConfig config) {
  switch (config) {
    case EntanglerConfig::Ring:
      return "ring";
    case EntanglerConfig::CircuitBlock:
      return "circuit_block";
    case EntanglerConfig::AllToAll:
      return "all_to_all";
  }
  return "?";
}

EntanglerConfig entangler_from_string(const std::string& name) {
  if (name == "ring" || name == "R") return EntanglerConfig::Ring;
  if (name == "circuit_block" || name == "CB") return EntanglerConfig::CircuitBlock;
  if (name == "all_to_all" || name == "AA") return EntanglerConfig::AllToAll;
  throw std::invalid_argument("unknown entangler configuration: " + name);
}

std::vector<std::pair<int, int>> entangler_pairs(EntanglerConfig config, int n_qubits) {
  if (n_qubits < 2) throw std::invalid_argument("entangler needs at least 2 qubits");
  std::vector<std::pair<int, int>> pairs;
  switch (config) {
    case EntanglerConfig::Ring:
      for (int q = 0; q + 1 < n_qubits; ++q) pairs.emplace_back(q, q + 1);
      pairs.emplace_back(n_qubits - 1, 0);
      break;
    case EntanglerConfig::CircuitBlock:
      for (int q = 0; q + 1 < n_qubits; ++q) pairs.emplace_back(q, q + 1);
      if (n_qubits == 2)
        pairs.emplace_back(1, 0);  // loop closure duplicates the single adjacency
      else
        pairs.emplace_back(0, n_qubits - 1);
      break;
    case EntanglerConfig::AllToAll:
      for (int a = 0; a < n_qubits; ++a)
        for (int b = a + 1; b < n_qubits; ++b) pairs.emplace_back(a, b);
      break;
  }
  return pairs;
}

std::size_t params_per_embedding(EntanglerConfig config, int n_qubits, int layers) {
  if (layers < 0) throw std::invalid_argument("layers must be >= 0");
  return static_cast<std::size_t>(layers) *
         (entangler_pairs(config, n_qubits).size() + static_cast<std::size_t>(n_qubits));
}

CircuitSpec build_circuit(int n_qubits, int layers, EntanglerConfig config, bool positional) {
  if (n_qubits < 2) throw std::invalid_argument("embedding circuit needs at least 2 qubits");
  if (layers < 0) throw std::invalid_argument("layers must be >= 0");
  CircuitSpec spec;
  spec.n_qubits = n_qubits;
  spec.layers = layers;
  spec.config = config;
  spec.positional = positional;

  const auto pairs = entangler_pairs(config, n_qubits);
  int theta_index = 0;
  auto data_block = [&] {
    for (int q = 0; q < n_qubits; ++q)
      spec.gates.push_back({qcore::GateKind::Rx, {q}, {SlotKind::Data, q}});
    if (positional)
      for (int q = 0; q < n_qubits; ++q)
        spec.gates.push_back({qcore::GateKind::Rx, {q}, {SlotKind::Position, q}});
  };
  for (int l = 0; l < layers; ++l) {
    data_block();
    for (const auto& [a, b] : pairs)
      spec.gates.push_back({qcore::GateKind::Rzz, {a, b}, {SlotKind::Trainable, theta_index++}});
    for (int q = 0; q < n_qubits; ++q)
      spec.gates.push_back({qcore::GateKind::Ry, {q}, {SlotKind::Trainable, theta_index++}});
  }
  data_block();
  return spec;
}

std::string CircuitSpec::to_json() const {
  nlohmann::json j;
  j["n_qubits"] = n_qubits;
  j["layers"] = layers;
  j["entangler"] = embed::to_string(config);
  j["positional"] = positional;
  j["trainable_count"] = params_per_embedding(config, n_qubits, layers);
  auto gate_list = nlohmann::json::array();
  for (const auto& g : gates) {
    nlohmann::json jg;
    jg["gate"] = gate_name(g.kind);
    jg["targets"] = g.targets;
    jg["bind"] = {{"kind", slot_name(g.slot.kind)}, {"index", g.slot.index}};
    gate_list.push_back(jg);
  }
  j["gates"] = std::move(gate_list);
  return j.dump(2);
}

std::vector<double> sinusoidal_pe(int position, int d_model) {
  if (position < 0) throw std::invalid_argument("position must be >= 0");
  if (d_model < 1) throw std::invalid_argument("d_model must be >= 1");
  std::vector<double> pe(d_model);
  for (int i = 0; 2 * i < d_model; ++i) {
    const double denom = std::pow(10000.0, (2.0 * i) / d_model);
    pe[2 * i] = std::sin(position / denom);
    if (2 * i + 1 < d_model) pe[2 * i + 1] = std::cos(position / denom);
  }
  return pe;
}

double ScaleMap::apply(double v) const {
  const double scaled = (v - lo) / (hi - lo) * range_max;
  if (scaled < 0.0) return 0.0;
  if (scaled > range_max) return range_max;
  return scaled;
}

double ScaleMap::derivative() const { return range_max / (hi - lo); }

ScaleMap make_scale_map(double lo, double hi, double range_max) {
  if (!(hi > lo)) throw std::invalid_argument("degenerate scaling range (max must exceed min)");
  return {lo, hi, range_max};
}

std::vector<std::vector<double>> scale_positions(int max_positions, int d_model) {
  if (max_positions < 1) throw std::invalid_argument("need at least one position");
  std::vector<std::vector<double>> pe(max_positions);
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (int s = 0; s < max_positions; ++s) {
    pe[s] = sinusoidal_pe(s, d_model);
    for (double v : pe[s]) {
      if (first || v < lo) lo = v;
      if (first || v > hi) hi = v;
      first = false;
    }
  }
  const ScaleMap map = make_scale_map(lo, hi, 2.0 * kPi);
  for (auto& row : pe)
    for (double& v : row) v = map.apply(v);
  return pe;
}

double slot_angle(const ParamSlot& slot, const Bindings& b) {
  switch (slot.kind) {
    case SlotKind::Data:
      return b.x[slot.index];
    case SlotKind::Position:
      return b.t[slot.index];
    case SlotKind::Trainable:
      return b.theta[slot.index];
  }
  return 0.0;
}

StateVector run_circuit(const CircuitSpec& spec, const Bindings& b) {
  if (spec.positional && b.t == nullptr)
    throw std::invalid_argument("circuit is positional but no position angles were bound");
  const std::size_t want = params_per_embedding(spec.config, spec.n_qubits, spec.layers);
  if (b.theta_len != want)
    throw std::invalid_argument("trainable parameter count does not match circuit layout");
  StateVector sv = StateVector::zero_state(spec.n_qubits);
  for (const auto& g : spec.gates) apply_sv(sv, g, slot_angle(g.slot, b));
  return sv;
}

StateVector run_embedding(const std::vector<double>& x, const double* t,
                          const double* theta, std::size_t theta_len, int layers,
                          EntanglerConfig config) {
  const int n = static_cast<int>(x.size());
  const CircuitSpec spec = build_circuit(n, layers, config, t != nullptr);
  Bindings b{x.data(), t, theta, theta_len};
  return run_circuit(spec, b);
}

std::string NoisePlan::to_string() const {
  if (empty()) return "none";
  std::string kind = "D";
  if (single_qubit) {
    switch (single_qubit->kind) {
      case Kind::Depolarizing:
        kind = "D";
        break;
      case Kind::AmplitudeDamping:
        kind = "AD";
        break;
      case Kind::PhaseDamping:
        kind = "PD";
        break;
    }
  }
  std::string body;
  if (single_qubit) body += format_level(single_qubit->p) + "_s";
  if (two_qubit) {
    if (!body.empty()) body += "+";
    body += format_level(two_qubit->p) + "_t";
  }
  return kind + "(" + body + ")";
}

NoisePlan NoisePlan::parse(const std::string& text) {
  NoisePlan plan;
  if (text.empty() || text == "none") return plan;

  const auto open = text.find('(');
  if (open == std::string::npos || text.back() != ')')
    throw std::invalid_argument("malformed noise plan: " + text);
  const std::string name = text.substr(0, open);
  Kind kind;
  if (name == "D")
    kind = Kind::Depolarizing;
  else if (name == "AD")
    kind = Kind::AmplitudeDamping;
  else if (name == "PD")
    kind = Kind::PhaseDamping;
  else
    throw std::invalid_argument("unknown noise type token: " + name);

  std::string body = text.substr(open + 1, text.size() - open - 2);
  std::size_t pos = 0;
  while (pos < body.size()) {
    auto next = body.find('+', pos);
    if (next == std::string::npos) next = body.size();
    const std::string item = body.substr(pos, next - pos);
    const auto us = item.rfind('_');
    if (us == std::string::npos || us + 2 != item.size())
      throw std::invalid_argument("malformed noise plan item: " + item);
    double p = 0.0;
    try {
      std::size_t used = 0;
      p = std::stod(item.substr(0, us), &used);
      if (used != us) throw std::invalid_argument("");
    } catch (...) {
      throw std::invalid_argument("malformed noise level token: " + item);
    }
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("noise level out of range in: " + item);
    const char tag = item[us + 1];
    if (tag == 's') {
      if (plan.single_qubit) throw std::invalid_argument("duplicate single-qubit part: " + text);
      plan.single_qubit = Single{kind, p};
    } else if (tag == 't') {
      if (plan.two_qubit) throw std::invalid_argument("duplicate two-qubit part: " + text);
      if (kind != Kind::Depolarizing)
        throw std::invalid_argument("two-qubit noise supports only depolarizing (D): " + text);
      plan.two_qubit = Two{p};
    } else {
      throw std::invalid_argument("malformed noise plan tag in: " + item);
    }
    pos = next + 1;
  }
  if (plan.empty()) throw std::invalid_argument("empty noise plan body: " + text);
  return plan;
}

DensityMatrix run_embedding_noisy(const std::vector<double>& x, const double* t,
                                  const double* theta, std::size_t theta_len, int layers,
                                  EntanglerConfig config, const NoisePlan& plan) {
  const int n = static_cast<int>(x.size());
  const CircuitSpec spec = build_circuit(n, layers, config, t != nullptr);
  const std::size_t want = params_per_embedding(config, n, layers);
  if (theta_len != want)
    throw std::invalid_argument("trainable parameter count does not match circuit layout");
  Bindings b{x.data(), t, theta, theta_len};

  qcore::KrausChannel two;
  if (plan.two_qubit) two = qcore::make_depolarizing_2q(plan.two_qubit->p);

  DensityMatrix rho = DensityMatrix::zero_state(n);
  for (const auto& g : spec.gates) {
    apply_dm(rho, g, slot_angle(g.slot, b));
    if (plan.two_qubit && g.kind == qcore::GateKind::Rzz)
      qcore::apply_channel_inplace(rho, two, g.targets);
  }
  if (plan.single_qubit) {
    qcore::KrausChannel single;
    switch (plan.single_qubit->kind) {
      case NoisePlan::Kind::Depolarizing:
        single = qcore::make_depolarizing_1q(plan.single_qubit->p);
        break;
      case NoisePlan::Kind::AmplitudeDamping:
        single = qcore::make_amplitude_damping(plan.single_qubit->p);
        break;
      case NoisePlan::Kind::PhaseDamping:
        single = qcore::make_phase_damping(plan.single_qubit->p);
        break;
    }
    for (int q = 0; q < n; ++q) qcore::apply_channel_inplace(rho, single, {q});
  }
  return rho;
}

}  // namespace qmsan::embed
