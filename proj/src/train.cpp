#include "qmsan/train.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "qmsan/qcore.hpp"
#include "qmsan/util.hpp"

namespace qmsan::train {

namespace {

using qcore::c64;
using qcore::DensityMatrix;
using qcore::StateVector;

constexpr double kPi = 3.14159265358979323846;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

int pauli_of(qcore::GateKind kind) {
  switch (kind) {
    case qcore::GateKind::Rx:
      return 1;
    case qcore::GateKind::Ry:
      return 2;
    case qcore::GateKind::Rz:
      return 3;
    default:
      return 0;
  }
}

// Everything fixed for a run: the circuit schedule, scaled positional angles
// and the noise channels.
struct RunContext {
  embed::CircuitSpec spec;
  std::vector<std::vector<double>> positions;
  qcore::KrausChannel two_chan;
  qcore::KrausChannel single_chan;
  bool has_two = false;
  bool has_single = false;

  const double* position_ptr(int s) const {
    return positions.empty() ? nullptr : positions[s].data();
  }
};

RunContext make_context(const TrainConfig& cfg) {
  RunContext ctx;
  ctx.spec = embed::build_circuit(cfg.n_qubits, cfg.layers, cfg.config, cfg.positional);
  if (cfg.positional) ctx.positions = embed::scale_positions(cfg.sequence_length, cfg.n_qubits);
  if (cfg.noise && !cfg.noise->empty()) {
    if (cfg.noise->two_qubit) {
      ctx.two_chan = qcore::make_depolarizing_2q(cfg.noise->two_qubit->p);
      ctx.has_two = true;
    }
    if (cfg.noise->single_qubit) {
      switch (cfg.noise->single_qubit->kind) {
        case NoisePlan::Kind::Depolarizing:
          ctx.single_chan = qcore::make_depolarizing_1q(cfg.noise->single_qubit->p);
          break;
        case NoisePlan::Kind::AmplitudeDamping:
          ctx.single_chan = qcore::make_amplitude_damping(cfg.noise->single_qubit->p);
          break;
        case NoisePlan::Kind::PhaseDamping:
          ctx.single_chan = qcore::make_phase_damping(cfg.noise->single_qubit->p);
          break;
      }
      ctx.has_single = true;
    }
  }
  return ctx;
}

embed::ScaleMap scale_map_of(const Scaling& sc) {
  return embed::make_scale_map(sc.lo, sc.hi, kPi);
}

std::vector<int> token_rows(const std::vector<std::string>& tokens,
                            const std::map<std::string, int>& vocab, const ParamLayout& layout,
                            int sequence_length) {
  const auto kept = textdata::truncate(tokens, sequence_length);
  textdata::EmbeddingTable table{layout.vocab_rows, static_cast<std::size_t>(layout.n_qubits)};
  std::vector<int> rows(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i)
    rows[i] = textdata::lookup_row(vocab, table, kept[i]);
  return rows;
}

std::vector<std::vector<double>> scaled_inputs(const TrainState& state, const Scaling& sc,
                                               const std::vector<int>& rows) {
  const int n = state.layout.n_qubits;
  const auto map = scale_map_of(sc);
  const double* table = state.params.data() + state.layout.table_offset();
  std::vector<std::vector<double>> x(rows.size(), std::vector<double>(n));
  for (std::size_t s = 0; s < rows.size(); ++s)
    for (int i = 0; i < n; ++i)
      x[s][i] = map.apply(table[static_cast<std::size_t>(rows[s]) * n + i]);
  return x;
}

// --- pure-state adjoint -------------------------------------------------

void sv_apply_gate(std::vector<c64>& amps, int n, const embed::CircuitGate& g, double angle) {
  StateVector view{n, std::move(amps)};
  if (g.kind == qcore::GateKind::Rzz)
    qcore::apply_rzz_inplace(view, g.targets[0], g.targets[1], angle);
  else
    qcore::apply_rotation_inplace(view, g.kind, g.targets[0], angle);
  amps = std::move(view.amps);
}

// Walks gates in reverse over |psi> and the bra seed b = O|psi>, adding
// dE/d(angle) = Im<b|G|phi> (2 Im for Rzz) into the bound slot.
void adjoint_pass_sv(const embed::CircuitSpec& spec, const embed::Bindings& bind,
                     std::vector<c64> psi, std::vector<c64> b, double* dtheta, double* dx) {
  const int n = spec.n_qubits;
  const std::size_t dim = psi.size();
  std::vector<c64> gphi(dim);
  for (auto it = spec.gates.rbegin(); it != spec.gates.rend(); ++it) {
    const auto& g = *it;
    const double angle = embed::slot_angle(g.slot, bind);
    if (g.slot.kind != embed::SlotKind::Position) {
      gphi = psi;
      double coeff = 1.0;
      if (g.kind == qcore::GateKind::Rzz) {
        const std::uint64_t mask = (std::uint64_t{1} << (n - 1 - g.targets[0])) |
                                   (std::uint64_t{1} << (n - 1 - g.targets[1]));
        kern::active().apply_phase_parity(gphi.data(), dim, mask, 1.0, -1.0);
        coeff = 2.0;
      } else {
        qcore::apply_pauli_inplace(gphi, n, g.targets[0], pauli_of(g.kind));
      }
      const c64 ip = kern::active().inner_conj(gphi.data(), b.data(), dim);  // <b|G|phi>
      const double term = coeff * ip.imag();
      if (g.slot.kind == embed::SlotKind::Trainable)
        dtheta[g.slot.index] += term;
      else
        dx[g.slot.index] += term;
    }
    sv_apply_gate(psi, n, g, -angle);
    sv_apply_gate(b, n, g, -angle);
  }
}

// (G (x) I_B) |psi> with G acting on the kept (most significant) block
std::vector<c64> apply_keep_block(const std::vector<c64>& g, std::size_t dk,
                                  const std::vector<c64>& psi, std::size_t db) {
  std::vector<c64> out(psi.size(), c64{});
  for (std::size_t a = 0; a < dk; ++a)
    for (std::size_t a2 = 0; a2 < dk; ++a2) {
      const c64 w = g[a * dk + a2];
      if (w == c64{}) continue;
      for (std::size_t t = 0; t < db; ++t) out[a * db + t] += w * psi[a2 * db + t];
    }
  return out;
}

// --- noisy (density-matrix) adjoint --------------------------------------

struct DmStep {
  bool is_gate = true;
  const embed::CircuitGate* gate = nullptr;
  double angle = 0.0;
  const qcore::KrausChannel* chan = nullptr;
  std::vector<int> targets;
  DensityMatrix snapshot;  // post-step state, kept for gate steps
};

DensityMatrix run_noisy_recorded(const RunContext& ctx, const embed::Bindings& bind,
                                 std::vector<DmStep>* steps) {
  DensityMatrix rho = DensityMatrix::zero_state(ctx.spec.n_qubits);
  for (const auto& g : ctx.spec.gates) {
    const double angle = embed::slot_angle(g.slot, bind);
    if (g.kind == qcore::GateKind::Rzz)
      qcore::apply_rzz_dm_inplace(rho, g.targets[0], g.targets[1], angle);
    else
      qcore::apply_rotation_dm_inplace(rho, g.kind, g.targets[0], angle);
    if (steps) steps->push_back({true, &g, angle, nullptr, {}, rho});
    if (ctx.has_two && g.kind == qcore::GateKind::Rzz) {
      qcore::apply_channel_inplace(rho, ctx.two_chan, g.targets);
      if (steps) steps->push_back({false, nullptr, 0.0, &ctx.two_chan, g.targets, {}});
    }
  }
  if (ctx.has_single) {
    for (int q = 0; q < ctx.spec.n_qubits; ++q) {
      qcore::apply_channel_inplace(rho, ctx.single_chan, {q});
      if (steps) steps->push_back({false, nullptr, 0.0, &ctx.single_chan, {q}, {}});
    }
  }
  return rho;
}

// Heisenberg-picture walk: A <- step^dag(A), collecting
// dE/d(angle) = coeff * Im tr(A G rho_g) from the stored post-gate states.
void adjoint_pass_dm(const embed::CircuitSpec& spec, const std::vector<DmStep>& steps,
                     DensityMatrix a, double* dtheta, double* dx) {
  const int n = spec.n_qubits;
  const int reg = 2 * n;
  std::vector<c64> scratch;
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    if (!it->is_gate) {
      qcore::apply_channel_adjoint_inplace(a, *it->chan, it->targets);
      continue;
    }
    const auto& g = *it->gate;
    if (g.slot.kind != embed::SlotKind::Position) {
      scratch = it->snapshot.entries;
      double coeff = 1.0;
      if (g.kind == qcore::GateKind::Rzz) {
        // left-multiply by Z(x)Z on the ket side of the flattened matrix
        const std::uint64_t mask = (std::uint64_t{1} << (reg - 1 - g.targets[0])) |
                                   (std::uint64_t{1} << (reg - 1 - g.targets[1]));
        kern::active().apply_phase_parity(scratch.data(), scratch.size(), mask, 1.0, -1.0);
        coeff = 2.0;
      } else {
        qcore::apply_pauli_inplace(scratch, reg, g.targets[0], pauli_of(g.kind));
      }
      // tr(A M) = conj(sum_ij A_ij conj(M_ij)) for Hermitian A
      const c64 h = kern::active().inner_conj(a.entries.data(), scratch.data(), scratch.size());
      const double term = coeff * (-h.imag());
      if (g.slot.kind == embed::SlotKind::Trainable)
        dtheta[g.slot.index] += term;
      else
        dx[g.slot.index] += term;
    }
    if (g.kind == qcore::GateKind::Rzz)
      qcore::apply_rzz_dm_inplace(a, g.targets[0], g.targets[1], -it->angle);
    else
      qcore::apply_rotation_dm_inplace(a, g.kind, g.targets[0], -it->angle);
  }
}

DensityMatrix keep_block_observable(const std::vector<c64>& g, int n_qubits, int kept) {
  const std::size_t dk = std::size_t{1} << kept;
  const std::size_t db = std::size_t{1} << (n_qubits - kept);
  const std::size_t d = dk * db;
  DensityMatrix obs;
  obs.n_qubits = n_qubits;
  obs.entries.assign(d * d, c64{});
  for (std::size_t a = 0; a < dk; ++a)
    for (std::size_t a2 = 0; a2 < dk; ++a2) {
      const c64 w = g[a * dk + a2];
      if (w == c64{}) continue;
      for (std::size_t t = 0; t < db; ++t) obs.entries[(a * db + t) * d + (a2 * db + t)] = w;
    }
  return obs;
}

DensityMatrix z_observable(const std::vector<double>& weights, int n_qubits) {
  const std::size_t d = std::size_t{1} << n_qubits;
  DensityMatrix obs;
  obs.n_qubits = n_qubits;
  obs.entries.assign(d * d, c64{});
  for (std::size_t f = 0; f < d; ++f) {
    double v = 0.0;
    for (int q = 0; q < n_qubits; ++q) {
      const std::uint64_t mask = std::uint64_t{1} << (n_qubits - 1 - q);
      v += (f & mask) ? -weights[q] : weights[q];
    }
    obs.entries[f * d + f] = v;
  }
  return obs;
}

// --- per-sample forward + backward ---------------------------------------

struct SampleResult {
  double y_hat = 0.5;
  std::vector<double> y_mean;
  attention::AttentionArtifacts artifacts;
};

// Forward pass for one sample; when `grad` is non-null, backpropagates the
// sample's share of the batch MSE, d(loss)/d(y_hat) = (y_hat - label) * inv_n,
// into it.
SampleResult run_sample(const TrainState& state, const TrainConfig& cfg, const RunContext& ctx,
                        const Scaling& sc, const std::vector<int>& rows, bool noisy,
                        double label, double inv_n, double* grad) {
  const int n = cfg.n_qubits;
  const int s_len = static_cast<int>(rows.size());
  if (s_len == 0) throw std::invalid_argument("sample is empty after truncation");
  const std::size_t dim = std::size_t{1} << n;
  const int kept = n / 2;
  const std::size_t dk = std::size_t{1} << kept;
  const std::size_t db = dim / dk;
  const bool mixed = cfg.mode == AttentionMode::MixedTrace;
  if (mixed && n % 2 != 0)
    throw std::invalid_argument("mixed-state attention needs an even qubit count");

  const auto x = scaled_inputs(state, sc, rows);
  const double* theta_q = state.params.data() + state.layout.theta_q_offset();
  const double* theta_k = state.params.data() + state.layout.theta_k_offset();
  const double* theta_v = state.params.data() + state.layout.theta_v_offset();
  const std::size_t plen = state.layout.per_embedding;

  auto bind = [&](int s, const double* theta) {
    return embed::Bindings{x[s].data(), ctx.position_ptr(s), theta, plen};
  };

  // forward: states (pure path) or recorded evolutions (noisy path)
  std::vector<StateVector> qs, ks, vs;
  std::vector<std::vector<DmStep>> q_steps, k_steps, v_steps;
  std::vector<DensityMatrix> rho(s_len), sigma(s_len), v_full;
  std::vector<double> values(static_cast<std::size_t>(s_len) * n);
  std::vector<c64> ip;  // pure-kernel inner products

  const auto keep = [&] {
    std::vector<int> k(kept);
    for (int q = 0; q < kept; ++q) k[q] = q;
    return k;
  }();

  if (!noisy) {
    qs.resize(s_len);
    ks.resize(s_len);
    vs.resize(s_len);
    for (int s = 0; s < s_len; ++s) {
      qs[s] = embed::run_circuit(ctx.spec, bind(s, theta_q));
      ks[s] = embed::run_circuit(ctx.spec, bind(s, theta_k));
      vs[s] = embed::run_circuit(ctx.spec, bind(s, theta_v));
      for (int q = 0; q < n; ++q)
        values[static_cast<std::size_t>(s) * n + q] = qcore::expectation_z(vs[s], q);
      if (mixed) {
        rho[s] = qcore::partial_trace(qcore::to_density(qs[s]), keep);
        sigma[s] = qcore::partial_trace(qcore::to_density(ks[s]), keep);
      }
    }
  } else {
    q_steps.resize(s_len);
    k_steps.resize(s_len);
    v_steps.resize(s_len);
    v_full.resize(s_len);
    for (int s = 0; s < s_len; ++s) {
      DensityMatrix q_dm = run_noisy_recorded(ctx, bind(s, theta_q), grad ? &q_steps[s] : nullptr);
      DensityMatrix k_dm = run_noisy_recorded(ctx, bind(s, theta_k), grad ? &k_steps[s] : nullptr);
      v_full[s] = run_noisy_recorded(ctx, bind(s, theta_v), grad ? &v_steps[s] : nullptr);
      for (int q = 0; q < n; ++q)
        values[static_cast<std::size_t>(s) * n + q] = qcore::expectation_z(v_full[s], q);
      if (mixed) {
        rho[s] = qcore::partial_trace(q_dm, keep);
        sigma[s] = qcore::partial_trace(k_dm, keep);
      } else {
        rho[s] = std::move(q_dm);
        sigma[s] = std::move(k_dm);
      }
    }
  }

  // attention coefficients
  std::vector<double> alpha(static_cast<std::size_t>(s_len) * s_len);
  if (!noisy && !mixed) {
    ip.resize(alpha.size());
    for (int s = 0; s < s_len; ++s)
      for (int j = 0; j < s_len; ++j) {
        const c64 overlap = kern::active().inner_conj(qs[s].amps.data(), ks[j].amps.data(), dim);
        ip[static_cast<std::size_t>(s) * s_len + j] = overlap;
        alpha[static_cast<std::size_t>(s) * s_len + j] = std::norm(overlap);
      }
  } else {
    for (int s = 0; s < s_len; ++s)
      for (int j = 0; j < s_len; ++j)
        alpha[static_cast<std::size_t>(s) * s_len + j] = qcore::trace_overlap(rho[s], sigma[j]);
  }

  const auto coeffs = attention::normalize_rows(alpha, s_len);

  // outputs and classifier head
  std::vector<double> x_flat(static_cast<std::size_t>(s_len) * n);
  for (int s = 0; s < s_len; ++s)
    for (int q = 0; q < n; ++q) x_flat[static_cast<std::size_t>(s) * n + q] = x[s][q];
  const auto outputs = attention::residual_outputs(x_flat, coeffs, values, s_len, n);

  SampleResult res;
  res.y_mean.assign(n, 0.0);
  for (int s = 0; s < s_len; ++s)
    for (int q = 0; q < n; ++q) res.y_mean[q] += outputs[static_cast<std::size_t>(s) * n + q];
  for (int q = 0; q < n; ++q) res.y_mean[q] /= s_len;

  const double* w = state.params.data() + state.layout.w_offset();
  double z = state.params[state.layout.b_offset()];
  for (int q = 0; q < n; ++q) z += w[q] * res.y_mean[q];
  res.y_hat = sigmoid(z);

  res.artifacts.seq_len = s_len;
  res.artifacts.n_qubits = n;
  res.artifacts.raw_alpha = alpha;
  res.artifacts.coeffs = coeffs;
  res.artifacts.values = values;
  res.artifacts.outputs = outputs;

  if (!grad) return res;

  // ---- backward ----
  const double dyhat = (res.y_hat - label) * inv_n;
  const double dz = dyhat * res.y_hat * (1.0 - res.y_hat);
  grad[state.layout.b_offset()] += dz;
  std::vector<double> dybar(n);
  for (int q = 0; q < n; ++q) {
    grad[state.layout.w_offset() + q] += dz * res.y_mean[q];
    dybar[q] = dz * w[q];
  }
  // every row of outputs receives dybar / S
  std::vector<double> dy(n);
  for (int q = 0; q < n; ++q) dy[q] = dybar[q] / s_len;

  std::vector<std::vector<double>> dx(s_len, std::vector<double>(n, 0.0));
  for (int s = 0; s < s_len; ++s)
    for (int q = 0; q < n; ++q) dx[s][q] += dy[q];  // residual path

  // dC[s][j] = dy . v_j ; dv[j] = sum_s C[s][j] dy
  std::vector<double> dcoeff(static_cast<std::size_t>(s_len) * s_len);
  std::vector<std::vector<double>> dv(s_len, std::vector<double>(n, 0.0));
  for (int s = 0; s < s_len; ++s)
    for (int j = 0; j < s_len; ++j) {
      double acc = 0.0;
      for (int q = 0; q < n; ++q) acc += dy[q] * values[static_cast<std::size_t>(j) * n + q];
      dcoeff[static_cast<std::size_t>(s) * s_len + j] = acc;
      const double c = coeffs[static_cast<std::size_t>(s) * s_len + j];
      for (int q = 0; q < n; ++q) dv[j][q] += c * dy[q];
    }

  // through row normalization: dalpha = (dC - sum_m dC_m C_m) / rowsum
  std::vector<double> dalpha(static_cast<std::size_t>(s_len) * s_len);
  for (int s = 0; s < s_len; ++s) {
    double rowsum = 0.0, dot = 0.0;
    for (int j = 0; j < s_len; ++j) {
      rowsum += alpha[static_cast<std::size_t>(s) * s_len + j];
      dot += dcoeff[static_cast<std::size_t>(s) * s_len + j] *
             coeffs[static_cast<std::size_t>(s) * s_len + j];
    }
    for (int j = 0; j < s_len; ++j)
      dalpha[static_cast<std::size_t>(s) * s_len + j] =
          (dcoeff[static_cast<std::size_t>(s) * s_len + j] - dot) / rowsum;
  }

  double* dtheta_q = grad + state.layout.theta_q_offset();
  double* dtheta_k = grad + state.layout.theta_k_offset();
  double* dtheta_v = grad + state.layout.theta_v_offset();

  if (!noisy) {
    // value circuits
    for (int s = 0; s < s_len; ++s) {
      std::vector<c64> b(dim);
      for (std::size_t f = 0; f < dim; ++f) {
        double wz = 0.0;
        for (int q = 0; q < n; ++q) {
          const std::uint64_t mask = std::uint64_t{1} << (n - 1 - q);
          wz += (f & mask) ? -dv[s][q] : dv[s][q];
        }
        b[f] = wz * vs[s].amps[f];
      }
      adjoint_pass_sv(ctx.spec, bind(s, theta_v), vs[s].amps, std::move(b), dtheta_v,
                      dx[s].data());
    }
    if (mixed) {
      // query circuits: observable sum_j dalpha[s][j] sigma_j on the kept block
      for (int s = 0; s < s_len; ++s) {
        std::vector<c64> gmat(dk * dk, c64{});
        for (int j = 0; j < s_len; ++j) {
          const double wgt = dalpha[static_cast<std::size_t>(s) * s_len + j];
          kern::active().axpy(reinterpret_cast<double*>(gmat.data()),
                              reinterpret_cast<const double*>(sigma[j].entries.data()), wgt,
                              2 * gmat.size());
        }
        auto b = apply_keep_block(gmat, dk, qs[s].amps, db);
        adjoint_pass_sv(ctx.spec, bind(s, theta_q), qs[s].amps, std::move(b), dtheta_q,
                        dx[s].data());
      }
      // key circuits
      for (int j = 0; j < s_len; ++j) {
        std::vector<c64> hmat(dk * dk, c64{});
        for (int s = 0; s < s_len; ++s) {
          const double wgt = dalpha[static_cast<std::size_t>(s) * s_len + j];
          kern::active().axpy(reinterpret_cast<double*>(hmat.data()),
                              reinterpret_cast<const double*>(rho[s].entries.data()), wgt,
                              2 * hmat.size());
        }
        auto b = apply_keep_block(hmat, dk, ks[j].amps, db);
        adjoint_pass_sv(ctx.spec, bind(j, theta_k), ks[j].amps, std::move(b), dtheta_k,
                        dx[j].data());
      }
    } else {
      // pure kernel: alpha = |<k_j|q_s>|^2
      for (int s = 0; s < s_len; ++s) {
        std::vector<c64> b(dim, c64{});
        for (int j = 0; j < s_len; ++j) {
          const c64 wgt = dalpha[static_cast<std::size_t>(s) * s_len + j] *
                          ip[static_cast<std::size_t>(s) * s_len + j];
          for (std::size_t f = 0; f < dim; ++f) b[f] += wgt * ks[j].amps[f];
        }
        adjoint_pass_sv(ctx.spec, bind(s, theta_q), qs[s].amps, std::move(b), dtheta_q,
                        dx[s].data());
      }
      for (int j = 0; j < s_len; ++j) {
        std::vector<c64> b(dim, c64{});
        for (int s = 0; s < s_len; ++s) {
          const c64 wgt = dalpha[static_cast<std::size_t>(s) * s_len + j] *
                          std::conj(ip[static_cast<std::size_t>(s) * s_len + j]);
          for (std::size_t f = 0; f < dim; ++f) b[f] += wgt * qs[s].amps[f];
        }
        adjoint_pass_sv(ctx.spec, bind(j, theta_k), ks[j].amps, std::move(b), dtheta_k,
                        dx[j].data());
      }
    }
  } else {
    for (int s = 0; s < s_len; ++s) {
      adjoint_pass_dm(ctx.spec, v_steps[s], z_observable(dv[s], n), dtheta_v,
                      dx[s].data());
    }
    for (int s = 0; s < s_len; ++s) {
      DensityMatrix obs;
      if (mixed) {
        std::vector<c64> gmat(dk * dk, c64{});
        for (int j = 0; j < s_len; ++j) {
          const double wgt = dalpha[static_cast<std::size_t>(s) * s_len + j];
          kern::active().axpy(reinterpret_cast<double*>(gmat.data()),
                              reinterpret_cast<const double*>(sigma[j].entries.data()), wgt,
                              2 * gmat.size());
        }
        obs = keep_block_observable(gmat, n, kept);
      } else {
        obs.n_qubits = n;
        obs.entries.assign(dim * dim, c64{});
        for (int j = 0; j < s_len; ++j)
          kern::active().axpy(reinterpret_cast<double*>(obs.entries.data()),
                              reinterpret_cast<const double*>(sigma[j].entries.data()),
                              dalpha[static_cast<std::size_t>(s) * s_len + j],
                              2 * obs.entries.size());
      }
      adjoint_pass_dm(ctx.spec, q_steps[s], std::move(obs), dtheta_q,
                      dx[s].data());
    }
    for (int j = 0; j < s_len; ++j) {
      DensityMatrix obs;
      if (mixed) {
        std::vector<c64> hmat(dk * dk, c64{});
        for (int s = 0; s < s_len; ++s) {
          const double wgt = dalpha[static_cast<std::size_t>(s) * s_len + j];
          kern::active().axpy(reinterpret_cast<double*>(hmat.data()),
                              reinterpret_cast<const double*>(rho[s].entries.data()), wgt,
                              2 * hmat.size());
        }
        obs = keep_block_observable(hmat, n, kept);
      } else {
        obs.n_qubits = n;
        obs.entries.assign(dim * dim, c64{});
        for (int s = 0; s < s_len; ++s)
          kern::active().axpy(reinterpret_cast<double*>(obs.entries.data()),
                              reinterpret_cast<const double*>(rho[s].entries.data()),
                              dalpha[static_cast<std::size_t>(s) * s_len + j],
                              2 * obs.entries.size());
      }
      adjoint_pass_dm(ctx.spec, k_steps[j], std::move(obs), dtheta_k,
                      dx[j].data());
    }
  }

  // scaled inputs back to the embedding table and the extrema donors
  if (cfg.trainable_embedding) {
    const int nq = n;
    const double inv_range = 1.0 / (sc.hi - sc.lo);
    const std::size_t table_off = state.layout.table_offset();
    double dlo = 0.0, dhi = 0.0;
    for (int s = 0; s < s_len; ++s) {
      for (int q = 0; q < nq; ++q) {
        const double d = dx[s][q];
        grad[table_off + static_cast<std::size_t>(rows[s]) * nq + q] += d * kPi * inv_range;
        dlo += d * (x[s][q] - kPi) * inv_range;
        dhi += d * (-x[s][q]) * inv_range;
      }
    }
    grad[table_off + sc.argmin] += dlo;
    grad[table_off + sc.argmax] += dhi;
  }

  return res;
}

}  // namespace

void TrainConfig::validate() const {
  if (n_qubits < 2) throw std::invalid_argument("qubits must be >= 2");
  if (layers < 0) throw std::invalid_argument("layers must be >= 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (conv_patience < 1) throw std::invalid_argument("conv_patience must be >= 1");
  if (sequence_length < 1) throw std::invalid_argument("sequence_length must be >= 1");
  if (!(init_sigma > 0.0)) throw std::invalid_argument("init_sigma must be > 0");
  if (mode == AttentionMode::MixedTrace && n_qubits % 2 != 0)
    throw std::invalid_argument("mixed-state attention needs an even qubit count");
}

ParamLayout ParamLayout::make(const TrainConfig& config, std::size_t vocab_size) {
  ParamLayout layout;
  layout.n_qubits = config.n_qubits;
  layout.layers = config.layers;
  layout.config = config.config;
  layout.positional = config.positional;
  layout.per_embedding =
      embed::params_per_embedding(config.config, config.n_qubits, config.layers);
  layout.vocab_rows = vocab_size + 1;
  return layout;
}

TrainState init_state(const ParamLayout& layout, double init_sigma, std::uint64_t seed) {
  TrainState state;
  state.layout = layout;
  state.params.assign(layout.total(), 0.0);
  state.adam_m.assign(layout.total(), 0.0);
  state.adam_v.assign(layout.total(), 0.0);
  Rng rng(seed);
  // circuit angles, word table and classifier weights share the init
  // distribution; the bias starts at zero
  for (std::size_t i = 0; i < layout.b_offset(); ++i) state.params[i] = rng.normal(0.0, init_sigma);
  state.params[layout.b_offset()] = 0.0;
  return state;
}

Scaling compute_scaling(const TrainState& state) {
  const auto& layout = state.layout;
  const double* table = state.params.data() + layout.table_offset();
  const std::size_t used =
      (layout.vocab_rows - 1) * static_cast<std::size_t>(layout.n_qubits);  // UNK excluded
  if (used == 0) throw std::invalid_argument("empty vocabulary");
  Scaling sc;
  sc.lo = sc.hi = table[0];
  for (std::size_t i = 1; i < used; ++i) {
    if (table[i] < sc.lo) {
      sc.lo = table[i];
      sc.argmin = i;
    }
    if (table[i] > sc.hi) {
      sc.hi = table[i];
      sc.argmax = i;
    }
  }
  if (!(sc.hi > sc.lo)) throw std::invalid_argument("degenerate input scaling range");
  return sc;
}

ForwardResult forward(const std::vector<std::string>& tokens,
                      const std::map<std::string, int>& vocab, const TrainState& state,
                      const TrainConfig& config, bool eval_phase) {
  const RunContext ctx = make_context(config);
  Scaling sc;
  if (state.scale_frozen) {
    sc.lo = state.scale_lo;
    sc.hi = state.scale_hi;
  } else {
    sc = compute_scaling(state);
  }
  const auto rows = token_rows(tokens, vocab, state.layout, config.sequence_length);
  const bool noisy = eval_phase ? config.noisy_eval() : config.noisy_training();
  const auto res = run_sample(state, config, ctx, sc, rows, noisy, 0.0, 0.0, nullptr);
  ForwardResult out;
  out.y_hat = res.y_hat;
  out.y_mean = res.y_mean;
  out.artifacts = res.artifacts;
  return out;
}

double mse_loss(const std::vector<double>& predictions, const std::vector<double>& labels) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("mse_loss: length mismatch");
  if (predictions.empty()) throw std::invalid_argument("mse_loss: empty inputs");
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - labels[i];
    acc += d * d;
  }
  return acc / (2.0 * static_cast<double>(predictions.size()));
}

BatchGradient gradients(const TrainState& state, const textdata::Corpus& corpus,
                        const std::vector<std::size_t>& batch, const TrainConfig& config) {
  if (batch.empty()) throw std::invalid_argument("gradients: empty batch");
  const RunContext ctx = make_context(config);
  const Scaling sc = compute_scaling(state);
  const bool noisy = config.noisy_training();
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  const std::size_t total = state.layout.total();
  std::vector<std::vector<double>> slots(batch.size());
  std::vector<double> preds(batch.size());

  util::parallel_for(batch.size(), config.threads, [&](std::size_t i) {
    const auto& sample = corpus.samples[batch[i]];
    slots[i].assign(total, 0.0);
    const auto rows =
        token_rows(sample.tokens, corpus.vocab, state.layout, config.sequence_length);
    const auto fwd =
        run_sample(state, config, ctx, sc, rows, noisy, sample.label, inv_n, slots[i].data());
    preds[i] = fwd.y_hat;
  });

  BatchGradient out;
  out.grad.assign(total, 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i)  // fixed reduction order
    kern::active().axpy(out.grad.data(), slots[i].data(), 1.0, total);
  std::vector<double> labels(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = corpus.samples[batch[i]].label;
  out.loss = mse_loss(preds, labels);
  out.predictions = std::move(preds);
  if (!std::isfinite(out.loss)) throw TrainingDiverged("loss became non-finite");
  for (double g : out.grad)
    if (!std::isfinite(g)) throw TrainingDiverged("gradient became non-finite");
  return out;
}

void adam_step(TrainState& state, const std::vector<double>& grad, double lr) {
  if (grad.size() != state.params.size())
    throw std::invalid_argument("adam_step: gradient layout mismatch");
  for (double g : grad)
    if (!std::isfinite(g)) throw TrainingDiverged("gradient became non-finite");
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const long t = state.step + 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  kern::active().adam_update(state.params.data(), state.adam_m.data(), state.adam_v.data(),
                             grad.data(), grad.size(), lr, beta1, beta2, eps, bc1, bc2);
  state.step = t;
}

TrainResult train(const textdata::Corpus& corpus, const std::vector<std::size_t>& train_idx,
                  const TrainConfig& config) {
  config.validate();
  if (corpus.samples.empty() || train_idx.empty())
    throw std::invalid_argument("training set is empty");

  const ParamLayout layout = ParamLayout::make(config, corpus.vocab_size());
  TrainResult result;
  result.state = init_state(layout, config.init_sigma, config.seed);

  Rng shuffle_rng = Rng(config.seed).fork(0xb1);
  std::vector<std::size_t> perm = train_idx;
  std::size_t pos = perm.size();  // trigger shuffle on first batch

  int consecutive = 0;
  for (int iter = 1; iter <= config.max_iters; ++iter) {
    if (pos >= perm.size()) {
      for (std::size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[shuffle_rng.uniform_index(i)]);
      pos = 0;
    }
    const std::size_t take = std::min<std::size_t>(config.batch_size, perm.size() - pos);
    const std::vector<std::size_t> batch(perm.begin() + pos, perm.begin() + pos + take);
    pos += take;

    const BatchGradient bg = gradients(result.state, corpus, batch, config);
    adam_step(result.state, bg.grad, config.learning_rate);

    double ginf = 0.0;
    for (double g : bg.grad) ginf = std::max(ginf, std::abs(g));
    const double train_acc = evaluate(corpus, train_idx, result.state, config);
    result.history.push_back({iter, bg.loss, train_acc, ginf});

    consecutive = (ginf < config.conv_tol) ? consecutive + 1 : 0;
    if (consecutive >= config.conv_patience) {
      result.converged = true;
      break;
    }
  }

  const Scaling sc = compute_scaling(result.state);
  result.state.scale_lo = sc.lo;
  result.state.scale_hi = sc.hi;
  result.state.scale_frozen = true;
  return result;
}

double evaluate(const textdata::Corpus& corpus, const std::vector<std::size_t>& indices,
                const TrainState& state, const TrainConfig& config) {
  if (indices.empty()) return 0.0;
  const RunContext ctx = make_context(config);
  Scaling sc;
  if (state.scale_frozen) {
    sc.lo = state.scale_lo;
    sc.hi = state.scale_hi;
  } else {
    sc = compute_scaling(state);
  }
  const bool noisy = config.noisy_eval();
  std::vector<double> correct(indices.size(), 0.0);
  util::parallel_for(indices.size(), config.threads, [&](std::size_t i) {
    const auto& sample = corpus.samples[indices[i]];
    const auto rows =
        token_rows(sample.tokens, corpus.vocab, state.layout, config.sequence_length);
    const auto res = run_sample(state, config, ctx, sc, rows, noisy, 0.0, 0.0, nullptr);
    const int predicted = res.y_hat >= 0.5 ? 1 : 0;  // tie at 0.5 classifies as 1
    correct[i] = predicted == sample.label ? 1.0 : 0.0;
  });
  double acc = 0.0;
  for (double c : correct) acc += c;
  return acc / static_cast<double>(indices.size());
}

// --- checkpoint ---

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  nlohmann::json j;
  j["format"] = 1;
  j["config"] = nlohmann::json::parse(ckpt.config_json);
  j["config_hash"] = ckpt.config_hash;
  j["seed"] = ckpt.seed;
  const auto& layout = ckpt.state.layout;
  j["layout"] = {
      {"n_qubits", layout.n_qubits},
      {"layers", layout.layers},
      {"entangler", embed::to_string(layout.config)},
      {"positional", layout.positional},
      {"per_embedding", layout.per_embedding},
      {"vocab_rows", layout.vocab_rows},
      {"segments",
       {{"theta_q", layout.theta_q_offset()},
        {"theta_k", layout.theta_k_offset()},
        {"theta_v", layout.theta_v_offset()},
        {"table", layout.table_offset()},
        {"w", layout.w_offset()},
        {"b", layout.b_offset()}}},
  };
  j["params"] = ckpt.state.params;
  j["adam_m"] = ckpt.state.adam_m;
  j["adam_v"] = ckpt.state.adam_v;
  j["step"] = ckpt.state.step;
  j["scale_lo"] = ckpt.state.scale_lo;
  j["scale_hi"] = ckpt.state.scale_hi;
  nlohmann::json vocab = nlohmann::json::object();
  for (const auto& [tok, idx] : ckpt.vocab) vocab[tok] = idx;
  j["vocab"] = std::move(vocab);
  return j.dump(2);
}

Checkpoint checkpoint_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Checkpoint ckpt;
  ckpt.config_json = j.at("config").dump();
  ckpt.config_hash = j.at("config_hash").get<std::string>();
  ckpt.seed = j.at("seed").get<std::uint64_t>();
  const auto& jl = j.at("layout");
  ckpt.state.layout.n_qubits = jl.at("n_qubits").get<int>();
  ckpt.state.layout.layers = jl.at("layers").get<int>();
  ckpt.state.layout.config = embed::entangler_from_string(jl.at("entangler").get<std::string>());
  ckpt.state.layout.positional = jl.at("positional").get<bool>();
  ckpt.state.layout.per_embedding = jl.at("per_embedding").get<std::size_t>();
  ckpt.state.layout.vocab_rows = jl.at("vocab_rows").get<std::size_t>();
  ckpt.state.params = j.at("params").get<std::vector<double>>();
  ckpt.state.adam_m = j.at("adam_m").get<std::vector<double>>();
  ckpt.state.adam_v = j.at("adam_v").get<std::vector<double>>();
  ckpt.state.step = j.at("step").get<long>();
  ckpt.state.scale_lo = j.at("scale_lo").get<double>();
  ckpt.state.scale_hi = j.at("scale_hi").get<double>();
  ckpt.state.scale_frozen = true;
  if (ckpt.state.params.size() != ckpt.state.layout.total())
    throw std::runtime_error("checkpoint parameter vector does not match its layout");
  for (const auto& [tok, idx] : j.at("vocab").items()) ckpt.vocab[tok] = idx.get<int>();
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << checkpoint_to_json(ckpt) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return checkpoint_from_json(text);
}

}  // namespace qmsan::train
