#include "qmsan/attention.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace qmsan::attention {

namespace {

std::vector<int> first_half(int n_qubits) {
  if (n_qubits % 2 != 0)
    throw std::invalid_argument("mixed-state attention needs an even qubit count");
  std::vector<int> keep(n_qubits / 2);
  for (int q = 0; q < n_qubits / 2; ++q) keep[q] = q;
  return keep;
}

nlohmann::json matrix_json(const std::vector<double>& m, int rows, int cols) {
  auto out = nlohmann::json::array();
  for (int r = 0; r < rows; ++r) {
    auto row = nlohmann::json::array();
    for (int c = 0; c < cols; ++c) row.push_back(m[static_cast<std::size_t>(r) * cols + c]);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace

std::string to_string(AttentionMode mode) {
  return mode == AttentionMode::MixedTrace ? "mixed" : "pure";
}

AttentionMode mode_from_string(const std::string& name) {
  if (name == "mixed") return AttentionMode::MixedTrace;
  if (name == "pure") return AttentionMode::PureKernel;
  throw std::invalid_argument("unknown attention mode: " + name);
}

std::string AttentionArtifacts::to_json(const std::vector<std::string>& tokens) const {
  nlohmann::json j;
  j["tokens"] = tokens;
  j["coeffs"] = matrix_json(coeffs, seq_len, seq_len);
  j["raw_alpha"] = matrix_json(raw_alpha, seq_len, seq_len);
  j["values"] = matrix_json(values, seq_len, n_qubits);
  j["outputs"] = matrix_json(outputs, seq_len, n_qubits);
  return j.dump(2);
}

DensityMatrix query_state(const std::vector<double>& x, const double* t,
                          const double* theta_q, std::size_t theta_len, int layers,
                          EntanglerConfig config) {
  const auto keep = first_half(static_cast<int>(x.size()));
  const StateVector sv = embed::run_embedding(x, t, theta_q, theta_len, layers, config);
  return qcore::partial_trace(qcore::to_density(sv), keep);
}

DensityMatrix key_state(const std::vector<double>& x, const double* t,
                        const double* theta_k, std::size_t theta_len, int layers,
                        EntanglerConfig config) {
  return query_state(x, t, theta_k, theta_len, layers, config);
}

std::vector<double> value_vector(const std::vector<double>& x, const double* t,
                                 const double* theta_v, std::size_t theta_len, int layers,
                                 EntanglerConfig config) {
  const StateVector sv = embed::run_embedding(x, t, theta_v, theta_len, layers, config);
  std::vector<double> v(x.size());
  for (std::size_t q = 0; q < x.size(); ++q)
    v[q] = qcore::expectation_z(sv, static_cast<int>(q));
  return v;
}

std::vector<double> raw_attention(const std::vector<DensityMatrix>& queries,
                                  const std::vector<DensityMatrix>& keys) {
  if (queries.size() != keys.size())
    throw std::invalid_argument("raw_attention: query/key count mismatch");
  const std::size_t s = queries.size();
  std::vector<double> alpha(s * s);
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < s; ++j)
      alpha[i * s + j] = qcore::trace_overlap(queries[i], keys[j]);
  return alpha;
}

std::vector<double> raw_attention_pure(const std::vector<StateVector>& queries,
                                       const std::vector<StateVector>& keys) {
  if (queries.size() != keys.size())
    throw std::invalid_argument("raw_attention: query/key count mismatch");
  const std::size_t s = queries.size();
  std::vector<double> alpha(s * s);
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < s; ++j) {
      if (queries[i].dim() != keys[j].dim())
        throw std::invalid_argument("raw_attention: state dimension mismatch");
      const auto ip = qcore::hermitian_inner(queries[i].amps.data(), keys[j].amps.data(),
                                             queries[i].dim());
      alpha[i * s + j] = std::norm(ip);
    }
  return alpha;
}

std::vector<double> normalize_rows(const std::vector<double>& raw_alpha, int seq_len) {
  if (raw_alpha.size() != static_cast<std::size_t>(seq_len) * seq_len)
    throw std::invalid_argument("normalize_rows: shape mismatch");
  std::vector<double> c(raw_alpha.size());
  for (int s = 0; s < seq_len; ++s) {
    double sum = 0.0;
    for (int j = 0; j < seq_len; ++j) sum += raw_alpha[static_cast<std::size_t>(s) * seq_len + j];
    if (sum <= 1e-15)
      throw std::runtime_error("degenerate attention row: coefficients sum to ~0");
    for (int j = 0; j < seq_len; ++j)
      c[static_cast<std::size_t>(s) * seq_len + j] =
          raw_alpha[static_cast<std::size_t>(s) * seq_len + j] / sum;
  }
  return c;
}

std::vector<double> residual_outputs(const std::vector<double>& x_scaled,
                                     const std::vector<double>& coeffs,
                                     const std::vector<double>& values, int seq_len,
                                     int n_qubits) {
  const auto sz = static_cast<std::size_t>(seq_len);
  const auto nq = static_cast<std::size_t>(n_qubits);
  if (x_scaled.size() != sz * nq || values.size() != sz * nq || coeffs.size() != sz * sz)
    throw std::invalid_argument("residual_outputs: shape mismatch");
  std::vector<double> y = x_scaled;
  for (std::size_t s = 0; s < sz; ++s)
    for (std::size_t j = 0; j < sz; ++j)
      kern::active().axpy(y.data() + s * nq, values.data() + j * nq, coeffs[s * sz + j], nq);
  return y;
}

AttentionArtifacts compute(const std::vector<std::vector<double>>& x_scaled,
                           const std::vector<std::vector<double>>& positions,
                           const double* theta_q, const double* theta_k,
                           const double* theta_v, std::size_t theta_len, int layers,
                           EntanglerConfig config, AttentionMode mode) {
  const int s = static_cast<int>(x_scaled.size());
  if (s == 0) throw std::invalid_argument("attention over an empty sequence");
  const int n = static_cast<int>(x_scaled[0].size());
  const bool positional = !positions.empty();

  AttentionArtifacts art;
  art.seq_len = s;
  art.n_qubits = n;
  art.values.resize(static_cast<std::size_t>(s) * n);

  std::vector<StateVector> q_states(s), k_states(s);
  for (int i = 0; i < s; ++i) {
    const double* t = positional ? positions[i].data() : nullptr;
    q_states[i] = embed::run_embedding(x_scaled[i], t, theta_q, theta_len, layers, config);
    k_states[i] = embed::run_embedding(x_scaled[i], t, theta_k, theta_len, layers, config);
    const StateVector v_state =
        embed::run_embedding(x_scaled[i], t, theta_v, theta_len, layers, config);
    for (int q = 0; q < n; ++q)
      art.values[static_cast<std::size_t>(i) * n + q] = qcore::expectation_z(v_state, q);
  }

  if (mode == AttentionMode::MixedTrace) {
    const auto keep = first_half(n);
    std::vector<DensityMatrix> rho(s), sigma(s);
    for (int i = 0; i < s; ++i) {
      rho[i] = qcore::partial_trace(qcore::to_density(q_states[i]), keep);
      sigma[i] = qcore::partial_trace(qcore::to_density(k_states[i]), keep);
    }
    art.raw_alpha = raw_attention(rho, sigma);
  } else {
    art.raw_alpha = raw_attention_pure(q_states, k_states);
  }

  art.coeffs = normalize_rows(art.raw_alpha, s);
  std::vector<double> x_flat(static_cast<std::size_t>(s) * n);
  for (int i = 0; i < s; ++i)
    for (int q = 0; q < n; ++q) x_flat[static_cast<std::size_t>(i) * n + q] = x_scaled[i][q];
  art.outputs = residual_outputs(x_flat, art.coeffs, art.values, s, n);
  return art;
}

AttentionArtifacts compute_noisy(const std::vector<std::vector<double>>& x_scaled,
                                 const std::vector<std::vector<double>>& positions,
                                 const double* theta_q, const double* theta_k,
                                 const double* theta_v, std::size_t theta_len, int layers,
                                 EntanglerConfig config, AttentionMode mode,
                                 const embed::NoisePlan& plan) {
  const int s = static_cast<int>(x_scaled.size());
  if (s == 0) throw std::invalid_argument("attention over an empty sequence");
  const int n = static_cast<int>(x_scaled[0].size());
  const bool positional = !positions.empty();

  AttentionArtifacts art;
  art.seq_len = s;
  art.n_qubits = n;
  art.values.resize(static_cast<std::size_t>(s) * n);

  std::vector<DensityMatrix> rho(s), sigma(s);
  for (int i = 0; i < s; ++i) {
    const double* t = positional ? positions[i].data() : nullptr;
    DensityMatrix q_full =
        embed::run_embedding_noisy(x_scaled[i], t, theta_q, theta_len, layers, config, plan);
    DensityMatrix k_full =
        embed::run_embedding_noisy(x_scaled[i], t, theta_k, theta_len, layers, config, plan);
    if (mode == AttentionMode::MixedTrace) {
      const auto keep = first_half(n);
      rho[i] = qcore::partial_trace(q_full, keep);
      sigma[i] = qcore::partial_trace(k_full, keep);
    } else {
      rho[i] = std::move(q_full);
      sigma[i] = std::move(k_full);
    }
    const DensityMatrix v_full =
        embed::run_embedding_noisy(x_scaled[i], t, theta_v, theta_len, layers, config, plan);
    for (int q = 0; q < n; ++q)
      art.values[static_cast<std::size_t>(i) * n + q] = qcore::expectation_z(v_full, q);
  }

  art.raw_alpha = raw_attention(rho, sigma);
  art.coeffs = normalize_rows(art.raw_alpha, s);
  std::vector<double> x_flat(static_cast<std::size_t>(s) * n);
  for (int i = 0; i < s; ++i)
    for (int q = 0; q < n; ++q) x_flat[static_cast<std::size_t>(i) * n + q] = x_scaled[i][q];
  art.outputs = residual_outputs(x_flat, art.coeffs, art.values, s, n);
  return art;
}

}  // namespace qmsan::attention
