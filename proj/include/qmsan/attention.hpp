#pragma once

#include <string>
#include <vector>

#include "qmsan/embed.hpp"
#include "qmsan/qcore.hpp"

// Quantum self-attention over one token sequence: mixed-state queries and
// keys via partial trace, trace-overlap coefficients, row normalization,
// Z-measured value vectors and residual outputs. The pure-kernel mode keeps
// the full pure states and scores with squared inner products.
namespace qmsan::attention {

using embed::EntanglerConfig;
using qcore::DensityMatrix;
using qcore::StateVector;

enum class AttentionMode { MixedTrace, PureKernel };

std::string to_string(AttentionMode mode);
AttentionMode mode_from_string(const std::string& name);

struct AttentionArtifacts {
  int seq_len = 0;
  int n_qubits = 0;
  std::vector<double> raw_alpha;  // S x S, row-major
  std::vector<double> coeffs;     // S x S, rows sum to 1
  std::vector<double> values;     // S x n
  std::vector<double> outputs;    // S x n

  std::string to_json(const std::vector<std::string>& tokens) const;
};

// reduced state of the first n/2 qubits of the embedding output; n must be even
DensityMatrix query_state(const std::vector<double>& x, const double* t,
                          const double* theta_q, std::size_t theta_len, int layers,
                          EntanglerConfig config);
DensityMatrix key_state(const std::vector<double>& x, const double* t,
                        const double* theta_k, std::size_t theta_len, int layers,
                        EntanglerConfig config);

// per-qubit <Z> of the value embedding
std::vector<double> value_vector(const std::vector<double>& x, const double* t,
                                 const double* theta_v, std::size_t theta_len, int layers,
                                 EntanglerConfig config);

// alpha[s][j] = tr(rho_s sigma_j)
std::vector<double> raw_attention(const std::vector<DensityMatrix>& queries,
                                  const std::vector<DensityMatrix>& keys);
// alpha[s][j] = |<q_s | k_j>|^2
std::vector<double> raw_attention_pure(const std::vector<StateVector>& queries,
                                       const std::vector<StateVector>& keys);

// row-normalize; a row summing to <= 1e-15 is an error
std::vector<double> normalize_rows(const std::vector<double>& raw_alpha, int seq_len);

// y_s = x_s + sum_j C[s][j] * v_j
std::vector<double> residual_outputs(const std::vector<double>& x_scaled,
                                     const std::vector<double>& coeffs,
                                     const std::vector<double>& values, int seq_len,
                                     int n_qubits);

// Full per-sample pipeline over scaled inputs (row s = token s). Positions
// may be null when the circuit has no positional gates.
AttentionArtifacts compute(const std::vector<std::vector<double>>& x_scaled,
                           const std::vector<std::vector<double>>& positions,
                           const double* theta_q, const double* theta_k,
                           const double* theta_v, std::size_t theta_len, int layers,
                           EntanglerConfig config, AttentionMode mode);

// Density-matrix pipeline with noise channels from the plan. In PureKernel
// mode the coefficient is the trace overlap of the full-system (untraced)
// states, which reduces to the squared inner product at zero noise.
AttentionArtifacts compute_noisy(const std::vector<std::vector<double>>& x_scaled,
                                 const std::vector<std::vector<double>>& positions,
                                 const double* theta_q, const double* theta_k,
                                 const double* theta_v, std::size_t theta_len, int layers,
                                 EntanglerConfig config, AttentionMode mode,
                                 const embed::NoisePlan& plan);

}  // namespace qmsan::attention
