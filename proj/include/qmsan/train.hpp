#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmsan/attention.hpp"
#include "qmsan/embed.hpp"
#include "qmsan/rng.hpp"
#include "qmsan/textdata.hpp"

// Forward pass, MSE loss, reverse-mode gradients through the exact circuit
// simulation, Adam, and the minibatch training loop with the
// gradient-norm convergence rule.
namespace qmsan::train {

using attention::AttentionMode;
using embed::EntanglerConfig;
using embed::NoisePlan;

struct TrainConfig {
  int n_qubits = 2;
  int layers = 1;
  EntanglerConfig config = EntanglerConfig::Ring;
  bool positional = false;
  AttentionMode mode = AttentionMode::MixedTrace;
  double learning_rate = 0.005;
  int batch_size = 64;
  int max_iters = 1000;
  double conv_tol = 1e-4;
  int conv_patience = 10;
  std::uint64_t seed = 42;
  int sequence_length = 4;
  double init_sigma = 0.1;
  bool trainable_embedding = true;  // false keeps the word table fixed at init
  std::optional<NoisePlan> noise;
  bool noise_eval_only = false;  // by default noise applies in training too
  int threads = 0;               // worker cap for per-sample gradients; 0 = auto

  void validate() const;
  bool noisy_training() const { return noise && !noise->empty() && !noise_eval_only; }
  bool noisy_eval() const { return noise && !noise->empty(); }
};

// Flat parameter vector layout:
//   [theta_q | theta_k | theta_v | embedding table rows (incl. UNK) | w | b]
struct ParamLayout {
  int n_qubits = 0;
  int layers = 0;
  EntanglerConfig config = EntanglerConfig::Ring;
  bool positional = false;
  std::size_t per_embedding = 0;
  std::size_t vocab_rows = 0;  // vocab size + 1 (UNK)

  static ParamLayout make(const TrainConfig& config, std::size_t vocab_size);

  std::size_t theta_q_offset() const { return 0; }
  std::size_t theta_k_offset() const { return per_embedding; }
  std::size_t theta_v_offset() const { return 2 * per_embedding; }
  std::size_t table_offset() const { return 3 * per_embedding; }
  std::size_t w_offset() const { return table_offset() + vocab_rows * n_qubits; }
  std::size_t b_offset() const { return w_offset() + n_qubits; }
  std::size_t total() const { return b_offset() + 1; }

  // the parameter count reported alongside the paper's tables:
  // circuit angles plus classifier, excluding the word table
  std::size_t circuit_classifier_count() const {
    return 3 * per_embedding + static_cast<std::size_t>(n_qubits) + 1;
  }

  bool operator==(const ParamLayout&) const = default;
};

struct TrainState {
  ParamLayout layout;
  std::vector<double> params;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  long step = 0;

  // input-scaling extrema; recomputed from the live table during training and
  // frozen into the checkpoint for inference
  double scale_lo = 0.0;
  double scale_hi = 1.0;
  bool scale_frozen = false;

  std::span<const double> theta_q() const {
    return {params.data() + layout.theta_q_offset(), layout.per_embedding};
  }
  std::span<const double> theta_k() const {
    return {params.data() + layout.theta_k_offset(), layout.per_embedding};
  }
  std::span<const double> theta_v() const {
    return {params.data() + layout.theta_v_offset(), layout.per_embedding};
  }
  std::span<const double> table() const {
    return {params.data() + layout.table_offset(),
            layout.vocab_rows * static_cast<std::size_t>(layout.n_qubits)};
  }
  std::span<const double> w() const {
    return {params.data() + layout.w_offset(), static_cast<std::size_t>(layout.n_qubits)};
  }
  double bias() const { return params[layout.b_offset()]; }
};

TrainState init_state(const ParamLayout& layout, double init_sigma, std::uint64_t seed);

// scaling extrema over the table rows of real vocabulary entries (UNK excluded)
struct Scaling {
  double lo = 0.0, hi = 1.0;
  std::size_t argmin = 0, argmax = 0;  // flat offsets into the table block
};
Scaling compute_scaling(const TrainState& state);

struct ForwardResult {
  double y_hat = 0.5;
  std::vector<double> y_mean;  // averaged attention output fed to the classifier
  attention::AttentionArtifacts artifacts;
};

// Tokens are mapped through the vocab (UNK fallback), truncated to
// sequence_length, scaled and run through the attention stack.
ForwardResult forward(const std::vector<std::string>& tokens,
                      const std::map<std::string, int>& vocab, const TrainState& state,
                      const TrainConfig& config, bool eval_phase);

double mse_loss(const std::vector<double>& predictions, const std::vector<double>& labels);

// Batch gradient of the MSE loss over the given samples with respect to every
// trainable scalar. Matches central finite differences on the same loss.
struct BatchGradient {
  std::vector<double> grad;
  double loss = 0.0;
  std::vector<double> predictions;
};
BatchGradient gradients(const TrainState& state, const textdata::Corpus& corpus,
                        const std::vector<std::size_t>& batch, const TrainConfig& config);

void adam_step(TrainState& state, const std::vector<double>& grad, double lr);

struct IterRecord {
  int iter = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double grad_norm = 0.0;
};

struct TrainResult {
  TrainState state;
  std::vector<IterRecord> history;
  bool converged = false;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

TrainResult train(const textdata::Corpus& corpus, const std::vector<std::size_t>& train_idx,
                  const TrainConfig& config);

// fraction of samples with (y_hat >= 0.5) == label; a tie at exactly 0.5
// classifies as 1
double evaluate(const textdata::Corpus& corpus, const std::vector<std::size_t>& indices,
                const TrainState& state, const TrainConfig& config);

// --- checkpoint (JSON) ---

struct Checkpoint {
  TrainState state;
  std::map<std::string, int> vocab;
  std::string config_json;  // resolved run configuration echo
  std::string config_hash;
  std::uint64_t seed = 0;
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace qmsan::train
