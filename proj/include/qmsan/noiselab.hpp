#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qmsan/train.hpp"

// Noise-robustness experiments: run the classifier under Kraus-channel plans
// and report per-plan test accuracy across seeded repetitions.
namespace qmsan::noiselab {

using embed::NoisePlan;

// forward pass of one sample under a plan; the classifier head is unchanged
double noisy_forward(const std::vector<std::string>& tokens,
                     const std::map<std::string, int>& vocab, const train::TrainState& state,
                     train::TrainConfig config, const NoisePlan& plan);

struct SweepRow {
  std::string plan;
  double acc_mean = 0.0;
  double acc_std = 0.0;
  int n_runs = 0;
};

struct SweepOptions {
  int n_runs = 3;             // seeded repetitions per plan (resplit + retrain)
  bool eval_only = false;     // evaluate a fixed trained state instead of retraining
  double train_fraction = 0.8;
};

// For each plan: trains (or reuses `trained`, in eval-only mode) and measures
// test accuracy over n_runs stratified splits seeded from config.seed.
std::vector<SweepRow> noise_sweep(const textdata::Corpus& corpus,
                                  const std::optional<train::TrainState>& trained,
                                  const train::TrainConfig& config,
                                  const std::vector<NoisePlan>& plans,
                                  const SweepOptions& options);

// header `plan,acc_mean,acc_std,n_runs`
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace qmsan::noiselab
