#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qmsan/embed.hpp"

// Circuit quality metrics: Meyer-Wallach entangling capability and MMD-based
// expressivity of the embedding configurations.
namespace qmsan::circmetrics {

using embed::EntanglerConfig;
using qcore::StateVector;

// Meyer-Wallach measure Q in [0, 1]; 0 for product states, 1 for a Bell pair.
double meyer_wallach_q(const StateVector& state);

// mean Q over circuits with trainable angles drawn uniformly from [0, 2*pi)
// and data inputs from [0, pi] (optionally fixed at pi/2)
double entangling_capability(EntanglerConfig config, int n_qubits, int layers, int n_samples,
                             std::uint64_t seed, bool randomize_data = true);

// MMD estimate between equally sized sample sets of real vectors
// (V-statistic, Gaussian kernel with bandwidth sigma).
double mmd(const std::vector<std::vector<double>>& x_samples,
           const std::vector<std::vector<double>>& y_samples, double sigma);

// Expr = 1 - MMD(circuit outputs, Haar-random states), both represented as
// phase-canonicalized [Re; Im] vectors.
double expressivity(EntanglerConfig config, int n_qubits, int layers, int n_samples,
                    std::uint64_t seed, double sigma = 0.01, bool randomize_data = true);

// a state as a real vector: global phase rotated so the largest-magnitude
// amplitude is real nonnegative, then [Re(amps); Im(amps)]
std::vector<double> canonical_real_vector(const StateVector& state);

struct MetricRun {
  EntanglerConfig config;
  int n_qubits = 0;
  int layers = 0;
  int run = 0;
  double ent = 0.0;
  double expr = 0.0;
};

struct MetricsOptions {
  int n_qubits = 4;
  int layers = 1;
  int runs = 20;
  int samples = 1000;
  double sigma = 0.01;
  bool randomize_data = true;
  std::uint64_t seed = 42;
  std::vector<EntanglerConfig> configs = {EntanglerConfig::Ring, EntanglerConfig::CircuitBlock,
                                          EntanglerConfig::AllToAll};
};

// one row per (config, run); each run draws `samples` states and yields the
// run's mean Q and its expressivity estimate
std::vector<MetricRun> run_metrics(const MetricsOptions& options);

std::string metrics_csv(const std::vector<MetricRun>& rows);     // config,n,L,run,ent,expr
std::string metrics_summary_json(const std::vector<MetricRun>& rows);

}  // namespace qmsan::circmetrics
