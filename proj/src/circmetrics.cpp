#include "qmsan/circmetrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "json.hpp"
#include "qmsan/rng.hpp"
#include "qmsan/util.hpp"

namespace qmsan::circmetrics {

namespace {

using qcore::c64;

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

// generalized distance D(u, v) = |u|^2 |v|^2 - |<u, v>|^2, the closed form of
// (1/2) sum_{ij} |u_i v_j - u_j v_i|^2
double pair_distance(const std::vector<c64>& u, const std::vector<c64>& v) {
  const auto& ops = kern::active();
  const double nu = ops.inner_conj(u.data(), u.data(), u.size()).real();
  const double nv = ops.inner_conj(v.data(), v.data(), v.size()).real();
  const c64 uv = ops.inner_conj(u.data(), v.data(), u.size());
  return nu * nv - std::norm(uv);
}

StateVector sample_circuit_state(EntanglerConfig config, int n_qubits, int layers, Rng& rng,
                                 bool randomize_data) {
  const std::size_t n_params = embed::params_per_embedding(config, n_qubits, layers);
  std::vector<double> theta(n_params);
  for (auto& t : theta) t = rng.uniform(0.0, kTwoPi);
  std::vector<double> x(n_qubits, kPi / 2.0);
  if (randomize_data)
    for (auto& xi : x) xi = rng.uniform(0.0, kPi);
  return embed::run_embedding(x, nullptr, theta.data(), theta.size(), layers, config);
}

StateVector sample_haar_state(int n_qubits, Rng& rng) {
  StateVector sv;
  sv.n_qubits = n_qubits;
  sv.amps.resize(std::size_t{1} << n_qubits);
  double norm2 = 0.0;
  for (auto& a : sv.amps) {
    a = c64{rng.normal(), rng.normal()};
    norm2 += std::norm(a);
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& a : sv.amps) a *= inv;
  return sv;
}

const char* config_csv_name(EntanglerConfig config) {
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

std::uint64_t stream_seed(std::uint64_t base, int config_index, int run, int salt) {
  return base ^ (0x9e3779b97f4a7c15ull *
                 (static_cast<std::uint64_t>(config_index) * 1000003ull +
                  static_cast<std::uint64_t>(run) * 101ull + static_cast<std::uint64_t>(salt) + 1ull));
}

}  // namespace

double meyer_wallach_q(const StateVector& state) {
  const int n = state.n_qubits;
  if (n < 2) throw std::invalid_argument("Meyer-Wallach needs at least 2 qubits");
  const std::size_t dim = state.dim();
  const std::size_t half = dim / 2;
  std::vector<c64> u(half), v(half);
  double acc = 0.0;
  for (int j = 0; j < n; ++j) {
    const int shift = n - 1 - j;  // bit position of qubit j
    const std::size_t low_mask = (std::size_t{1} << shift) - 1;
    for (std::size_t r = 0; r < half; ++r) {
      // reinsert a 0/1 bit at the deleted position
      const std::size_t base = ((r & ~low_mask) << 1) | (r & low_mask);
      u[r] = state.amps[base];
      v[r] = state.amps[base | (std::size_t{1} << shift)];
    }
    acc += pair_distance(u, v);
  }
  double q = (4.0 / n) * acc;
  if (q < 0.0 && q > -1e-10) q = 0.0;
  if (q > 1.0 && q < 1.0 + 1e-10) q = 1.0;
  return q;
}

double entangling_capability(EntanglerConfig config, int n_qubits, int layers, int n_samples,
                             std::uint64_t seed, bool randomize_data) {
  if (n_samples < 1) throw std::invalid_argument("need at least one sample");
  Rng rng(seed);
  double acc = 0.0;
  for (int i = 0; i < n_samples; ++i)
    acc += meyer_wallach_q(sample_circuit_state(config, n_qubits, layers, rng, randomize_data));
  return acc / n_samples;
}

double mmd(const std::vector<std::vector<double>>& x_samples,
           const std::vector<std::vector<double>>& y_samples, double sigma) {
  if (x_samples.empty() || y_samples.empty()) throw std::invalid_argument("mmd: empty samples");
  if (x_samples.size() != y_samples.size())
    throw std::invalid_argument("mmd: sample counts must match");
  if (!(sigma > 0.0)) throw std::invalid_argument("mmd: sigma must be positive");
  const std::size_t n = x_samples.size();
  const std::size_t dim = x_samples[0].size();
  const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
  const auto& ops = kern::active();

  auto kernel_sum = [&](const std::vector<std::vector<double>>& a,
                        const std::vector<std::vector<double>>& b) {
    double acc = 0.0;
    for (const auto& ai : a)
      for (const auto& bj : b)
        acc += std::exp(-ops.squared_dist(ai.data(), bj.data(), dim) * inv_two_sigma2);
    return acc;
  };

  const double xx = kernel_sum(x_samples, x_samples);
  const double yy = kernel_sum(y_samples, y_samples);
  const double xy = kernel_sum(x_samples, y_samples);
  return std::abs(xx + yy - 2.0 * xy) / (static_cast<double>(n) * static_cast<double>(n));
}

std::vector<double> canonical_real_vector(const StateVector& state) {
  const std::size_t dim = state.dim();
  std::size_t imax = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double m = std::norm(state.amps[i]);
    if (m > best) {
      best = m;
      imax = i;
    }
  }
  c64 phase{1.0, 0.0};
  const double mag = std::abs(state.amps[imax]);
  if (mag > 0.0) phase = std::conj(state.amps[imax]) / mag;
  std::vector<double> out(2 * dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const c64 a = state.amps[i] * phase;
    out[i] = a.real();
    out[dim + i] = a.imag();
  }
  return out;
}

double expressivity(EntanglerConfig config, int n_qubits, int layers, int n_samples,
                    std::uint64_t seed, double sigma, bool randomize_data) {
  if (n_samples < 2) throw std::invalid_argument("need at least two samples");
  Rng rng(seed);
  std::vector<std::vector<double>> circuit(n_samples), haar(n_samples);
  for (int i = 0; i < n_samples; ++i)
    circuit[i] =
        canonical_real_vector(sample_circuit_state(config, n_qubits, layers, rng, randomize_data));
  for (int i = 0; i < n_samples; ++i)
    haar[i] = canonical_real_vector(sample_haar_state(n_qubits, rng));
  return 1.0 - mmd(circuit, haar, sigma);
}

std::vector<MetricRun> run_metrics(const MetricsOptions& options) {
  if (options.n_qubits < 2)
    throw std::invalid_argument("circuit metrics need at least 2 qubits");
  std::vector<MetricRun> rows;
  for (std::size_t ci = 0; ci < options.configs.size(); ++ci) {
    const EntanglerConfig config = options.configs[ci];
    for (int run = 0; run < options.runs; ++run) {
      MetricRun row;
      row.config = config;
      row.n_qubits = options.n_qubits;
      row.layers = options.layers;
      row.run = run;
      row.ent = entangling_capability(config, options.n_qubits, options.layers, options.samples,
                                      stream_seed(options.seed, static_cast<int>(ci), run, 0),
                                      options.randomize_data);
      row.expr = expressivity(config, options.n_qubits, options.layers, options.samples,
                              stream_seed(options.seed, static_cast<int>(ci), run, 1),
                              options.sigma, options.randomize_data);
      rows.push_back(row);
    }
  }
  return rows;
}

std::string metrics_csv(const std::vector<MetricRun>& rows) {
  std::string out = "config,n,L,run,ent,expr\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%d,%d,%.12f,%.12f\n", config_csv_name(r.config),
                  r.n_qubits, r.layers, r.run, r.ent, r.expr);
    out += buf;
  }
  return out;
}

std::string metrics_summary_json(const std::vector<MetricRun>& rows) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto cfg : {EntanglerConfig::Ring, EntanglerConfig::CircuitBlock,
                         EntanglerConfig::AllToAll}) {
    std::vector<double> ent, expr;
    for (const auto& r : rows)
      if (r.config == cfg) {
        ent.push_back(r.ent);
        expr.push_back(r.expr);
      }
    if (ent.empty()) continue;
    const auto qe = util::quartiles(ent);
    const auto qx = util::quartiles(expr);
    j[config_csv_name(cfg)] = {
        {"runs", ent.size()},
        {"ent", {{"median", qe.median}, {"q1", qe.q1}, {"q3", qe.q3}}},
        {"expr", {{"median", qx.median}, {"q1", qx.q1}, {"q3", qx.q3}}},
    };
  }
  return j.dump(2);
}

}  // namespace qmsan::circmetrics
