#include "qmsan/noiselab.hpp"

#include <cstdio>

#include "qmsan/util.hpp"

namespace qmsan::noiselab {

double noisy_forward(const std::vector<std::string>& tokens,
                     const std::map<std::string, int>& vocab, const train::TrainState& state,
                     train::TrainConfig config, const NoisePlan& plan) {
  config.noise = plan;
  config.noise_eval_only = true;  // the plan applies to this evaluation only
  return train::forward(tokens, vocab, state, config, /*eval_phase=*/true).y_hat;
}

std::vector<SweepRow> noise_sweep(const textdata::Corpus& corpus,
                                  const std::optional<train::TrainState>& trained,
                                  const train::TrainConfig& config,
                                  const std::vector<NoisePlan>& plans,
                                  const SweepOptions& options) {
  if (options.eval_only && !trained)
    throw std::invalid_argument("eval-only sweep needs a trained state");

  std::vector<SweepRow> rows;
  for (const auto& plan : plans) {
    std::vector<double> accs(options.n_runs);
    for (int run = 0; run < options.n_runs; ++run) {
      const std::uint64_t run_seed = config.seed + static_cast<std::uint64_t>(run);
      const auto split = textdata::split_holdout(corpus, options.train_fraction, run_seed);

      train::TrainConfig run_cfg = config;
      run_cfg.seed = run_seed;
      if (plan.empty())
        run_cfg.noise.reset();
      else
        run_cfg.noise = plan;

      if (options.eval_only) {
        train::TrainConfig eval_cfg = run_cfg;
        eval_cfg.noise_eval_only = true;
        accs[run] = train::evaluate(corpus, split.test, *trained, eval_cfg);
      } else {
        const auto result = train::train(corpus, split.train, run_cfg);
        accs[run] = train::evaluate(corpus, split.test, result.state, run_cfg);
      }
    }
    rows.push_back({plan.to_string(), util::mean_of(accs), util::stddev_of(accs),
                    options.n_runs});
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "plan,acc_mean,acc_std,n_runs\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%d\n", r.plan.c_str(), r.acc_mean, r.acc_std,
                  r.n_runs);
    out += buf;
  }
  return out;
}

}  // namespace qmsan::noiselab
