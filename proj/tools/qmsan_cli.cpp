// qmsan: train/evaluate the mixed-state self-attention text classifier, run
// noise sweeps and circuit metrics, export attention matrices.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "qmsan/circmetrics.hpp"
#include "qmsan/noiselab.hpp"
#include "qmsan/train.hpp"
#include "qmsan/util.hpp"

namespace {

using nlohmann::json;
using namespace qmsan;

constexpr int kExitValidation = 1;
constexpr int kExitDiverged = 2;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key))
      throw std::invalid_argument("unknown config key: " + where + key);
  }
}

struct RunConfig {
  train::TrainConfig tcfg;
  std::string dataset;
  std::string out_dir = "out";
  int runs = 1;
  std::string split_scheme = "holdout";
  double train_fraction = 0.8;
  int folds = 5;
  int repeats = 1;
  circmetrics::MetricsOptions metrics;
  json resolved;
  std::string hash;
};

RunConfig parse_run_config(const std::string& path, std::optional<std::uint64_t> seed_override,
                           std::optional<int> threads_override) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config: " + path);
  json j = json::parse(in);

  check_keys(j, {"dataset", "qubits", "layers", "entangler", "positional", "attention_mode",
                 "learning_rate", "batch_size", "max_iters", "conv_tol", "conv_patience", "seed",
                 "sequence_length", "init_sigma", "embedding", "split", "runs", "noise",
                 "threads", "out_dir", "metrics"},
             "");

  RunConfig rc;
  auto& cfg = rc.tcfg;
  if (j.contains("dataset")) rc.dataset = j["dataset"].get<std::string>();
  cfg.n_qubits = j.value("qubits", 2);
  cfg.layers = j.value("layers", 1);
  cfg.config = embed::entangler_from_string(j.value("entangler", std::string("ring")));
  cfg.positional = j.value("positional", false);
  cfg.mode = attention::mode_from_string(j.value("attention_mode", std::string("mixed")));
  cfg.learning_rate = j.value("learning_rate", 0.005);
  cfg.batch_size = j.value("batch_size", 64);
  cfg.max_iters = j.value("max_iters", 1000);
  cfg.conv_tol = j.value("conv_tol", 1e-4);
  cfg.conv_patience = j.value("conv_patience", 10);
  cfg.seed = j.value("seed", std::uint64_t{42});
  cfg.sequence_length = j.value("sequence_length", 4);
  cfg.init_sigma = j.value("init_sigma", 0.1);
  const std::string emb = j.value("embedding", std::string("trainable"));
  if (emb != "trainable" && emb != "fixed_random")
    throw std::invalid_argument("embedding must be 'trainable' or 'fixed_random'");
  cfg.trainable_embedding = emb == "trainable";
  cfg.threads = j.value("threads", 0);

  if (j.contains("split")) {
    const auto& js = j["split"];
    check_keys(js, {"scheme", "train_fraction", "folds", "repeats"}, "split.");
    rc.split_scheme = js.value("scheme", std::string("holdout"));
    if (rc.split_scheme != "holdout" && rc.split_scheme != "kfold")
      throw std::invalid_argument("split.scheme must be 'holdout' or 'kfold'");
    rc.train_fraction = js.value("train_fraction", 0.8);
    rc.folds = js.value("folds", 5);
    rc.repeats = js.value("repeats", 1);
  }
  rc.runs = j.value("runs", 1);
  if (rc.runs < 1) throw std::invalid_argument("runs must be >= 1");

  if (j.contains("noise")) {
    const auto& jn = j["noise"];
    check_keys(jn, {"plan", "apply"}, "noise.");
    cfg.noise = embed::NoisePlan::parse(jn.value("plan", std::string("none")));
    const std::string apply = jn.value("apply", std::string("train_and_eval"));
    if (apply == "eval_only")
      cfg.noise_eval_only = true;
    else if (apply != "train_and_eval")
      throw std::invalid_argument("noise.apply must be 'train_and_eval' or 'eval_only'");
  }

  if (j.contains("out_dir")) rc.out_dir = j["out_dir"].get<std::string>();

  if (j.contains("metrics")) {
    const auto& jm = j["metrics"];
    check_keys(jm, {"qubits", "layers", "runs", "samples", "sigma", "randomize_data", "configs"},
               "metrics.");
    rc.metrics.n_qubits = jm.value("qubits", 4);
    rc.metrics.layers = jm.value("layers", 1);
    rc.metrics.runs = jm.value("runs", 20);
    rc.metrics.samples = jm.value("samples", 1000);
    rc.metrics.sigma = jm.value("sigma", 0.01);
    rc.metrics.randomize_data = jm.value("randomize_data", true);
    if (jm.contains("configs")) {
      rc.metrics.configs.clear();
      for (const auto& name : jm["configs"])
        rc.metrics.configs.push_back(embed::entangler_from_string(name.get<std::string>()));
    }
  }

  if (seed_override) cfg.seed = *seed_override;
  if (threads_override) {
    cfg.threads = *threads_override;
  } else if (!j.contains("threads")) {
    if (const char* env = std::getenv("QMSAN_THREADS")) cfg.threads = std::atoi(env);
  }
  rc.metrics.seed = cfg.seed;
  cfg.validate();

  // resolved echo: every artifact embeds its hash for provenance
  json r;
  r["dataset"] = rc.dataset;
  r["qubits"] = cfg.n_qubits;
  r["layers"] = cfg.layers;
  r["entangler"] = embed::to_string(cfg.config);
  r["positional"] = cfg.positional;
  r["attention_mode"] = attention::to_string(cfg.mode);
  r["learning_rate"] = cfg.learning_rate;
  r["batch_size"] = cfg.batch_size;
  r["max_iters"] = cfg.max_iters;
  r["conv_tol"] = cfg.conv_tol;
  r["conv_patience"] = cfg.conv_patience;
  r["seed"] = cfg.seed;
  r["sequence_length"] = cfg.sequence_length;
  r["init_sigma"] = cfg.init_sigma;
  r["embedding"] = cfg.trainable_embedding ? "trainable" : "fixed_random";
  r["split"] = {{"scheme", rc.split_scheme},
                {"train_fraction", rc.train_fraction},
                {"folds", rc.folds},
                {"repeats", rc.repeats}};
  r["runs"] = rc.runs;
  if (cfg.noise)
    r["noise"] = {{"plan", cfg.noise->to_string()},
                  {"apply", cfg.noise_eval_only ? "eval_only" : "train_and_eval"}};
  r["threads"] = cfg.threads;
  rc.resolved = std::move(r);
  rc.hash = util::hex64(util::fnv1a(rc.resolved.dump()));
  return rc;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

train::TrainConfig config_from_checkpoint(const train::Checkpoint& ckpt) {
  const json j = json::parse(ckpt.config_json);
  train::TrainConfig cfg;
  cfg.n_qubits = j.at("qubits").get<int>();
  cfg.layers = j.at("layers").get<int>();
  cfg.config = embed::entangler_from_string(j.at("entangler").get<std::string>());
  cfg.positional = j.at("positional").get<bool>();
  cfg.mode = attention::mode_from_string(j.at("attention_mode").get<std::string>());
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.max_iters = j.at("max_iters").get<int>();
  cfg.conv_tol = j.at("conv_tol").get<double>();
  cfg.conv_patience = j.at("conv_patience").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.sequence_length = j.at("sequence_length").get<int>();
  cfg.init_sigma = j.at("init_sigma").get<double>();
  cfg.trainable_embedding = j.at("embedding").get<std::string>() == "trainable";
  if (j.contains("noise")) {
    cfg.noise = embed::NoisePlan::parse(j["noise"].at("plan").get<std::string>());
    cfg.noise_eval_only = j["noise"].at("apply").get<std::string>() == "eval_only";
  }
  cfg.threads = j.value("threads", 0);
  return cfg;
}

struct RunOutcome {
  std::uint64_t seed;
  double train_acc;
  double test_acc;
  int iters;
  bool converged;
};

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              std::optional<std::string> out_override, std::optional<int> threads) {
  const RunConfig rc = parse_run_config(config_path, seed, threads);
  if (rc.dataset.empty()) throw std::invalid_argument("config needs a 'dataset' path");
  const auto corpus = textdata::load_tsv(rc.dataset);

  const std::filesystem::path out_dir = out_override.value_or(rc.out_dir);
  std::filesystem::create_directories(out_dir);

  const auto layout = train::ParamLayout::make(rc.tcfg, corpus.vocab_size());
  std::cout << "dataset: " << rc.dataset << " (" << corpus.samples.size() << " samples, vocab "
            << corpus.vocab_size() << ")\n";
  std::cout << "trainable parameters (circuit + classifier): "
            << layout.circuit_classifier_count() << "\n";
  if (rc.tcfg.config == embed::EntanglerConfig::AllToAll)
    std::cout << "note: all-to-all counts follow the implemented per-layer inventory of "
              << "C(n,2) entanglers plus n rotations\n";
  std::cout << "total trainable scalars (incl. word table): " << layout.total() << "\n";

  // resolve the run schedule
  struct RunPlanItem {
    std::uint64_t split_seed;
    std::uint64_t init_seed;
    int fold = -1;
  };
  std::vector<RunPlanItem> plan;
  if (rc.split_scheme == "holdout") {
    for (int i = 0; i < rc.runs; ++i)
      plan.push_back({rc.tcfg.seed + static_cast<std::uint64_t>(i),
                      rc.tcfg.seed + static_cast<std::uint64_t>(i), -1});
  } else {
    for (int rep = 0; rep < rc.repeats; ++rep)
      for (int fold = 0; fold < rc.folds; ++fold)
        plan.push_back({rc.tcfg.seed + static_cast<std::uint64_t>(rep),
                        rc.tcfg.seed + static_cast<std::uint64_t>(rep * rc.folds + fold), fold});
  }

  std::vector<RunOutcome> outcomes;
  bool first_run = true;
  for (const auto& item : plan) {
    textdata::Split split;
    if (rc.split_scheme == "holdout") {
      split = textdata::split_holdout(corpus, rc.train_fraction, item.split_seed);
    } else {
      split = textdata::split_kfold(corpus, rc.folds, item.split_seed)[item.fold];
    }
    train::TrainConfig run_cfg = rc.tcfg;
    run_cfg.seed = item.init_seed;
    const auto result = train::train(corpus, split.train, run_cfg);
    const double train_acc = train::evaluate(corpus, split.train, result.state, run_cfg);
    const double test_acc = train::evaluate(corpus, split.test, result.state, run_cfg);
    outcomes.push_back({item.init_seed, train_acc, test_acc,
                        static_cast<int>(result.history.size()), result.converged});
    std::cout << "run seed=" << item.init_seed << " iters=" << result.history.size()
              << " train_acc=" << train_acc << " test_acc=" << test_acc << "\n";

    if (first_run) {
      first_run = false;
      train::Checkpoint ckpt;
      ckpt.state = result.state;
      ckpt.vocab = corpus.vocab;
      ckpt.config_json = rc.resolved.dump();
      ckpt.config_hash = rc.hash;
      ckpt.seed = item.init_seed;
      train::save_checkpoint(ckpt, (out_dir / "checkpoint.json").string());

      std::string hist;
      for (const auto& rec : result.history) {
        json hj = {{"iter", rec.iter},
                   {"loss", rec.loss},
                   {"train_acc", rec.train_acc},
                   {"grad_norm", rec.grad_norm},
                   {"config_hash", rc.hash}};
        hist += hj.dump() + "\n";
      }
      write_file(out_dir / "history.jsonl", hist);
    }
  }

  std::vector<double> train_accs, test_accs;
  for (const auto& o : outcomes) {
    train_accs.push_back(o.train_acc);
    test_accs.push_back(o.test_acc);
  }
  json summary;
  summary["config_hash"] = rc.hash;
  summary["config"] = rc.resolved;
  summary["parameter_count"] = layout.circuit_classifier_count();
  summary["total_trainable"] = layout.total();
  summary["runs"] = outcomes.size();
  summary["train_acc_mean"] = util::mean_of(train_accs);
  summary["train_acc_std"] = util::stddev_of(train_accs);
  summary["test_acc_mean"] = util::mean_of(test_accs);
  summary["test_acc_std"] = util::stddev_of(test_accs);
  json per_run = json::array();
  for (const auto& o : outcomes)
    per_run.push_back({{"seed", o.seed},
                       {"train_acc", o.train_acc},
                       {"test_acc", o.test_acc},
                       {"iters", o.iters},
                       {"converged", o.converged}});
  summary["per_run"] = std::move(per_run);
  write_file(out_dir / "summary.json", summary.dump(2) + "\n");

  std::cout << "test accuracy: " << util::mean_of(test_accs);
  if (outcomes.size() > 1) std::cout << " +/- " << util::stddev_of(test_accs);
  std::cout << "\nwrote " << (out_dir / "summary.json").string() << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& dataset_path,
             std::optional<std::string> config_path, std::optional<std::string> out_override,
             std::optional<int> threads) {
  const auto ckpt = train::load_checkpoint(ckpt_path);
  train::TrainConfig cfg = config_from_checkpoint(ckpt);
  if (config_path) {
    const RunConfig rc = parse_run_config(*config_path, std::nullopt, threads);
    const auto want = train::ParamLayout::make(rc.tcfg, ckpt.vocab.size());
    if (!(want == ckpt.state.layout))
      throw std::invalid_argument("checkpoint layout does not match the supplied config");
    cfg = rc.tcfg;
  }
  if (threads) cfg.threads = *threads;

  const auto corpus = textdata::load_tsv(dataset_path);
  // evaluation uses the checkpoint's vocabulary; unseen tokens fall back to UNK
  std::string csv = "index,label,y_hat,predicted\n";
  std::size_t correct = 0;
  char buf[96];
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    const auto& sample = corpus.samples[i];
    const auto fwd = train::forward(sample.tokens, ckpt.vocab, ckpt.state, cfg, true);
    const int predicted = fwd.y_hat >= 0.5 ? 1 : 0;
    if (predicted == sample.label) ++correct;
    std::snprintf(buf, sizeof(buf), "%zu,%d,%.12f,%d\n", i, sample.label, fwd.y_hat, predicted);
    csv += buf;
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(corpus.samples.size());
  std::cout << "accuracy: " << acc << " (" << correct << "/" << corpus.samples.size() << ")\n";

  const std::filesystem::path out_dir = out_override.value_or(std::string("out"));
  std::filesystem::create_directories(out_dir);
  write_file(out_dir / "predictions.csv", csv);
  return 0;
}

int cmd_noise(const std::string& ckpt_path, const std::string& plans_path,
              const std::string& mode, int runs, std::optional<std::string> dataset_override,
              std::optional<std::string> out_override, std::optional<int> threads) {
  if (mode != "retrain" && mode != "eval-only")
    throw std::invalid_argument("--mode must be 'retrain' or 'eval-only'");
  const auto ckpt = train::load_checkpoint(ckpt_path);
  train::TrainConfig cfg = config_from_checkpoint(ckpt);
  cfg.noise.reset();
  cfg.noise_eval_only = false;
  if (threads) cfg.threads = *threads;

  std::string dataset = dataset_override.value_or(std::string());
  if (dataset.empty()) {
    const json cj = json::parse(ckpt.config_json);
    dataset = cj.value("dataset", std::string());
  }
  if (dataset.empty()) throw std::invalid_argument("no dataset given and none in the checkpoint");
  const auto corpus = textdata::load_tsv(dataset);

  std::ifstream in(plans_path);
  if (!in) throw std::invalid_argument("cannot open plans file: " + plans_path);
  std::vector<embed::NoisePlan> plans;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    plans.push_back(embed::NoisePlan::parse(line));
  }

  noiselab::SweepOptions options;
  options.n_runs = runs;
  options.eval_only = mode == "eval-only";
  std::optional<train::TrainState> trained;
  if (options.eval_only) trained = ckpt.state;

  const auto rows = noiselab::noise_sweep(corpus, trained, cfg, plans, options);
  const std::filesystem::path out_dir = out_override.value_or(std::string("out"));
  std::filesystem::create_directories(out_dir);
  write_file(out_dir / "noise.csv", noiselab::sweep_csv(rows));
  std::cout << noiselab::sweep_csv(rows);
  return 0;
}

int cmd_metrics(const std::string& config_path, std::optional<std::uint64_t> seed,
                std::optional<std::string> out_override, std::optional<int> threads) {
  const RunConfig rc = parse_run_config(config_path, seed, threads);
  const auto rows = circmetrics::run_metrics(rc.metrics);
  const std::filesystem::path out_dir = out_override.value_or(rc.out_dir);
  std::filesystem::create_directories(out_dir);
  write_file(out_dir / "metrics.csv", circmetrics::metrics_csv(rows));

  json summary = json::parse(circmetrics::metrics_summary_json(rows));
  summary["config_hash"] = rc.hash;
  write_file(out_dir / "metrics_summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_attn_export(const std::string& ckpt_path, const std::string& sentence,
                    std::optional<std::string> out_path) {
  const auto ckpt = train::load_checkpoint(ckpt_path);
  const train::TrainConfig cfg = config_from_checkpoint(ckpt);
  const auto tokens = textdata::tokenize(sentence);  // throws on an empty sentence
  const auto kept = textdata::truncate(tokens, cfg.sequence_length);
  const auto fwd = train::forward(kept, ckpt.vocab, ckpt.state, cfg, true);

  json j = json::parse(fwd.artifacts.to_json(kept));
  j["config_hash"] = ckpt.config_hash;
  j["y_hat"] = fwd.y_hat;
  const std::string text = j.dump(2) + "\n";
  if (out_path) {
    write_file(*out_path, text);
    std::cout << "wrote " << *out_path << "\n";
  } else {
    std::cout << text;
  }
  return 0;
}

int cmd_inspect_circuit(int qubits, int layers, const std::string& entangler, bool positional) {
  const auto spec =
      embed::build_circuit(qubits, layers, embed::entangler_from_string(entangler), positional);
  std::cout << spec.to_json() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantum mixed-state self-attention text classifier"};
  app.require_subcommand(1);

  std::string config_path, ckpt_path, dataset_path, plans_path, sentence, entangler = "ring";
  std::string noise_mode = "retrain";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir, eval_config, dataset_override, attn_out;
  std::optional<int> threads;
  int noise_runs = 3, qubits = 2, layers = 1;
  bool positional = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "override the config seed");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--threads", threads, "worker threads (0 = auto)");
  };

  auto* t = app.add_subcommand("train", "train a model and write checkpoint/history/summary");
  t->add_option("--config", config_path, "run configuration (JSON)")->required();
  add_common(t);

  auto* e = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  e->add_option("--checkpoint", ckpt_path, "checkpoint JSON")->required();
  e->add_option("--dataset", dataset_path, "TSV dataset")->required();
  e->add_option("--config", eval_config, "optional config override (layout must match)");
  e->add_option("--out", out_dir, "output directory");
  e->add_option("--threads", threads, "worker threads");

  auto* nz = app.add_subcommand("noise", "accuracy sweep over noise plans");
  nz->add_option("--checkpoint", ckpt_path, "checkpoint JSON")->required();
  nz->add_option("--plans", plans_path, "plan strings, one per line")->required();
  nz->add_option("--mode", noise_mode, "retrain | eval-only");
  nz->add_option("--runs", noise_runs, "seeded repetitions per plan");
  nz->add_option("--dataset", dataset_override, "dataset override");
  nz->add_option("--out", out_dir, "output directory");
  nz->add_option("--threads", threads, "worker threads");

  auto* m = app.add_subcommand("metrics", "expressivity / entangling-capability sweep");
  m->add_option("--config", config_path, "run configuration (JSON)")->required();
  add_common(m);

  auto* ax = app.add_subcommand("attn-export", "export attention matrices for a sentence");
  ax->add_option("--checkpoint", ckpt_path, "checkpoint JSON")->required();
  ax->add_option("--sentence", sentence, "input sentence")->required();
  ax->add_option("--out", attn_out, "output JSON path (default: stdout)");

  auto* ic = app.add_subcommand("inspect-circuit", "print the embedding circuit as JSON");
  ic->add_option("--qubits", qubits, "qubit count")->required();
  ic->add_option("--layers", layers, "layer count");
  ic->add_option("--entangler", entangler, "ring | circuit_block | all_to_all");
  ic->add_flag("--positional", positional, "include positional rotations");

  CLI11_PARSE(app, argc, argv);

  try {
    if (t->parsed()) return cmd_train(config_path, seed, out_dir, threads);
    if (e->parsed()) return cmd_eval(ckpt_path, dataset_path, eval_config, out_dir, threads);
    if (nz->parsed())
      return cmd_noise(ckpt_path, plans_path, noise_mode, noise_runs, dataset_override, out_dir,
                       threads);
    if (m->parsed()) return cmd_metrics(config_path, seed, out_dir, threads);
    if (ax->parsed()) return cmd_attn_export(ckpt_path, sentence, attn_out);
    if (ic->parsed()) return cmd_inspect_circuit(qubits, layers, entangler, positional);
  } catch (const train::TrainingDiverged& ex) {
    std::cerr << "error: training diverged: " << ex.what() << "\n";
    return kExitDiverged;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
