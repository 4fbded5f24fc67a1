#include <cstdint>
#include <cstdio>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "latefuse/core.hpp"
#include "latefuse/fusion.hpp"
#include "latefuse/gatenet.hpp"
#include "latefuse/io.hpp"
#include "latefuse/rng.hpp"
#include "latefuse/synth.hpp"

namespace {

using latefuse::ArtifactMeta;
using latefuse::Vec;
using ordered_json = nlohmann::ordered_json;

// exit 2: bad flags, missing required values, config mistakes
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string join_command(int argc, char** argv) {
  std::string cmd;
  for (int i = 0; i < argc; ++i) {
    if (i) cmd += ' ';
    cmd += argv[i];
  }
  return cmd;
}

// flag > config file > built-in default; the effective value is echoed
template <typename T>
void resolve(const CLI::Option* opt, T& value, const ordered_json& file_config,
             const std::string& key, ordered_json& effective) {
  if ((opt == nullptr || opt->count() == 0) && file_config.contains(key)) {
    try {
      value = file_config.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw latefuse::ConfigError("config key \"" + key + "\" has the wrong type", key);
    }
  }
  effective[key] = value;
}

ArtifactMeta make_meta(const std::string& command, const ordered_json& effective,
                       std::uint64_t seed) {
  ArtifactMeta meta;
  meta.command = command;
  meta.config_json = latefuse::canonical_config_dump(effective);
  meta.config_hash = latefuse::fnv1a_hex(meta.config_json);
  meta.seed = seed;
  return meta;
}

ordered_json load_file_config(const std::string& path) {
  if (path.empty()) return ordered_json::object();
  return latefuse::load_config_file(path);
}

std::string fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

void print_eval_result(const latefuse::MultimodalDataset& dataset,
                       const latefuse::EvalResult& result) {
  std::cout << "accuracy: " << fixed6(result.accuracy) << '\n';
  std::cout << "mean_log_loss: " << fixed6(result.mean_log_loss) << '\n';
  std::cout << "confusion (rows = true label):\n";
  for (int t = 0; t < result.confusion.class_count; ++t) {
    std::cout << " ";
    for (int p = 0; p < result.confusion.class_count; ++p)
      std::cout << ' ' << result.confusion.at(t, p);
    std::cout << '\n';
  }
  if (result.mean_gate_weights) {
    std::cout << "mean_gate_weights:";
    for (std::size_t m = 0; m < result.mean_gate_weights->size(); ++m)
      std::cout << ' ' << dataset.modality_names[m] << '='
                << fixed6((*result.mean_gate_weights)[m]);
    std::cout << '\n';
  }
}

// ---------------------------------------------------------------- synth ---

struct SynthArgs {
  std::string config_path;
  std::string output;
  int classes = 10;
  int modalities = 2;
  int contexts = 1;
  std::string reliability;
  std::uint64_t samples = 1000;
  std::string mode = "vote";
  double sharpness = 3.0;
  double noise = 0.5;
  std::uint64_t seed = 0;

  CLI::Option *output_opt = nullptr, *classes_opt = nullptr, *modalities_opt = nullptr,
              *contexts_opt = nullptr, *reliability_opt = nullptr, *samples_opt = nullptr,
              *mode_opt = nullptr, *sharpness_opt = nullptr, *noise_opt = nullptr,
              *seed_opt = nullptr;
};

void run_synth(const SynthArgs& args, const std::string& command) {
  const ordered_json file_config = load_file_config(args.config_path);
  ordered_json effective;
  auto a = args;  // resolved in place
  resolve(args.output_opt, a.output, file_config, "output", effective);
  resolve(args.classes_opt, a.classes, file_config, "classes", effective);
  resolve(args.modalities_opt, a.modalities, file_config, "modalities", effective);
  resolve(args.contexts_opt, a.contexts, file_config, "contexts", effective);
  resolve(args.reliability_opt, a.reliability, file_config, "reliability", effective);
  resolve(args.samples_opt, a.samples, file_config, "samples", effective);
  resolve(args.mode_opt, a.mode, file_config, "mode", effective);
  resolve(args.sharpness_opt, a.sharpness, file_config, "sharpness", effective);
  resolve(args.noise_opt, a.noise, file_config, "noise", effective);
  resolve(args.seed_opt, a.seed, file_config, "seed", effective);

  if (a.output.empty()) throw UsageError("synth: missing output path");
  if (a.reliability.empty()) throw UsageError("synth: missing reliability matrix");

  latefuse::SynthSpec spec;
  spec.class_count = a.classes;
  spec.modality_count = a.modalities;
  spec.context_count = a.contexts;
  spec.reliability = latefuse::parse_reliability(a.reliability, a.modalities, a.contexts);
  spec.sample_count = a.samples;
  if (a.mode == "vote")
    spec.mode = latefuse::SynthMode::vote;
  else if (a.mode == "soft")
    spec.mode = latefuse::SynthMode::soft;
  else
    throw UsageError("synth: mode must be \"vote\" or \"soft\"");
  spec.sharpness = a.sharpness;
  spec.noise = a.noise;
  spec.seed = a.seed;

  const latefuse::MultimodalDataset dataset = latefuse::generate(spec);
  const ArtifactMeta meta = make_meta(command, effective, a.seed);
  latefuse::save_dataset(dataset, a.output, &meta);

  std::cout << "wrote " << a.output << ": N=" << dataset.samples.size()
            << " C=" << dataset.class_count << " n=" << dataset.modality_count()
            << " K=" << dataset.context_dim << '\n';

  // empirical reliability: per modality and context, fraction of samples
  // whose top-scoring class is the true label
  std::vector<std::vector<std::size_t>> hit(a.modalities, std::vector<std::size_t>(a.contexts, 0));
  std::vector<std::size_t> seen(a.contexts, 0);
  for (const latefuse::SampleRecord& s : dataset.samples) {
    const latefuse::VoteRecord votes = latefuse::recover_votes(s);
    ++seen[votes.context];
    for (int m = 0; m < a.modalities; ++m)
      if (votes.votes[m] == s.label) ++hit[m][votes.context];
  }
  for (int m = 0; m < a.modalities; ++m) {
    std::cout << "empirical reliability " << dataset.modality_names[m] << ":";
    for (int k = 0; k < a.contexts; ++k)
      std::cout << ' '
                << fixed6(seen[k] ? static_cast<double>(hit[m][k]) / seen[k] : 0.0);
    std::cout << '\n';
  }
}

// ---------------------------------------------------------------- sweep ---

struct SweepArgs {
  std::string config_path;
  std::string dataset;
  std::string output;
  double step = 0.1;
  int threads = 1;
  CLI::Option *dataset_opt = nullptr, *output_opt = nullptr, *step_opt = nullptr,
              *threads_opt = nullptr;
};

void run_sweep(const SweepArgs& args, const std::string& command) {
  const ordered_json file_config = load_file_config(args.config_path);
  ordered_json effective;
  auto a = args;
  resolve(args.dataset_opt, a.dataset, file_config, "dataset", effective);
  resolve(args.output_opt, a.output, file_config, "output", effective);
  resolve(args.step_opt, a.step, file_config, "step", effective);
  resolve(args.threads_opt, a.threads, file_config, "threads", effective);

  if (a.dataset.empty()) throw UsageError("sweep: missing dataset path");
  if (a.output.empty()) throw UsageError("sweep: missing output path");

  const latefuse::MultimodalDataset dataset = latefuse::load_dataset(a.dataset);
  latefuse::SweepGrid grid{a.step, dataset.modality_count()};
  try {
    grid.units();
  } catch (const latefuse::InvalidInput& e) {
    throw UsageError(e.what());
  }

  const latefuse::SweepResult result = latefuse::run_weight_sweep(dataset, grid, a.threads);
  const ArtifactMeta meta = make_meta(command, effective, 0);
  latefuse::save_sweep(result, dataset.modality_names, a.output, &meta);

  const latefuse::SweepRow& best = result.rows[result.best_row];
  std::cout << "wrote " << a.output << " (" << result.rows.size() << " rows)\n";
  std::cout << "best fixed weights:";
  for (std::size_t m = 0; m < best.weights.size(); ++m)
    std::cout << ' ' << dataset.modality_names[m] << '=' << fixed6(best.weights[m]);
  std::cout << " accuracy=" << fixed6(best.accuracy)
            << " mean_log_loss=" << fixed6(best.mean_log_loss) << '\n';
}

// ----------------------------------------------------------- train-gate ---

struct TrainGateArgs {
  std::string config_path;
  std::string dataset;
  std::string checkpoint;
  std::string report;
  double learning_rate = 0.05;
  double momentum = 0.9;
  int epochs = 200;
  int batch_size = 32;
  int hidden_dim = 32;
  double init_scale = 0.1;
  double holdout = 0.25;
  std::string gate_mode = "input";
  std::uint64_t seed = 1;
  CLI::Option *dataset_opt = nullptr, *checkpoint_opt = nullptr, *report_opt = nullptr,
              *lr_opt = nullptr, *momentum_opt = nullptr, *epochs_opt = nullptr,
              *batch_opt = nullptr, *hidden_opt = nullptr, *init_opt = nullptr,
              *holdout_opt = nullptr, *mode_opt = nullptr, *seed_opt = nullptr;
};

void run_train_gate(const TrainGateArgs& args, const std::string& command) {
  const ordered_json file_config = load_file_config(args.config_path);
  ordered_json effective;
  auto a = args;
  resolve(args.dataset_opt, a.dataset, file_config, "dataset", effective);
  resolve(args.checkpoint_opt, a.checkpoint, file_config, "checkpoint", effective);
  resolve(args.report_opt, a.report, file_config, "report", effective);
  resolve(args.lr_opt, a.learning_rate, file_config, "learning_rate", effective);
  resolve(args.momentum_opt, a.momentum, file_config, "momentum", effective);
  resolve(args.epochs_opt, a.epochs, file_config, "epochs", effective);
  resolve(args.batch_opt, a.batch_size, file_config, "batch_size", effective);
  resolve(args.hidden_opt, a.hidden_dim, file_config, "hidden_dim", effective);
  resolve(args.init_opt, a.init_scale, file_config, "init_scale", effective);
  resolve(args.holdout_opt, a.holdout, file_config, "holdout", effective);
  resolve(args.mode_opt, a.gate_mode, file_config, "gate_mode", effective);
  resolve(args.seed_opt, a.seed, file_config, "seed", effective);

  if (a.dataset.empty()) throw UsageError("train-gate: missing dataset path");
  if (a.checkpoint.empty()) throw UsageError("train-gate: missing checkpoint path");

  latefuse::TrainConfig config;
  config.learning_rate = a.learning_rate;
  config.momentum = a.momentum;
  config.epochs = a.epochs;
  config.batch_size = a.batch_size;
  config.hidden_dim = a.hidden_dim;
  config.init_scale = a.init_scale;
  config.seed = a.seed;
  if (a.gate_mode == "input")
    config.gate_mode = latefuse::GateMode::input_conditioned;
  else if (a.gate_mode == "constant")
    config.gate_mode = latefuse::GateMode::constant;
  else
    throw UsageError("train-gate: gate mode must be \"input\" or \"constant\"");
  try {
    config.validate();
    if (a.holdout < 0.0 || a.holdout >= 1.0)
      throw latefuse::InvalidInput("holdout fraction must lie in [0, 1)");
  } catch (const latefuse::InvalidInput& e) {
    throw UsageError(e.what());
  }

  const latefuse::MultimodalDataset dataset = latefuse::load_dataset(a.dataset);
  std::cerr << "training gate on " << dataset.samples.size() << " samples ("
            << a.epochs << " epochs)\n";
  auto [net, train_report] = latefuse::train_gate(dataset, config, a.holdout);

  const ArtifactMeta meta = make_meta(command, effective, a.seed);
  latefuse::save_gate_checkpoint(net, config, a.checkpoint, &meta);
  if (!a.report.empty()) latefuse::save_report(train_report, a.report, &meta);

  const latefuse::EvalResult full =
      latefuse::evaluate(dataset, latefuse::GatedStrategy{net});
  std::cout << "final_train_accuracy: " << fixed6(train_report.final_train_accuracy) << '\n';
  if (train_report.final_holdout_accuracy)
    std::cout << "final_holdout_accuracy: " << fixed6(*train_report.final_holdout_accuracy)
              << '\n';
  std::cout << "mean_gate_weights:";
  for (std::size_t m = 0; m < full.mean_gate_weights->size(); ++m)
    std::cout << ' ' << dataset.modality_names[m] << '='
              << fixed6((*full.mean_gate_weights)[m]);
  std::cout << '\n';
  std::cout << "wrote " << a.checkpoint << '\n';
  if (!a.report.empty()) std::cout << "wrote " << a.report << '\n';
}

// ----------------------------------------------------------------- eval ---

struct EvalArgs {
  std::string config_path;
  std::string dataset;
  std::string strategy;
  std::string checkpoint;
  std::string append_to;
  int epochs = 500;     // concat-linear training
  double lr = 0.5;      // concat-linear training
  std::uint64_t seed = 1;
  CLI::Option *dataset_opt = nullptr, *strategy_opt = nullptr, *checkpoint_opt = nullptr,
              *append_opt = nullptr, *epochs_opt = nullptr, *lr_opt = nullptr,
              *seed_opt = nullptr;
};

latefuse::GatingWeights parse_fixed_weights(const std::string& text) {
  Vec w;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string cell = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
    try {
      std::size_t used = 0;
      w.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw UsageError("eval: cannot parse fixed weight \"" + cell + "\"");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  try {
    return latefuse::GatingWeights::checked(std::move(w));
  } catch (const latefuse::InvalidInput& e) {
    throw UsageError(e.what());
  }
}

void run_eval(const EvalArgs& args, const std::string& command) {
  (void)command;  // eval only appends to existing artifacts
  const ordered_json file_config = load_file_config(args.config_path);
  ordered_json effective;
  auto a = args;
  resolve(args.dataset_opt, a.dataset, file_config, "dataset", effective);
  resolve(args.strategy_opt, a.strategy, file_config, "strategy", effective);
  resolve(args.checkpoint_opt, a.checkpoint, file_config, "checkpoint", effective);
  resolve(args.append_opt, a.append_to, file_config, "output", effective);
  resolve(args.epochs_opt, a.epochs, file_config, "epochs", effective);
  resolve(args.lr_opt, a.lr, file_config, "learning_rate", effective);
  resolve(args.seed_opt, a.seed, file_config, "seed", effective);

  if (a.dataset.empty()) throw UsageError("eval: missing dataset path");
  if (a.strategy.empty()) throw UsageError("eval: missing strategy");
  if (!a.append_to.empty() && a.strategy != "gated")
    throw UsageError("eval: --append-to only applies to the gated strategy");

  const latefuse::MultimodalDataset dataset = latefuse::load_dataset(a.dataset);

  latefuse::Strategy strategy;
  bool gated = false;
  if (a.strategy == "average") {
    strategy = latefuse::AverageStrategy{};
  } else if (a.strategy.rfind("fixed:", 0) == 0) {
    strategy = latefuse::FixedStrategy{parse_fixed_weights(a.strategy.substr(6))};
  } else if (a.strategy == "concat") {
    std::cerr << "training concat-linear fusion on the evaluation dataset\n";
    strategy = latefuse::ConcatLinearStrategy{
        latefuse::train_concat_linear(dataset, a.epochs, a.lr, a.seed)};
  } else if (a.strategy == "gated") {
    if (a.checkpoint.empty()) throw UsageError("eval: gated strategy needs --checkpoint");
    auto [net, train_config] = latefuse::load_gate_checkpoint(a.checkpoint);
    (void)train_config;
    strategy = latefuse::GatedStrategy{std::move(net)};
    gated = true;
  } else {
    throw UsageError("eval: unknown strategy \"" + a.strategy +
                     "\" (expected average | fixed:w1,w2,... | concat | gated)");
  }

  const latefuse::EvalResult result = latefuse::evaluate(dataset, strategy);
  print_eval_result(dataset, result);

  if (!a.append_to.empty() && gated) {
    latefuse::append_gating_row(a.append_to, dataset.modality_count(), result.accuracy,
                                result.mean_log_loss);
    std::cout << "appended gating row to " << a.append_to << '\n';
  }
}

// ------------------------------------------------------------ gradcheck ---

struct GradcheckArgs {
  int trials = 20;
  std::uint64_t seed = 123;
  double step = 1e-5;
  bool corrupt = false;
};

int run_gradcheck(const GradcheckArgs& args) {
  if (args.trials < 1) throw UsageError("gradcheck: trials must be >= 1");
  if (!(args.step > 0.0)) throw UsageError("gradcheck: step must be positive");

  const double max_rel =
      latefuse::gradient_check_trials(args.trials, args.seed, args.step, args.corrupt);
  std::cout << "max relative error over " << args.trials << " trials: " << max_rel << '\n';
  if (max_rel < 1e-4) {
    std::cout << "gradient check PASS (threshold 1e-4)\n";
    return 0;
  }
  std::cout << "gradient check FAIL (threshold 1e-4)\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latefuse: late-fusion toolkit for multimodal classifier scores"};
  app.require_subcommand(1);
  const std::string command = join_command(argc, argv);
  int exit_code = 0;

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic multimodal dataset");
  synth->add_option("--config", synth_args.config_path, "flat key-value config file");
  synth_args.output_opt = synth->add_option("--output", synth_args.output, "dataset file to write");
  synth_args.classes_opt = synth->add_option("--classes", synth_args.classes, "class count");
  synth_args.modalities_opt =
      synth->add_option("--modalities", synth_args.modalities, "expert/modality count");
  synth_args.contexts_opt = synth->add_option("--contexts", synth_args.contexts, "context count");
  synth_args.reliability_opt = synth->add_option(
      "--reliability", synth_args.reliability,
      "per-modality, per-context vote reliability, e.g. \"0.95,0.55;0.55,0.95\"");
  synth_args.samples_opt = synth->add_option("--samples", synth_args.samples, "sample count");
  synth_args.mode_opt = synth->add_option("--mode", synth_args.mode, "vote | soft");
  synth_args.sharpness_opt =
      synth->add_option("--sharpness", synth_args.sharpness, "soft-mode logit scale");
  synth_args.noise_opt = synth->add_option("--noise", synth_args.noise, "soft-mode logit noise");
  synth_args.seed_opt =
      synth->add_option("--seed", synth_args.seed, "generator seed")->envname("LATEFUSE_SEED");
  synth->callback([&] { run_synth(synth_args, command); });

  SweepArgs sweep_args;
  CLI::App* sweep = app.add_subcommand("sweep", "fixed-weight grid sweep over a dataset");
  sweep->add_option("--config", sweep_args.config_path, "flat key-value config file");
  sweep_args.dataset_opt = sweep->add_option("--dataset", sweep_args.dataset, "dataset file");
  sweep_args.output_opt = sweep->add_option("--output", sweep_args.output, "CSV file to write");
  sweep_args.step_opt =
      sweep->add_option("--step", sweep_args.step, "grid step; 1/step must be an integer");
  sweep_args.threads_opt =
      sweep->add_option("--threads", sweep_args.threads, "grid points evaluated concurrently");
  sweep->callback([&] { run_sweep(sweep_args, command); });

  TrainGateArgs train_args;
  CLI::App* train = app.add_subcommand("train-gate", "train the softmax gating network");
  train->add_option("--config", train_args.config_path, "flat key-value config file");
  train_args.dataset_opt = train->add_option("--dataset", train_args.dataset, "dataset file");
  train_args.checkpoint_opt =
      train->add_option("--checkpoint", train_args.checkpoint, "checkpoint file to write");
  train_args.report_opt =
      train->add_option("--report", train_args.report, "training report file to write");
  train_args.lr_opt =
      train->add_option("--learning-rate,--lr", train_args.learning_rate, "SGD learning rate");
  train_args.momentum_opt = train->add_option("--momentum", train_args.momentum, "SGD momentum");
  train_args.epochs_opt = train->add_option("--epochs", train_args.epochs, "training epochs");
  train_args.batch_opt = train->add_option("--batch-size", train_args.batch_size, "minibatch size");
  train_args.hidden_opt =
      train->add_option("--hidden-dim", train_args.hidden_dim, "gate MLP hidden width");
  train_args.init_opt =
      train->add_option("--init-scale", train_args.init_scale, "uniform init half-range");
  train_args.holdout_opt =
      train->add_option("--holdout", train_args.holdout, "holdout fraction in [0, 1)");
  train_args.mode_opt =
      train->add_option("--gate-mode", train_args.gate_mode, "input | constant");
  train_args.seed_opt =
      train->add_option("--seed", train_args.seed, "training seed")->envname("LATEFUSE_SEED");
  train->callback([&] { run_train_gate(train_args, command); });

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a fusion strategy on a dataset");
  eval->add_option("--config", eval_args.config_path, "flat key-value config file");
  eval_args.dataset_opt = eval->add_option("--dataset", eval_args.dataset, "dataset file");
  eval_args.strategy_opt = eval->add_option(
      "--strategy", eval_args.strategy, "average | fixed:w1,w2,... | concat | gated");
  eval_args.checkpoint_opt =
      eval->add_option("--checkpoint", eval_args.checkpoint, "gate checkpoint (gated strategy)");
  eval_args.append_opt = eval->add_option("--append-to", eval_args.append_to,
                                          "sweep CSV to append the gating row to");
  eval_args.epochs_opt =
      eval->add_option("--epochs", eval_args.epochs, "concat-linear training epochs");
  eval_args.lr_opt =
      eval->add_option("--learning-rate,--lr", eval_args.lr, "concat-linear learning rate");
  eval_args.seed_opt =
      eval->add_option("--seed", eval_args.seed, "concat-linear seed")->envname("LATEFUSE_SEED");
  eval->callback([&] { run_eval(eval_args, command); });

  GradcheckArgs grad_args;
  CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference check of gate gradients");
  grad->add_option("--trials", grad_args.trials, "number of random (net, sample) trials");
  grad->add_option("--seed", grad_args.seed, "trial seed")->envname("LATEFUSE_SEED");
  grad->add_option("--step-size", grad_args.step, "central difference step");
  grad->add_flag("--corrupt", grad_args.corrupt)->group("");  // negative-control test hook
  grad->callback([&] { exit_code = run_gradcheck(grad_args); });

  try {
    app.parse(argc, argv);
    return exit_code;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const latefuse::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const latefuse::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
