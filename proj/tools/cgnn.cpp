// cgnn: simulate mass-spring indentation data, train and evaluate the
// conditional graph network, and benchmark inference against simulation.

#include <CLI11.hpp>
#include <iostream>

#include "cgnn/core/error.hpp"
#include "cgnn/core/file_util.hpp"
#include "cgnn/core/kv.hpp"
#include "cgnn/core/runtime.hpp"
#include "cgnn/io/commands.hpp"

namespace {

using namespace cgnn;
using namespace cgnn::io;

struct ConfigSources {
  std::vector<std::string> presets;
  std::string file;
  std::vector<std::string> overrides;
  std::size_t threads = 0;
};

void add_config_options(CLI::App& cmd, ConfigSources& src) {
  cmd.add_option("--preset", src.presets, "Named preset applied before the config file (desk, target)");
  cmd.add_option("-c,--config", src.file, "Configuration document");
  cmd.add_option("-s,--set", src.overrides, "Override one key, e.g. --set train.epochs=10");
  cmd.add_option("--threads", src.threads, "Worker threads (default: CGNN_THREADS or all cores)");
}

// Defaults, then presets, then the config file, then --set overrides.
RunConfig build_config(const ConfigSources& src) {
  RunConfig config;
  for (const std::string& p : src.presets) apply_preset(config, p);
  if (!src.file.empty()) {
    // Only keys present in the file override the presets.
    for (const auto& [key, value] : kv::parse(read_file(src.file), src.file)) config.set(key, value);
  }
  for (const std::string& o : src.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
    config.set(o.substr(0, eq), o.substr(eq + 1));
  }
  if (src.threads > 0) config.data.threads = src.threads;
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Mass-spring indentation simulator and conditional graph network"};
  app.require_subcommand(1);

  ConfigSources src;

  auto* show = app.add_subcommand("config", "Print the effective configuration");
  add_config_options(*show, src);

  std::string out;
  std::string data;
  std::string history;
  std::string checkpoint;
  std::string metrics;

  auto* simulate = app.add_subcommand("simulate", "Generate an indentation dataset");
  add_config_options(*simulate, src);
  simulate->add_option("-o,--out", out, "Dataset file to write")->required();

  auto* train_cmd = app.add_subcommand("train", "Train a model from scratch");
  add_config_options(*train_cmd, src);
  train_cmd->add_option("-d,--data", data, "Dataset file")->required();
  train_cmd->add_option("-o,--out", out, "Checkpoint to write")->required();
  train_cmd->add_option("--history", history, "Epoch history (JSON lines)");

  auto* finetune_cmd = app.add_subcommand("finetune", "Continue training a checkpoint on new data");
  add_config_options(*finetune_cmd, src);
  finetune_cmd->add_option("-d,--data", data, "Dataset file")->required();
  finetune_cmd->add_option("--from", checkpoint, "Pretrained checkpoint")->required();
  finetune_cmd->add_option("-o,--out", out, "Checkpoint to write")->required();
  finetune_cmd->add_option("--history", history, "Epoch history (JSON lines)");

  EvalOptions eval_opts;
  std::string part = "test";
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint or the identity baseline");
  add_config_options(*eval_cmd, src);
  eval_cmd->add_option("-d,--data", data, "Dataset file")->required();
  eval_cmd->add_option("-m,--checkpoint", checkpoint, "Checkpoint");
  eval_cmd->add_flag("--identity", eval_opts.identity, "Evaluate the zero-displacement, zero-force baseline");
  eval_cmd->add_flag("--cross-domain", eval_opts.cross_domain,
                     "Allow a checkpoint fit on a different simulator configuration");
  eval_cmd->add_option("--part", part, "train | val | test | all");
  eval_cmd->add_option("--metrics", metrics, "Per-sample and summary records (JSON lines)");

  PredictRequest request;
  bool predict_cross = false;
  auto* predict_cmd = app.add_subcommand("predict", "Predict one deformation from a dataset state");
  add_config_options(*predict_cmd, src);
  predict_cmd->add_option("-d,--data", data, "Dataset file")->required();
  predict_cmd->add_option("-m,--checkpoint", checkpoint, "Checkpoint")->required();
  predict_cmd->add_option("--run", request.run, "Run index");
  predict_cmd->add_option("--t-in", request.t_in, "Input state");
  predict_cmd->add_option("--t-out", request.t_out, "Target state");
  predict_cmd->add_flag("--cross-domain", predict_cross, "Allow a checkpoint from another domain");
  predict_cmd->add_option("-o,--out", out, "Prediction file (JSON)")->required();

  BenchOptions bench_opts;
  auto* bench_cmd = app.add_subcommand("bench", "Time one simulator force step against inference");
  add_config_options(*bench_cmd, src);
  bench_cmd->add_option("-m,--checkpoint", checkpoint, "Checkpoint (default: freshly initialised model)");
  bench_cmd->add_option("--reps", bench_opts.repetitions, "Repetitions");
  bench_cmd->add_option("--from-step", bench_opts.from_step, "Static state the force step starts from");
  bench_cmd->add_option("--small-markers", bench_opts.small_marker_grid,
                        "Marker grid side for the small-cloud timing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const RunConfig config = build_config(src);
    std::ostream& log = std::cout;
    if (show->parsed()) {
      std::cout << config.to_text();
    } else if (simulate->parsed()) {
      cmd_simulate(config, out, log);
    } else if (train_cmd->parsed()) {
      cmd_train(config, data, out, history, log);
    } else if (finetune_cmd->parsed()) {
      cmd_finetune(config, data, checkpoint, out, history, log);
    } else if (eval_cmd->parsed()) {
      eval_opts.part = parse_eval_part(part);
      std::optional<fs::path> ckpt;
      if (!checkpoint.empty()) ckpt = checkpoint;
      cmd_eval(config, data, ckpt, eval_opts, metrics, log);
    } else if (predict_cmd->parsed()) {
      cmd_predict(config, data, checkpoint, request, predict_cross, out, log);
    } else if (bench_cmd->parsed()) {
      std::optional<fs::path> ckpt;
      if (!checkpoint.empty()) ckpt = checkpoint;
      cmd_bench(config, ckpt, bench_opts, log);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}
