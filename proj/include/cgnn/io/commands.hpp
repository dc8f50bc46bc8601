#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cgnn/io/dataset_file.hpp"
#include "cgnn/io/run_config.hpp"
#include "cgnn/model/cgnn.hpp"
#include "cgnn/train/dataset.hpp"
#include "cgnn/train/train.hpp"

namespace cgnn::io {

namespace fs = std::filesystem;

// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,
  kExitConfig = 3,
  kExitIo = 4,
  kExitDivergence = 5,
};

int exit_code_for(const std::exception& error);

// ---- checkpoints -----------------------------------------------------------

// Provenance stored next to the weights in "<checkpoint>.manifest".
struct CheckpointInfo {
  std::string domain_hash;  // simulator configuration the weights were fit on
  std::uint64_t dataset_seed = 0;
  std::string mode;  // pretrain | finetune | from-scratch
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::uint64_t train_seed = 0;
  std::uint64_t split_seed = 0;
};

struct LoadedModel {
  model::Cgnn net;
  CheckpointInfo info;
};

fs::path manifest_path(const fs::path& checkpoint);
void write_model(const fs::path& checkpoint, const model::Cgnn& net, const CheckpointInfo& info);
LoadedModel read_model(const fs::path& checkpoint);

// ---- data preparation ------------------------------------------------------

struct PreparedData {
  train::Split split;
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
};

// Location split plus single- and multi-step samples per part. Multi-step
// pairs are drawn from the dataset seed, so every command sees the same
// samples for the same (dataset, split) pair.
PreparedData prepare(const DatasetFile& dataset, const RunConfig& config);

// ---- JSON lines --------------------------------------------------------------

std::string history_jsonl(const std::vector<train::EpochRecord>& history);
std::string metrics_jsonl(const train::Metrics& metrics, const std::string& label);

// ---- commands ----------------------------------------------------------------

struct SimulateReport {
  std::size_t runs = 0;
  std::size_t states = 0;         // non-rest static states
  double max_depth_mm = 0.0;      // deepest point below the rest plane
  double wall_seconds = 0.0;
  double seconds_per_run = 0.0;   // wall time x workers / runs
  std::string file_fnv1a64;
};
SimulateReport cmd_simulate(const RunConfig& config, const fs::path& out, std::ostream& log);

struct TrainReport {
  train::TrainResult result;
  PreparedData data;
};
// Fits a fresh model (mode pretrain or from-scratch) and writes the best
// weights, their manifest and, when `history` is non-empty, the epoch log.
TrainReport cmd_train(const RunConfig& config, const fs::path& dataset, const fs::path& out,
                      const fs::path& history, std::ostream& log);
// Continues training `checkpoint` on `dataset`; the checkpoint's model
// configuration must equal config.model.
TrainReport cmd_finetune(const RunConfig& config, const fs::path& dataset,
                         const fs::path& checkpoint, const fs::path& out,
                         const fs::path& history, std::ostream& log);

enum class EvalPart { kTrain, kVal, kTest, kAll };
EvalPart parse_eval_part(const std::string& text);

struct EvalOptions {
  EvalPart part = EvalPart::kTest;
  bool identity = false;      // δx = 0, δF = 0 baseline; no checkpoint needed
  bool cross_domain = false;  // allow a checkpoint fit on another simulator setup
};
struct EvalReport {
  train::Metrics metrics;
  train::DatasetStats stats;  // of the evaluated samples
};
EvalReport cmd_eval(const RunConfig& config, const fs::path& dataset,
                    const std::optional<fs::path>& checkpoint, const EvalOptions& options,
                    const fs::path& metrics_out, std::ostream& log);

struct PredictRequest {
  std::size_t run = 0;  // index into the dataset's runs
  std::size_t t_in = 0;
  std::size_t t_out = 1;
};
// Writes one prediction (input, predicted and true clouds, force change) as
// JSON.
model::Prediction cmd_predict(const RunConfig& config, const fs::path& dataset,
                              const fs::path& checkpoint, const PredictRequest& request,
                              bool cross_domain, const fs::path& out, std::ostream& log);

struct Timing {
  std::vector<double> seconds;
  double mean = 0.0;
  double std = 0.0;
};
struct BenchReport {
  std::size_t points = 0;        // full grid
  std::size_t small_points = 0;  // marker-observed cloud
  std::size_t repetitions = 0;
  Timing simulate;       // run_to_stability, one force step from a static state
  Timing predict;        // inference on the full grid
  Timing predict_small;  // inference on the marker-observed cloud
  double ratio = 0.0;    // simulate.mean / predict.mean
};
struct BenchOptions {
  std::size_t repetitions = 20;
  std::size_t from_step = 1;       // static state F_t the force step starts from
  std::size_t small_marker_grid = 5;
};
// Times one simulator force step against model inference on the same state.
// Without a checkpoint the model is freshly initialised from config.model.
BenchReport cmd_bench(const RunConfig& config, const std::optional<fs::path>& checkpoint,
                      const BenchOptions& options, std::ostream& log);

}  // namespace cgnn::io
