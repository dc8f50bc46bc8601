#include "cgnn/io/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <span>
#include <sstream>
#include <json.hpp>

#include "cgnn/ad/checkpoint.hpp"
#include "cgnn/core/error.hpp"
#include "cgnn/core/file_util.hpp"
#include "cgnn/core/kv.hpp"

namespace cgnn::io {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void require_file(const fs::path& path, const char* what) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw IoError(std::string(what) + " not found: " + path.string());
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string pm(const train::MeanStd& m, int digits) {
  return fixed(m.mean, digits) + " ± " + fixed(m.std, digits);
}

json vec3_rows(std::span<const Vec3> rows) {
  json out = json::array();
  for (const Vec3& p : rows) out.push_back({p.x, p.y, p.z});
  return out;
}

void check_domain(const LoadedModel& loaded, const DatasetFile& dataset, bool cross_domain) {
  if (!cross_domain && loaded.info.domain_hash != dataset.domain_hash()) {
    throw ConfigError("checkpoint was fit on simulator configuration " + loaded.info.domain_hash +
                      " but the dataset has " + dataset.domain_hash() +
                      "; pass --cross-domain to evaluate across domains");
  }
}

DatasetFile load_dataset(const fs::path& path) {
  require_file(path, "dataset");
  return read_dataset(path);
}

void write_history(const fs::path& path, const train::TrainResult& result) {
  if (!path.empty()) write_file_atomic(path, history_jsonl(result.history));
}

train::EpochCallback progress(std::ostream& log) {
  return [&log](const train::EpochRecord& e) {
    log << "epoch " << e.epoch << "  train " << fixed(e.train_loss, 4) << "  L_d "
        << fixed(e.train_mean_ld, 4) << " mm  |δF err| " << fixed(e.train_force_abs, 4)
        << " N  val " << fixed(e.val_loss, 4) << "  (" << fixed(e.seconds, 1) << " s)\n"
        << std::flush;
  };
}

CheckpointInfo info_for(const RunConfig& config, const DatasetFile& dataset,
                        const train::TrainResult& result, train::TrainMode mode) {
  CheckpointInfo info;
  info.domain_hash = dataset.domain_hash();
  info.dataset_seed = dataset.seed;
  info.mode = train::to_string(mode);
  info.epochs = config.train.epochs;
  info.best_epoch = result.best_epoch;
  info.best_val_loss = result.best_val_loss;
  info.train_seed = config.train.seed;
  info.split_seed = config.split.seed;
  return info;
}

Timing summarize(std::vector<double> seconds) {
  Timing t;
  const train::MeanStd ms = train::mean_std(seconds);
  t.seconds = std::move(seconds);
  t.mean = ms.mean;
  t.std = ms.std;
  return t;
}

}  // namespace

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const ConfigError*>(&error) || dynamic_cast<const ShapeError*>(&error)) {
    return kExitConfig;
  }
  if (dynamic_cast<const IoError*>(&error) || dynamic_cast<const fs::filesystem_error*>(&error)) {
    return kExitIo;
  }
  if (dynamic_cast<const DivergenceError*>(&error) || dynamic_cast<const ConvergenceError*>(&error)) {
    return kExitDivergence;
  }
  return kExitInternal;
}

// ---- checkpoints -----------------------------------------------------------

fs::path manifest_path(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p += ".manifest";
  return p;
}

void write_model(const fs::path& checkpoint, const model::Cgnn& net, const CheckpointInfo& info) {
  const std::string weights = ad::encode_checkpoint(net.to_arrays());
  std::string manifest = net.config().manifest();
  manifest += "\n[checkpoint]\n";
  manifest += "domain_hash = \"" + info.domain_hash + "\"\n";
  manifest += "dataset_seed = " + std::to_string(info.dataset_seed) + "\n";
  manifest += "mode = \"" + info.mode + "\"\n";
  manifest += "epochs = " + std::to_string(info.epochs) + "\n";
  manifest += "best_epoch = " + std::to_string(info.best_epoch) + "\n";
  manifest += "best_val_loss = " + kv::format_double(info.best_val_loss) + "\n";
  manifest += "train_seed = " + std::to_string(info.train_seed) + "\n";
  manifest += "split_seed = " + std::to_string(info.split_seed) + "\n";
  manifest += "parameters = " + std::to_string(net.parameter_count()) + "\n";
  manifest += "weights_fnv1a64 = \"" + hex64(fnv1a64(weights)) + "\"\n";
  write_file_atomic(checkpoint, weights);
  write_file_atomic(manifest_path(checkpoint), manifest);
}

LoadedModel read_model(const fs::path& checkpoint) {
  require_file(checkpoint, "checkpoint");
  require_file(manifest_path(checkpoint), "checkpoint manifest");
  const std::string weights = read_file(checkpoint);
  const std::string manifest = read_file(manifest_path(checkpoint));
  const auto kvs = kv::parse(manifest, manifest_path(checkpoint).string());
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kvs.find("checkpoint." + key);
    if (it == kvs.end()) throw IoError(manifest_path(checkpoint).string() + ": missing '" + key + "'");
    return it->second;
  };
  if (get("weights_fnv1a64") != hex64(fnv1a64(weights))) {
    throw IoError(checkpoint.string() + ": weights do not match their manifest");
  }
  CheckpointInfo info;
  info.domain_hash = get("domain_hash");
  info.dataset_seed = kv::to_u64("dataset_seed", get("dataset_seed"));
  info.mode = get("mode");
  info.epochs = kv::to_size("epochs", get("epochs"));
  info.best_epoch = kv::to_size("best_epoch", get("best_epoch"));
  info.best_val_loss = kv::to_double("best_val_loss", get("best_val_loss"));
  info.train_seed = kv::to_u64("train_seed", get("train_seed"));
  info.split_seed = kv::to_u64("split_seed", get("split_seed"));
  model::Cgnn net = model::Cgnn::from_arrays(model::ModelConfig::from_manifest(manifest),
                                             ad::decode_checkpoint(weights, checkpoint.string()));
  return {std::move(net), std::move(info)};
}

// ---- data preparation ------------------------------------------------------

PreparedData prepare(const DatasetFile& dataset, const RunConfig& config) {
  PreparedData data;
  data.split = train::split_by_location(dataset.runs, config.split);
  const Rng root(dataset.seed);
  auto modes = [&](const std::vector<msm::IndentationRun>& runs, std::uint64_t part) {
    if (runs.empty()) return std::vector<Sample>{};
    return train::build_modes(runs, dataset.msm, root.child(part), config.data.multi_pairs).combined();
  };
  data.train = modes(data.split.train, 1);
  data.val = modes(data.split.val, 2);
  data.test = modes(data.split.test, 3);
  return data;
}

// ---- JSON lines --------------------------------------------------------------

std::string history_jsonl(const std::vector<train::EpochRecord>& history) {
  std::string out;
  for (const train::EpochRecord& e : history) {
    json j = {{"type", "epoch"},
              {"epoch", e.epoch},
              {"train_loss", e.train_loss},
              {"train_mean_ld_mm", e.train_mean_ld},
              {"train_force_abs_n", e.train_force_abs},
              {"val_loss", e.val_loss},
              {"seconds", e.seconds}};
    out += j.dump() + "\n";
  }
  return out;
}

std::string metrics_jsonl(const train::Metrics& metrics, const std::string& label) {
  std::string out;
  for (const train::SampleMetrics& s : metrics.per_sample) {
    json j = {{"type", "sample"},
              {"label", label},
              {"location", s.meta.location},
              {"direction", s.meta.direction},
              {"t_in", s.meta.t_in},
              {"t_out", s.meta.t_out},
              {"mean_ld_mm", s.mean_ld},
              {"max_ld_mm", s.max_ld},
              {"force_true_n", s.force_true},
              {"force_pred_n", s.force_pred},
              {"force_abs_error_n", s.force_abs_error}};
    out += j.dump() + "\n";
  }
  json summary = {{"type", "summary"},
                  {"label", label},
                  {"samples", metrics.samples},
                  {"force_mse_n2", metrics.force_mse},
                  {"force_abs_error_n", {{"mean", metrics.force_abs_error.mean}, {"std", metrics.force_abs_error.std}}},
                  {"mean_ld_mm", {{"mean", metrics.mean_ld.mean}, {"std", metrics.mean_ld.std}}},
                  {"max_ld_mm", {{"mean", metrics.max_ld.mean}, {"std", metrics.max_ld.std}}}};
  out += summary.dump() + "\n";
  return out;
}

// ---- commands ----------------------------------------------------------------

SimulateReport cmd_simulate(const RunConfig& config, const fs::path& out, std::ostream& log) {
  config.validate();
  const std::size_t workers = msm::resolve_threads(config.data.threads);
  const auto start = Clock::now();
  DatasetFile dataset;
  dataset.msm = config.msm;
  dataset.seed = config.data.seed;
  dataset.runs = msm::generate_dataset(config.msm, Rng(config.data.seed), workers);

  SimulateReport report;
  report.wall_seconds = seconds_since(start);
  report.runs = dataset.runs.size();
  report.states = msm::static_state_count(dataset.runs);
  const std::size_t jobs = std::max<std::size_t>(1, std::min(workers, report.runs));
  report.seconds_per_run =
      report.runs ? report.wall_seconds * static_cast<double>(jobs) / static_cast<double>(report.runs) : 0.0;
  for (const msm::IndentationRun& run : dataset.runs) {
    for (const auto& snapshot : run.positions_mm) {
      for (const Vec3& p : snapshot) report.max_depth_mm = std::max(report.max_depth_mm, -p.z);
    }
  }
  const std::string bytes = encode_dataset(dataset);
  report.file_fnv1a64 = hex64(fnv1a64(bytes));
  write_file_atomic(out, bytes);

  log << "runs            " << report.runs << "\n"
      << "static states   " << report.states << "\n"
      << "max depth       " << fixed(report.max_depth_mm, 3) << " mm\n"
      << "wall time       " << fixed(report.wall_seconds, 2) << " s (" << jobs << " workers, "
      << fixed(report.seconds_per_run, 4) << " s per run)\n"
      << "wrote           " << out.string() << " (fnv1a64 " << report.file_fnv1a64 << ")\n";
  return report;
}

TrainReport cmd_train(const RunConfig& config, const fs::path& dataset_path, const fs::path& out,
                      const fs::path& history, std::ostream& log) {
  config.validate();
  if (config.train.mode == train::TrainMode::kFinetune) {
    throw ConfigError("train: mode 'finetune' needs the finetune command and a checkpoint");
  }
  const DatasetFile dataset = load_dataset(dataset_path);
  PreparedData data = prepare(dataset, config);
  Rng init_rng = Rng(config.train.seed).child(0);
  const model::Cgnn init(config.model, init_rng);
  log << "training on " << data.train.size() << " samples (" << data.split.train_locations.size()
      << " locations), validating on " << data.val.size() << "; " << init.parameter_count()
      << " parameters\n";
  TrainReport report{train::fit(data.train, data.val, config.train, init, progress(log)), std::move(data)};
  write_model(out, report.result.best, info_for(config, dataset, report.result, config.train.mode));
  write_history(history, report.result);
  log << "best epoch " << report.result.best_epoch << " (val " << fixed(report.result.best_val_loss, 4)
      << "), wrote " << out.string() << "\n";
  return report;
}

TrainReport cmd_finetune(const RunConfig& config, const fs::path& dataset_path,
                         const fs::path& checkpoint, const fs::path& out, const fs::path& history,
                         std::ostream& log) {
  config.validate();
  const LoadedModel loaded = read_model(checkpoint);
  const DatasetFile dataset = load_dataset(dataset_path);
  PreparedData data = prepare(dataset, config);
  train::TrainConfig tc = config.train;
  tc.mode = train::TrainMode::kFinetune;
  log << "fine-tuning " << checkpoint.string() << " on " << data.train.size() << " samples ("
      << data.split.train_locations.size() << " locations)\n";
  TrainReport report{
      train::finetune(loaded.net, config.model, data.train, data.val, tc, progress(log)),
      std::move(data)};
  write_model(out, report.result.best, info_for(config, dataset, report.result, tc.mode));
  write_history(history, report.result);
  log << "best epoch " << report.result.best_epoch << " (val " << fixed(report.result.best_val_loss, 4)
      << "), wrote " << out.string() << "\n";
  return report;
}

EvalPart parse_eval_part(const std::string& text) {
  if (text == "train") return EvalPart::kTrain;
  if (text == "val") return EvalPart::kVal;
  if (text == "test") return EvalPart::kTest;
  if (text == "all") return EvalPart::kAll;
  throw ConfigError("unknown evaluation part '" + text + "' (train | val | test | all)");
}

EvalReport cmd_eval(const RunConfig& config, const fs::path& dataset_path,
                    const std::optional<fs::path>& checkpoint, const EvalOptions& options,
                    const fs::path& metrics_out, std::ostream& log) {
  config.validate();
  if (!options.identity && !checkpoint) throw ConfigError("eval: need a checkpoint or --identity");
  std::optional<LoadedModel> loaded;
  if (!options.identity) loaded = read_model(*checkpoint);
  const DatasetFile dataset = load_dataset(dataset_path);
  if (loaded) check_domain(*loaded, dataset, options.cross_domain);

  const PreparedData data = prepare(dataset, config);
  std::vector<Sample> samples;
  const char* label = "test";
  switch (options.part) {
    case EvalPart::kTrain:
      samples = data.train;
      label = "train";
      break;
    case EvalPart::kVal:
      samples = data.val;
      label = "val";
      break;
    case EvalPart::kTest:
      samples = data.test;
      break;
    case EvalPart::kAll:
      samples = data.train;
      samples.insert(samples.end(), data.val.begin(), data.val.end());
      samples.insert(samples.end(), data.test.begin(), data.test.end());
      label = "all";
      break;
  }
  if (samples.empty()) throw ConfigError(std::string("eval: the ") + label + " part is empty");

  EvalReport report;
  report.stats = train::dataset_stats(samples);
  report.metrics = options.identity ? train::evaluate(samples, train::identity_predictor())
                                    : train::evaluate(samples, loaded->net);
  if (!metrics_out.empty()) write_file_atomic(metrics_out, metrics_jsonl(report.metrics, label));

  const train::Metrics& m = report.metrics;
  log << (options.identity ? "identity baseline" : "model") << " on " << m.samples << " " << label
      << " samples\n"
      << "  force MSE         " << fixed(m.force_mse, 4) << " N^2\n"
      << "  force abs error   " << pm(m.force_abs_error, 4) << " N\n"
      << "  mean L_d          " << pm(m.mean_ld, 4) << " mm\n"
      << "  max L_d           " << pm(m.max_ld, 4) << " mm\n"
      << "  data: mean point displacement " << fixed(report.stats.mean_point_displacement, 4)
      << " mm, mean contact displacement " << fixed(report.stats.mean_contact_displacement, 4)
      << " mm\n";
  return report;
}

model::Prediction cmd_predict(const RunConfig& config, const fs::path& dataset_path,
                              const fs::path& checkpoint, const PredictRequest& request,
                              bool cross_domain, const fs::path& out, std::ostream& log) {
  config.validate();
  const LoadedModel loaded = read_model(checkpoint);
  const DatasetFile dataset = load_dataset(dataset_path);
  check_domain(loaded, dataset, cross_domain);
  if (request.run >= dataset.runs.size()) {
    throw ConfigError("predict: run " + std::to_string(request.run) + " out of range (" +
                      std::to_string(dataset.runs.size()) + " runs)");
  }
  const Sample sample =
      train::make_sample(dataset.runs[request.run], request.t_in, request.t_out, dataset.msm);
  model::Prediction p = loaded.net.predict(sample.input, sample.condition);

  json j = {{"run", request.run},
            {"location", sample.meta.location},
            {"direction", sample.meta.direction},
            {"t_in", request.t_in},
            {"t_out", request.t_out},
            {"condition", {{"start", {sample.condition.start.x, sample.condition.start.y, sample.condition.start.z}},
                           {"end", {sample.condition.end.x, sample.condition.end.y, sample.condition.end.z}}}},
            {"force_change_pred_n", p.force_change},
            {"force_change_true_n", sample.target_force_change},
            {"mean_ld_mm", mean_euclidean_distance(sample.target(), p.deformed)},
            {"input_mm", vec3_rows(sample.input.points())},
            {"predicted_mm", vec3_rows(p.deformed.points())},
            {"target_mm", vec3_rows(sample.target().points())}};
  write_file_atomic(out, j.dump() + "\n");
  log << "δF predicted " << fixed(p.force_change, 4) << " N (true " << fixed(sample.target_force_change, 4)
      << " N), mean L_d " << fixed(j["mean_ld_mm"].get<double>(), 4) << " mm; wrote " << out.string()
      << "\n";
  return p;
}

BenchReport cmd_bench(const RunConfig& config, const std::optional<fs::path>& checkpoint,
                      const BenchOptions& options, std::ostream& log) {
  config.validate();
  if (options.repetitions < 1) throw ConfigError("bench: repetitions must be >= 1");
  if (options.from_step >= config.msm.n_t) {
    throw ConfigError("bench: from_step must be below n_t so a further force step exists");
  }
  std::optional<model::Cgnn> net;
  if (checkpoint) {
    net = read_model(*checkpoint).net;
  } else {
    Rng rng = Rng(config.train.seed).child(0);
    net.emplace(config.model, rng);
  }

  const msm::MsmConfig& mc = config.msm;
  const msm::MsmState rest = msm::build_surface(mc);
  const std::vector<double> forces = msm::force_schedule(mc);
  const std::size_t centre = msm::grid_index(mc.grid_n / 2, mc.grid_n / 2, mc.grid_n);
  const Vec3 direction{0.0, 0.0, -1.0};
  msm::IndentationPlan plan{centre, direction,
                            std::vector<double>(forces.begin(), forces.begin() + static_cast<std::ptrdiff_t>(options.from_step))};
  const msm::MsmState start = msm::indent(rest, plan, mc).back().state;
  msm::MsmState loaded = start;
  loaded.external_force[centre] = direction * forces[options.from_step];
  msm::refresh_forces(loaded, mc);

  BenchReport report;
  report.repetitions = options.repetitions;
  std::vector<double> sim;
  msm::MsmState settled;
  for (std::size_t r = 0; r < options.repetitions; ++r) {
    const auto t0 = Clock::now();
    settled = msm::run_to_stability(loaded, mc).first;
    sim.push_back(seconds_since(t0));
  }

  auto time_predict = [&](const msm::MsmConfig& observe_cfg, std::size_t& points) {
    const train::ObservedCloud before = train::observe(msm::to_mm(start.positions), centre, observe_cfg);
    const train::ObservedCloud after = train::observe(msm::to_mm(settled.positions), centre, observe_cfg);
    const PointCloud x(before.points);
    const Condition c{before.points[before.contact_index], after.points[after.contact_index]};
    points = x.size();
    net->predict(x, c);  // warm-up
    std::vector<double> seconds;
    for (std::size_t r = 0; r < options.repetitions; ++r) {
      const auto t0 = Clock::now();
      net->predict(x, c);
      seconds.push_back(seconds_since(t0));
    }
    return seconds;
  };
  msm::MsmConfig full = mc;
  full.marker_grid = 0;
  msm::MsmConfig small = mc;
  small.marker_grid = options.small_marker_grid;
  report.simulate = summarize(std::move(sim));
  report.predict = summarize(time_predict(full, report.points));
  report.predict_small = summarize(time_predict(small, report.small_points));
  report.ratio = report.simulate.mean / report.predict.mean;

  auto ms = [](const Timing& t) { return fixed(t.mean * 1e3, 3) + " ± " + fixed(t.std * 1e3, 3) + " ms"; };
  log << "repetitions                 " << report.repetitions << "\n"
      << "simulate one force step     " << ms(report.simulate) << " (" << report.points << " points)\n"
      << "predict                     " << ms(report.predict) << " (" << report.points << " points)\n"
      << "predict                     " << ms(report.predict_small) << " (" << report.small_points
      << " points)\n"
      << "simulate / predict          " << fixed(report.ratio, 3) << "\n";
  return report;
}

}  // namespace cgnn::io
