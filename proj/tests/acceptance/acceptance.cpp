// Acceptance suite: one pass/fail line per criterion, exit status 1 when any
// criterion fails.
//
//   acceptance [criteria...] [--work DIR] [--reuse]
//
// Long-running artefacts (datasets, trained models) live in the work
// directory. --reuse keeps artefacts from an earlier run instead of
// regenerating them.

#include <CLI11.hpp>
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cgnn/core/file_util.hpp"
#include "cgnn/core/rng.hpp"
#include "cgnn/core/runtime.hpp"
#include "cgnn/graph/knn.hpp"
#include "cgnn/io/commands.hpp"
#include "cgnn/model/cgnn.hpp"
#include "cgnn/msm/simulator.hpp"
#include "cgnn/train/dataset.hpp"
#include "cgnn/train/train.hpp"

#ifndef CGNN_GRADIENTS_PATH
#define CGNN_GRADIENTS_PATH "acceptance_gradients"
#endif

using namespace cgnn;
using namespace cgnn::io;

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(const char* format, ...) {
  char buf[2048];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---- tolerances and budgets ---------------------------------------------------

constexpr std::size_t kKnnClouds = 100;
constexpr std::size_t kKnnMaxPoints = 300;
constexpr std::size_t kPermutationClouds = 20;
constexpr double kPermutationTol = 1e-5;
constexpr double kSymmetryTol = 1e-6;  // m
constexpr double kSingleMassTol = 1e-6;  // m
constexpr double kDefaultSimulateBudget = 3 * 3600.0;  // s
constexpr double kDeskSimulateBudget = 15 * 60.0;  // s
constexpr std::size_t kDefaultStates = 16500;
constexpr std::size_t kDeskStates = 900;
constexpr std::size_t kOverfitSamples = 10;
constexpr std::size_t kOverfitEpochs = 500;
constexpr double kOverfitBudget = 30 * 60.0;  // s
constexpr double kOverfitLd = 0.1;  // mm
constexpr double kOverfitForce = 0.05;  // N
constexpr double kDeskLd = 1.0;  // mm
constexpr double kDeskForce = 0.15;  // N
constexpr std::size_t kTransferLocations = 8;
constexpr std::size_t kTransferSeeds = 5;
constexpr std::size_t kTransferWins = 4;
constexpr std::size_t kTransferEpochs = 100;
constexpr double kAugmentFraction = 0.1;
constexpr double kAugmentRatio = 1.15;
constexpr std::size_t kBenchRepetitions = 20;

// ---- shared artefacts -----------------------------------------------------------

class Workspace {
 public:
  Workspace(fs::path dir, bool reuse) : dir_(std::move(dir)), reuse_(reuse) {
    fs::create_directories(dir_);
    log_.open(dir_ / "acceptance.log", std::ios::app);
  }

  fs::path path(const std::string& name) const { return dir_ / name; }
  std::ostream& log() { return log_; }
  bool reusable(const fs::path& file) const { return reuse_ && fs::exists(file); }

  void note(const std::string& what) {
    log_ << "== " << what << std::endl;
  }

  RunConfig desk_config() const {
    RunConfig c;
    apply_preset(c, "desk");
    return c;
  }

  // Desk-scale dataset; the simulate report is kept when generated here.
  const fs::path& desk_dataset() {
    if (!desk_path_) {
      desk_path_ = path("desk.ds");
      if (!reusable(*desk_path_)) {
        note("simulate desk");
        desk_report_ = cmd_simulate(desk_config(), *desk_path_, log_);
      }
    }
    return *desk_path_;
  }
  const std::optional<SimulateReport>& desk_report() { return desk_dataset(), desk_report_; }

  const fs::path& default_dataset() {
    if (!default_path_) {
      default_path_ = path("default.ds");
      if (!reusable(*default_path_)) {
        note("simulate default");
        default_report_ = cmd_simulate(RunConfig{}, *default_path_, log_);
      }
    }
    return *default_path_;
  }
  const std::optional<SimulateReport>& default_report() { return default_dataset(), default_report_; }

  const DatasetFile& loaded(const fs::path& file) {
    auto it = datasets_.find(file.string());
    if (it == datasets_.end()) it = datasets_.emplace(file.string(), read_dataset(file)).first;
    return it->second;
  }

  // Desk model trained with the default schedule.
  const fs::path& desk_model() {
    if (!desk_model_) desk_model_ = trained("desk", desk_config());
    return *desk_model_;
  }

  // Same schedule with 10% point subsampling.
  const fs::path& augmented_model() {
    if (!augmented_model_) {
      RunConfig c = desk_config();
      c.train.augment_fraction = kAugmentFraction;
      augmented_model_ = trained("desk_aug", c);
    }
    return *augmented_model_;
  }

  train::Metrics test_metrics(const fs::path& checkpoint) {
    EvalOptions options;
    return cmd_eval(desk_config(), desk_dataset(), checkpoint, options, {}, log_).metrics;
  }

 private:
  fs::path trained(const std::string& name, const RunConfig& config) {
    const fs::path out = path(name + ".ckpt");
    if (!reusable(out)) {
      note("train " + name);
      cmd_train(config, desk_dataset(), out, path(name + ".history"), log_);
    }
    return out;
  }

  fs::path dir_;
  bool reuse_;
  std::ofstream log_;
  std::optional<fs::path> desk_path_;
  std::optional<SimulateReport> desk_report_;
  std::optional<fs::path> default_path_;
  std::optional<SimulateReport> default_report_;
  std::optional<fs::path> desk_model_;
  std::optional<fs::path> augmented_model_;
  std::map<std::string, DatasetFile> datasets_;
};

// ---- 1: gradients -----------------------------------------------------------------

Outcome gradients(Workspace&) {
  const std::string command = std::string("\"") + CGNN_GRADIENTS_PATH + "\" 5";
  FILE* pipe = popen(command.c_str(), "r");
  if (!pipe) return {false, "could not start " + command};
  std::string summary;
  char line[1024];
  while (std::fgets(line, sizeof line, pipe)) {
    std::string s(line);
    if (s.rfind("summary ", 0) == 0) summary = s.substr(8, s.find_last_not_of('\n') - 7);
  }
  const int status = pclose(pipe);
  if (summary.empty()) return {false, "no summary from " + command};
  return {status == 0, summary + " (h 1e-3, operators < 1e-4, end-to-end < 1e-3)"};
}

// ---- 2: kNN against a brute-force scan ----------------------------------------------

template <typename T>
graph::EdgeList brute_force(const std::vector<T>& f, std::size_t n, std::size_t dim, std::size_t k) {
  graph::EdgeList out;
  out.nodes = n;
  out.k = k;
  std::vector<std::pair<double, std::uint32_t>> order;
  for (std::size_t i = 0; i < n; ++i) {
    order.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double diff = static_cast<double>(f[i * dim + c]) - static_cast<double>(f[j * dim + c]);
        d += diff * diff;
      }
      order.emplace_back(d, static_cast<std::uint32_t>(j));
    }
    std::sort(order.begin(), order.end());
    std::vector<std::uint32_t> sources{static_cast<std::uint32_t>(i)};
    for (std::size_t r = 0; r < k; ++r) sources.push_back(order[r].second);
    std::sort(sources.begin(), sources.end());
    for (std::uint32_t s : sources) {
      out.target.push_back(static_cast<std::uint32_t>(i));
      out.source.push_back(s);
    }
  }
  return out;
}

Outcome knn_oracle(Workspace&) {
  Rng rng(2024);
  const std::array<std::size_t, 3> dims{3, 64, 128};
  const std::array<graph::KnnMethod, 4> methods{graph::KnnMethod::kAuto, graph::KnnMethod::kBruteForce,
                                                graph::KnnMethod::kKdTree, graph::KnnMethod::kScreened};
  std::size_t compared = 0, mismatched = 0, tied = 0;
  std::string first_mismatch;
  for (std::size_t cloud = 0; cloud < kKnnClouds; ++cloud) {
    const std::size_t n = 6 + static_cast<std::size_t>(rng.below(kKnnMaxPoints - 5));
    const std::size_t dim = dims[cloud % 3];
    const std::array<std::size_t, 3> ks{1, 5, n - 1};
    const std::size_t k = ks[(cloud / 3) % 3];
    // Every fifth cloud sits on a coarse lattice, so distance ties are common.
    const bool lattice = cloud % 5 == 4;
    tied += lattice;
    std::vector<float> f(n * dim);
    for (float& v : f) v = lattice ? static_cast<float>(rng.below(3)) : static_cast<float>(rng.uniform(-1, 1));
    std::vector<double> g(f.begin(), f.end());
    const graph::EdgeList want = brute_force(f, n, dim, k);
    const graph::EdgeList want64 = brute_force(g, n, dim, k);
    for (graph::KnnMethod m : methods) {
      const bool ok32 = graph::knn_graph<float>(f, n, dim, k, m) == want;
      const bool ok64 = graph::knn_graph<double>(g, n, dim, k, m) == want64;
      compared += 2;
      mismatched += !ok32 + !ok64;
      if ((!ok32 || !ok64) && first_mismatch.empty()) {
        first_mismatch = fmt("; first mismatch: cloud %zu (n %zu, dim %zu, k %zu, method %d)", cloud, n, dim, k,
                             static_cast<int>(m));
      }
    }
  }
  return {mismatched == 0,
          fmt("%zu clouds (%zu on a tie-heavy lattice), N <= %zu, dims {3, 64, 128}, k in {1, 5, N-1}; "
              "%zu/%zu graphs identical to the brute-force scan",
              kKnnClouds, tied, kKnnMaxPoints, compared - mismatched, compared) +
              first_mismatch};
}

// ---- 3: permutation ------------------------------------------------------------------

// True when no two pairwise squared distances coincide, evaluated on the
// coordinates as the network sees them.
bool distinct_distances(const std::vector<Vec3>& pts, double scale) {
  std::vector<double> d;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const std::array<double, 3> a{pts[i].x, pts[i].y, pts[i].z};
      const std::array<double, 3> b{pts[j].x, pts[j].y, pts[j].z};
      double s = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double diff = static_cast<double>(static_cast<float>(a[c] * scale)) - static_cast<float>(b[c] * scale);
        s += diff * diff;
      }
      d.push_back(s);
    }
  }
  std::sort(d.begin(), d.end());
  return std::adjacent_find(d.begin(), d.end()) == d.end();
}

Outcome permutation(Workspace&) {
  Rng rng(77);
  const model::ModelConfig config;
  double worst_dx = 0.0, worst_df = 0.0;
  std::size_t resampled = 0;
  for (std::size_t cloud = 0; cloud < kPermutationClouds; ++cloud) {
    Rng weights = rng.child(cloud);
    const model::Cgnn net(config, weights, false);
    const std::size_t n = 26 + static_cast<std::size_t>(rng.below(231));
    std::vector<Vec3> pts(n);
    do {
      for (Vec3& p : pts) p = {rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(-10, 0)};
      resampled += 1;
    } while (!distinct_distances(pts, config.input_scale));
    resampled -= 1;
    const Vec3 start = pts[rng.below(n)];
    const Condition c{start, start + Vec3{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-10, 0)}};

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(std::span<std::size_t>(perm));
    std::vector<Vec3> shuffled(n);
    for (std::size_t i = 0; i < n; ++i) shuffled[i] = pts[perm[i]];

    const model::Prediction a = net.predict(PointCloud(pts), c);
    const model::Prediction b = net.predict(PointCloud(shuffled), c);
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 e = b.displacement[i] - a.displacement[perm[i]];
      diff += dot(e, e);
      ref += dot(a.displacement[perm[i]], a.displacement[perm[i]]);
    }
    worst_dx = std::max(worst_dx, std::sqrt(diff / ref));
    worst_df = std::max(worst_df, std::abs(b.force_change - a.force_change) / std::abs(a.force_change));
  }
  return {worst_dx <= kPermutationTol && worst_df <= kPermutationTol,
          fmt("%zu clouds, 26-256 points, random weights: worst relative dx error %.2e, dF error %.2e "
              "(<= %.0e); %zu draws rejected for tied distances",
              kPermutationClouds, worst_dx, worst_df, kPermutationTol, resampled)};
}

// ---- 4: physics ----------------------------------------------------------------------

bool same_bits(const std::vector<Vec3>& a, const std::vector<Vec3>& b) { return a == b; }

double mirror_asymmetry(const msm::MsmState& s, std::size_t n) {
  // Mirrors about the two grid diagonals through the centre:
  // (i, j) -> (j, i) swaps x and y; (i, j) -> (n-1-j, n-1-i) swaps and negates them.
  double worst = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = msm::grid_index(i, j, n);
      const Vec3 da = s.positions[a] - s.rest_positions[a];
      const std::size_t bt = msm::grid_index(j, i, n);
      const Vec3 dbt = s.positions[bt] - s.rest_positions[bt];
      const std::size_t ba = msm::grid_index(n - 1 - j, n - 1 - i, n);
      const Vec3 dba = s.positions[ba] - s.rest_positions[ba];
      worst = std::max({worst, norm(da - Vec3{dbt.y, dbt.x, dbt.z}), norm(da - Vec3{-dba.y, -dba.x, dba.z})});
    }
  }
  return worst;
}

struct Audit {
  std::size_t states = 0;
  std::size_t violations = 0;
  double max_velocity = 0.0;
  double max_force = 0.0;
};

Audit audit_residuals(const DatasetFile& d) {
  Audit a;
  for (const msm::IndentationRun& run : d.runs) {
    for (std::size_t t = 1; t < run.residuals.size(); ++t) {
      const msm::Residual& r = run.residuals[t];
      a.states += 1;
      a.violations += !(r.max_velocity < d.msm.stability_v && r.max_force < d.msm.stability_f);
      a.max_velocity = std::max(a.max_velocity, r.max_velocity);
      a.max_force = std::max(a.max_force, r.max_force);
    }
  }
  return a;
}

Outcome physics(Workspace& ws) {
  std::vector<std::string> parts;
  bool ok = true;

  // (a) no load, no motion.
  {
    msm::MsmConfig c;
    c.f_max = 0.0;
    const msm::MsmState rest = msm::build_surface(c);
    const std::size_t centre = msm::grid_index(c.grid_n / 2, c.grid_n / 2, c.grid_n);
    const auto states = msm::indent(rest, {centre, {0.0, 0.0, -1.0}, msm::force_schedule(c)}, c);
    bool exact = true;
    for (const msm::StaticState& s : states) exact = exact && same_bits(s.state.positions, rest.positions);
    msm::MsmState stepped = rest;
    for (int i = 0; i < 1000; ++i) msm::step_in_place(stepped, c);
    exact = exact && same_bits(stepped.positions, rest.positions) && same_bits(stepped.velocities, rest.velocities);
    ok = ok && exact;
    parts.push_back(fmt("(a) F_max 0 ramp and 1000 free steps %s", exact ? "bit-identical to rest" : "MOVED"));
  }

  // (b) centre indentation along the normal on an odd grid, so the centre is a mass.
  {
    msm::MsmConfig c;
    c.grid_n = 33;
    const msm::MsmState rest = msm::build_surface(c);
    const std::size_t centre = msm::grid_index(16, 16, 33);
    const auto states = msm::indent(rest, {centre, {0.0, 0.0, -1.0}, msm::force_schedule(c)}, c);
    double worst = 0.0;
    for (const msm::StaticState& s : states) worst = std::max(worst, mirror_asymmetry(s.state, 33));
    const double depth = -(states.back().state.positions[centre].z - rest.positions[centre].z);
    ok = ok && worst < kSymmetryTol;
    parts.push_back(fmt("(b) grid 33 centre ramp to %.1f mm: mirror asymmetry %.2e m (< 1e-6)", depth * 1e3, worst));
  }

  // (c) every stored static state of both datasets.
  {
    for (const auto& [name, file] : {std::pair<const char*, fs::path>{"desk", ws.desk_dataset()},
                                     std::pair<const char*, fs::path>{"default", ws.default_dataset()}}) {
      const Audit a = audit_residuals(ws.loaded(file));
      ok = ok && a.violations == 0 && a.states > 0;
      parts.push_back(fmt("(c) %s: %zu/%zu states with v < 0.02 m/s and F < 0.02 N (max %.7g m/s, %.7g N)", name,
                          a.states - a.violations, a.states, a.max_velocity, a.max_force));
    }
  }

  // (d) one mass on its anchor spring, settled to tight thresholds.
  {
    msm::MsmConfig c;
    c.stability_v = 1e-9;
    c.stability_f = 1e-8;
    msm::MsmState s;
    s.positions = {{0.0, 0.0, 0.0}};
    s.rest_positions = s.positions;
    s.velocities = {{0.0, 0.0, 0.0}};
    const double force = 3.0;
    s.external_force = {{0.0, 0.0, -force}};
    msm::refresh_forces(s, c);
    const auto [settled, steps] = msm::run_to_stability(s, c);
    const double error = std::abs(-settled.positions[0].z - force / c.k_fixed);
    ok = ok && error < kSingleMassTol;
    parts.push_back(fmt("(d) single mass: |depth - F/k_fixed| %.2e m after %zu steps (< 1e-6)", error, steps));
  }

  std::string detail;
  for (const std::string& p : parts) detail += (detail.empty() ? "" : "; ") + p;
  return {ok, detail};
}

// ---- 5: force schedule -----------------------------------------------------------------

Outcome schedule(Workspace& ws) {
  const std::vector<double> forces = msm::force_schedule(msm::MsmConfig{});
  bool exact = forces.size() == 15;
  for (std::size_t t = 0; exact && t < forces.size(); ++t) exact = forces[t] == 0.5 * static_cast<double>(t + 1);

  const DatasetFile& d = ws.loaded(ws.default_dataset());
  const train::DatasetModes modes = train::build_modes(d.runs, d.msm, Rng(d.seed), 15);
  std::size_t single_bad = 0, multi_bad = 0;
  double lo = 1e9, hi = -1e9;
  for (const Sample& s : modes.single_step) single_bad += s.target_force_change != 0.5;
  for (const Sample& s : modes.multi_step) {
    lo = std::min(lo, s.target_force_change);
    hi = std::max(hi, s.target_force_change);
    multi_bad += !(s.target_force_change >= 1.0 && s.target_force_change <= 7.5);
  }
  return {exact && single_bad == 0 && multi_bad == 0 && !modes.single_step.empty() && !modes.multi_step.empty(),
          fmt("schedule %s [0.5, 1.0, ..., 7.5] N; default dataset: %zu single-step samples, %zu with dF != 0.5 N; "
              "%zu multi-step samples, dF in [%.1f, %.1f] N, %zu outside [1.0, 7.5]",
              exact ? "equals" : "DIFFERS FROM", modes.single_step.size(), single_bad, modes.multi_step.size(), lo,
              hi, multi_bad)};
}

// ---- 6: dataset scale -------------------------------------------------------------------

Outcome scale(Workspace& ws) {
  const auto& full = ws.default_report();
  const auto& desk = ws.desk_report();
  const std::size_t full_states = msm::static_state_count(ws.loaded(ws.default_dataset()).runs);
  const std::size_t desk_states = msm::static_state_count(ws.loaded(ws.desk_dataset()).runs);
  bool ok = full_states == kDefaultStates && desk_states == kDeskStates;
  std::string timing;
  if (full && desk) {
    ok = ok && full->wall_seconds <= kDefaultSimulateBudget && desk->wall_seconds <= kDeskSimulateBudget;
    timing = fmt("default %.1f s (<= %.0f s), desk %.1f s (<= %.0f s)", full->wall_seconds, kDefaultSimulateBudget,
                 desk->wall_seconds, kDeskSimulateBudget);
  } else {
    ok = false;
    timing = "timings unavailable (datasets reused)";
  }
  return {ok, fmt("default %zu states (= %zu), desk %zu states (= %zu); ", full_states, kDefaultStates, desk_states,
                  kDeskStates) +
                  timing};
}

// ---- 7: overfit --------------------------------------------------------------------------

Outcome overfit(Workspace& ws) {
  const RunConfig config = ws.desk_config();
  const PreparedData data = prepare(ws.loaded(ws.desk_dataset()), config);
  std::vector<Sample> samples;
  Rng pick(7);
  std::vector<std::size_t> order(data.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  pick.shuffle(std::span<std::size_t>(order));
  for (std::size_t i = 0; i < kOverfitSamples; ++i) samples.push_back(data.train[order[i]]);

  train::TrainConfig tc = config.train;
  tc.epochs = kOverfitEpochs;
  tc.batch_size = 1;
  Rng init_rng = Rng(tc.seed).child(0);
  const model::Cgnn init(config.model, init_rng);
  ws.note("overfit");
  const auto start = Clock::now();
  const train::TrainResult r = train::fit(samples, samples, tc, init);
  const double seconds = seconds_since(start);
  const train::Metrics m = train::evaluate(samples, r.best);
  return {m.mean_ld.mean < kOverfitLd && m.force_abs_error.mean < kOverfitForce && seconds <= kOverfitBudget,
          fmt("%zu samples, %zu epochs, batch 1, lr %g: train mean L_d %.4f mm (< %.1f), force abs error %.4f N "
              "(< %.2f), %.0f s (<= %.0f)",
              kOverfitSamples, kOverfitEpochs, tc.lr, m.mean_ld.mean, kOverfitLd, m.force_abs_error.mean,
              kOverfitForce, seconds, kOverfitBudget)};
}

// ---- 8: desk-scale learning ---------------------------------------------------------------

Outcome desk_learning(Workspace& ws) {
  const fs::path model = ws.desk_model();
  const train::Metrics m = ws.test_metrics(model);
  const RunConfig c = ws.desk_config();
  EvalOptions identity;
  identity.identity = true;
  const train::Metrics base = cmd_eval(c, ws.desk_dataset(), std::nullopt, identity, {}, ws.log()).metrics;
  return {m.mean_ld.mean <= kDeskLd && m.force_abs_error.mean <= kDeskForce,
          fmt("%zu epochs, %zu test samples: mean L_d %.4f +- %.4f mm (<= %.1f), force abs error %.4f +- %.4f N "
              "(<= %.2f); identity baseline %.4f mm, %.4f N",
              c.train.epochs, m.samples, m.mean_ld.mean, m.mean_ld.std, kDeskLd, m.force_abs_error.mean,
              m.force_abs_error.std, kDeskForce, base.mean_ld.mean, base.force_abs_error.mean)};
}

// ---- 9: transfer learning --------------------------------------------------------------------

Outcome transfer(Workspace& ws) {
  RunConfig target;
  apply_preset(target, "target");
  target.data.seed = 1;
  const fs::path data = ws.path("target.ds");
  if (!ws.reusable(data)) {
    ws.note("simulate target");
    cmd_simulate(target, data, ws.log());
  }
  const fs::path source = ws.desk_model();
  const model::Cgnn pretrained = read_model(source).net;

  std::size_t wins = 0, beat_source = 0;
  std::string per_seed;
  for (std::size_t seed = 0; seed < kTransferSeeds; ++seed) {
    RunConfig c = target;
    c.split.max_train_locations = kTransferLocations;
    c.split.seed = seed;
    c.train.seed = seed;
    c.train.epochs = kTransferEpochs;
    ws.note(fmt("transfer seed %zu", seed));
    const TrainReport tuned = cmd_finetune(c, data, source, ws.path(fmt("tl_%zu.ckpt", seed)), {}, ws.log());
    const TrainReport scratch = cmd_train(c, data, ws.path(fmt("scratch_%zu.ckpt", seed)), {}, ws.log());
    const double a = train::evaluate(tuned.data.test, tuned.result.best).mean_ld.mean;
    const double b = train::evaluate(scratch.data.test, scratch.result.best).mean_ld.mean;
    const double untuned = train::evaluate(tuned.data.test, pretrained).mean_ld.mean;
    wins += a < b;
    beat_source += a < untuned;
    per_seed += fmt("%s%.3f vs %.3f", per_seed.empty() ? "" : ", ", a, b);
  }
  return {wins >= kTransferWins,
          fmt("%zu target locations, %zu epochs: finetuned beats from-scratch in %zu/%zu seeds (>= %zu); "
              "test mean L_d mm (finetuned vs scratch): %s; finetuned beats the unfinetuned source in %zu/%zu",
              kTransferLocations, kTransferEpochs, wins, kTransferSeeds, kTransferWins, per_seed.c_str(), beat_source,
              kTransferSeeds)};
}

// ---- 10: augmentation ---------------------------------------------------------------------------

Outcome augmentation(Workspace& ws) {
  const double plain = ws.test_metrics(ws.desk_model()).mean_ld.mean;
  const double aug = ws.test_metrics(ws.augmented_model()).mean_ld.mean;
  const double ratio = aug / plain;
  return {ratio <= kAugmentRatio,
          fmt("test mean L_d on full clouds: %.0f%% subsampled %.4f mm vs unaugmented %.4f mm, ratio %.3f (<= %.2f)",
              kAugmentFraction * 100, aug, plain, ratio, kAugmentRatio)};
}

// ---- 11: timing -----------------------------------------------------------------------------------

Outcome timing(Workspace& ws) {
  BenchOptions options;
  options.repetitions = kBenchRepetitions;
  const BenchReport r = cmd_bench(RunConfig{}, std::nullopt, options, ws.log());
  return {r.ratio > 1.0 && r.predict_small.mean < r.predict.mean,
          fmt("force step %.2f ms vs predict %.2f ms at %zu points (ratio %.3f, needs > 1); predict %.3f ms at %zu "
              "points (needs < %.2f ms)",
              r.simulate.mean * 1e3, r.predict.mean * 1e3, r.points, r.ratio, r.predict_small.mean * 1e3,
              r.small_points, r.predict.mean * 1e3)};
}

// ---- 12: determinism -------------------------------------------------------------------------------

bool same_history(const std::vector<train::EpochRecord>& a, const std::vector<train::EpochRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].train_loss != b[i].train_loss || a[i].train_mean_ld != b[i].train_mean_ld ||
        a[i].train_force_abs != b[i].train_force_abs || a[i].val_loss != b[i].val_loss) {
      return false;
    }
  }
  return true;
}

Outcome determinism(Workspace& ws) {
  RunConfig c = ws.desk_config();
  c.data.threads = 1;
  const fs::path a = ws.path("det_a.ds"), b = ws.path("det_b.ds");
  ws.note("determinism");
  cmd_simulate(c, a, ws.log());
  c.data.threads = 2;
  cmd_simulate(c, b, ws.log());
  const bool data_same = read_file(a) == read_file(b);

  c.train.epochs = 2;
  c.split.max_train_locations = 4;
  const fs::path ma = ws.path("det_a.ckpt"), mb = ws.path("det_b.ckpt");
  const TrainReport ta = cmd_train(c, a, ma, {}, ws.log());
  const TrainReport tb = cmd_train(c, b, mb, {}, ws.log());
  const bool model_same = read_file(ma) == read_file(mb) &&
                          read_file(manifest_path(ma)) == read_file(manifest_path(mb)) &&
                          same_history(ta.result.history, tb.result.history);

  EvalOptions all;
  all.part = EvalPart::kAll;
  const fs::path ea = ws.path("det_a.jsonl"), eb = ws.path("det_b.jsonl");
  cmd_eval(c, a, ma, all, ea, ws.log());
  cmd_eval(c, b, mb, all, eb, ws.log());
  const bool metrics_same = read_file(ea) == read_file(eb);
  return {data_same && model_same && metrics_same,
          fmt("desk simulate with 1 and 2 workers: dataset files %s; two trainings: checkpoints and losses %s; "
              "two evaluations: metric records %s",
              data_same ? "byte-identical" : "DIFFER", model_same ? "identical" : "DIFFER",
              metrics_same ? "identical" : "DIFFER")};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)(Workspace&);
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "gradient correctness", gradients},
      {2, "kNN oracle equivalence", knn_oracle},
      {3, "permutation property", permutation},
      {4, "physics suite", physics},
      {5, "force schedule", schedule},
      {6, "dataset scale", scale},
      {7, "overfit check", overfit},
      {8, "desk-scale learning", desk_learning},
      {9, "transfer-learning trend", transfer},
      {10, "augmentation consistency", augmentation},
      {11, "timing direction", timing},
      {12, "determinism", determinism},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Acceptance criteria"};
  std::vector<int> selected;
  std::string work = "acceptance_work";
  bool reuse = false;
  app.add_option("criteria", selected, "Criterion numbers to run (default: all)");
  app.add_option("--work", work, "Directory for datasets, checkpoints and logs");
  app.add_flag("--reuse", reuse, "Reuse artefacts left by an earlier run");
  CLI11_PARSE(app, argc, argv);

  Workspace ws(work, reuse);
  std::size_t run = 0, passed = 0;
  for (const Criterion& c : criteria()) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run(ws);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    run += 1;
    passed += o.pass;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << c.id << " " << c.name << ": " << o.detail
              << fmt(" [%.0f s]", seconds_since(start)) << std::endl;
  }
  std::cout << passed << "/" << run << " criteria passed" << std::endl;
  return passed == run ? 0 : 1;
}
