#include "cgnn/msm/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "cgnn/core/error.hpp"

namespace cgnn::msm {

namespace {

constexpr double kMmPerM = 1000.0;

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ConfigError(std::string("MsmConfig: ") + name + " must be positive and finite");
  }
}

}  // namespace

void MsmConfig::validate() const {
  require_positive(side_length_mm, "side_length_mm");
  require_positive(mass, "mass");
  require_positive(damping, "damping");
  require_positive(dt, "dt");
  require_positive(k_between, "k_between");
  require_positive(k_fixed, "k_fixed");
  require_positive(stability_v, "stability_v");
  require_positive(stability_f, "stability_f");
  if (!(f_max >= 0.0) || !std::isfinite(f_max)) throw ConfigError("MsmConfig: f_max must be >= 0");
  if (grid_n < 2) throw ConfigError("MsmConfig: grid_n must be >= 2");
  if (n_t < 1) throw ConfigError("MsmConfig: n_t must be >= 1");
  if (n_n < 1) throw ConfigError("MsmConfig: n_n must be >= 1");
  if (n_n != 1) throw ConfigError("MsmConfig: only n_n = 1 (single affected mass) is supported");
  if (n_directions < 1) throw ConfigError("MsmConfig: n_directions must be >= 1");
  if (n_locations < 1) throw ConfigError("MsmConfig: n_locations must be >= 1");
  if (max_steps_per_state < 1) throw ConfigError("MsmConfig: max_steps_per_state must be >= 1");
  if (!(cone_half_angle_deg >= 0.0 && cone_half_angle_deg <= 90.0)) {
    throw ConfigError("MsmConfig: cone_half_angle_deg must lie in [0, 90]");
  }
  if (marker_grid == 1 || marker_grid > grid_n) {
    throw ConfigError("MsmConfig: marker_grid must be 0 or in [2, grid_n]");
  }
}

double MsmConfig::spacing_m() const {
  return side_length_mm / kMmPerM / static_cast<double>(grid_n - 1);
}

MsmState build_surface(const MsmConfig& config) {
  config.validate();
  const std::size_t n = config.grid_n;
  const double h = config.spacing_m();

  MsmState state;
  state.positions.resize(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      state.positions[grid_index(i, j, n)] = {static_cast<double>(i) * h, static_cast<double>(j) * h,
                                              0.0};
    }
  }
  state.rest_positions = state.positions;
  state.velocities.assign(n * n, Vec3{});
  state.external_force.assign(n * n, Vec3{});

  auto add = [&](std::size_t a, std::size_t b) {
    state.springs.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                             norm(state.positions[a] - state.positions[b]), config.k_between});
  };
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (i + 1 < n) add(grid_index(i, j, n), grid_index(i + 1, j, n));
      if (j + 1 < n) add(grid_index(i, j, n), grid_index(i, j + 1, n));
    }
  }
  // One diagonal per cell, all parallel: every interior mass has six
  // neighbours, and the sheet is mirror-symmetric about both grid diagonals.
  for (std::size_t j = 0; j + 1 < n; ++j) {
    for (std::size_t i = 0; i + 1 < n; ++i) add(grid_index(i, j, n), grid_index(i + 1, j + 1, n));
  }
  refresh_forces(state, config);
  return state;
}

std::vector<Vec3> net_forces(const MsmState& state, const MsmConfig& config) {
  const std::size_t n = state.size();
  std::vector<Vec3> f(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_finite(state.positions[i]) || !is_finite(state.velocities[i])) {
      throw DivergenceError("msm: non-finite state at mass " + std::to_string(i) +
                            " (simulation blow-up)");
    }
    f[i] = state.external_force[i] - config.k_fixed * (state.positions[i] - state.rest_positions[i]) -
           config.damping * state.velocities[i];
  }
  for (const Spring& s : state.springs) {
    const Vec3 d = state.positions[s.i] - state.positions[s.j];
    const double len = norm(d);
    if (len == 0.0) continue;  // coincident masses: direction undefined
    const Vec3 fi = d * (-s.stiffness * (len - s.rest_length) / len);
    f[s.i] += fi;
    f[s.j] -= fi;
  }
  return f;
}

void refresh_forces(MsmState& state, const MsmConfig& config) {
  state.net_force_cache = net_forces(state, config);
}

void step_in_place(MsmState& state, const MsmConfig& config) {
  const double scale = config.dt / config.mass;
  for (std::size_t i = 0; i < state.size(); ++i) {
    state.velocities[i] += state.net_force_cache[i] * scale;
    state.positions[i] += state.velocities[i] * config.dt;
  }
  try {
    refresh_forces(state, config);
  } catch (const DivergenceError&) {
    for (std::size_t i = 0; i < state.size(); ++i) {
      if (!is_finite(state.positions[i]) || !is_finite(state.velocities[i])) {
        throw DivergenceError("msm step: non-finite result at mass " + std::to_string(i));
      }
    }
    throw;
  }
}

MsmState step(MsmState state, const MsmConfig& config) {
  step_in_place(state, config);
  return state;
}

Residual residual(const MsmState& state) {
  Residual r;
  for (std::size_t i = 0; i < state.size(); ++i) {
    r.max_velocity = std::max(r.max_velocity, norm(state.velocities[i]));
    r.max_force = std::max(r.max_force, norm(state.net_force_cache[i]));
  }
  return r;
}

std::pair<MsmState, std::size_t> run_to_stability(MsmState state, const MsmConfig& config) {
  std::size_t steps = 0;
  for (;;) {
    const Residual r = residual(state);
    if (r.max_velocity < config.stability_v && r.max_force < config.stability_f) break;
    if (steps == config.max_steps_per_state) {
      throw ConvergenceError("msm: no static state after " + std::to_string(steps) +
                                 " steps (max |v| = " + std::to_string(r.max_velocity) +
                                 " m/s, max |F| = " + std::to_string(r.max_force) + " N)",
                             r.max_velocity, r.max_force);
    }
    step_in_place(state, config);
    ++steps;
  }
  return {std::move(state), steps};
}

std::vector<double> force_schedule(const MsmConfig& config) {
  std::vector<double> forces(config.n_t);
  const double denom = static_cast<double>(config.n_t * config.n_n);
  for (std::size_t t = 1; t <= config.n_t; ++t) {
    forces[t - 1] = static_cast<double>(t) * config.f_max / denom;
  }
  return forces;
}

std::vector<StaticState> indent(const MsmState& rest, const IndentationPlan& plan,
                                const MsmConfig& config) {
  if (plan.location_index >= rest.size()) {
    throw ConfigError("indent: location " + std::to_string(plan.location_index) +
                      " out of range for " + std::to_string(rest.size()) + " masses");
  }
  std::vector<StaticState> out;
  out.reserve(plan.forces.size() + 1);
  MsmState current = rest;
  std::fill(current.external_force.begin(), current.external_force.end(), Vec3{});
  refresh_forces(current, config);
  out.push_back({current, 0.0, 0});
  for (double f : plan.forces) {
    current.external_force[plan.location_index] = plan.direction * f;
    refresh_forces(current, config);
    auto [settled, steps] = run_to_stability(std::move(current), config);
    current = std::move(settled);
    out.push_back({current, f, steps});
  }
  return out;
}

std::vector<std::size_t> marker_indices(const MsmConfig& config) {
  std::vector<std::size_t> out;
  const std::size_t m = config.marker_grid;
  if (m == 0) return out;
  const std::size_t n = config.grid_n;
  std::vector<std::size_t> axis(m);
  for (std::size_t a = 0; a < m; ++a) {
    axis[a] = static_cast<std::size_t>(
        std::lround(static_cast<double>(a) * static_cast<double>(n - 1) / static_cast<double>(m - 1)));
  }
  for (std::size_t j : axis) {
    for (std::size_t i : axis) out.push_back(grid_index(i, j, n));
  }
  return out;
}

std::vector<std::size_t> candidate_locations(const MsmConfig& config) {
  const std::size_t n = config.grid_n;
  const std::vector<std::size_t> markers = marker_indices(config);
  std::vector<std::size_t> out;
  for (std::size_t j = 1; j + 1 < n; ++j) {
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const std::size_t idx = grid_index(i, j, n);
      if (std::find(markers.begin(), markers.end(), idx) == markers.end()) out.push_back(idx);
    }
  }
  return out;
}

std::vector<Vec3> to_mm(const std::vector<Vec3>& metres) {
  std::vector<Vec3> out(metres.size());
  for (std::size_t i = 0; i < metres.size(); ++i) out[i] = metres[i] * kMmPerM;
  return out;
}

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("CGNN_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

namespace {

IndentationRun simulate_run(const MsmState& rest, const MsmConfig& config, std::size_t location,
                            std::size_t direction_index, const Vec3& direction) {
  IndentationPlan plan{location, direction, force_schedule(config)};
  std::vector<StaticState> states = indent(rest, plan, config);
  IndentationRun run;
  run.location = location;
  run.direction_index = direction_index;
  run.direction = direction;
  for (const StaticState& s : states) {
    run.forces.push_back(s.applied_force);
    run.positions_mm.push_back(to_mm(s.state.positions));
    run.residuals.push_back(residual(s.state));
  }
  return run;
}

}  // namespace

std::vector<IndentationRun> generate_dataset(const MsmConfig& config, const Rng& rng,
                                             std::size_t threads) {
  config.validate();
  const MsmState rest = build_surface(config);

  std::vector<std::size_t> candidates = candidate_locations(config);
  if (candidates.size() < config.n_locations) {
    throw ConfigError("generate_dataset: " + std::to_string(config.n_locations) +
                      " locations requested but only " + std::to_string(candidates.size()) +
                      " interior candidates exist");
  }
  Rng location_rng = rng.child(0);
  location_rng.shuffle(std::span<std::size_t>(candidates));
  std::vector<std::size_t> locations(candidates.begin(),
                                     candidates.begin() + static_cast<std::ptrdiff_t>(config.n_locations));
  std::sort(locations.begin(), locations.end());

  const Vec3 normal{0.0, 0.0, -1.0};
  struct Job {
    std::size_t location;
    std::size_t direction_index;
    Vec3 direction;
  };
  std::vector<Job> jobs;
  for (std::size_t location : locations) {
    Rng direction_rng = rng.child(1 + location);
    for (std::size_t d = 0; d < config.n_directions; ++d) {
      const Vec3 dir = d == 0 ? normal
                              : sample_unit_direction_in_cone(direction_rng, normal,
                                                              config.cone_half_angle_deg);
      jobs.push_back({location, d, dir});
    }
  }

  std::vector<IndentationRun> runs(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= jobs.size()) return;
      try {
        runs[k] = simulate_run(rest, config, jobs[k].location, jobs[k].direction_index,
                               jobs[k].direction);
      } catch (const std::exception& e) {
        std::lock_guard lock(failure_mutex);
        if (!failure) {
          const std::string where = "run (location " + std::to_string(jobs[k].location) +
                                    ", direction " + std::to_string(jobs[k].direction_index) +
                                    "): ";
          try {
            throw;
          } catch (const ConvergenceError& ce) {
            failure = std::make_exception_ptr(
                ConvergenceError(where + ce.what(), ce.max_velocity(), ce.max_force()));
          } catch (const DivergenceError& de) {
            failure = std::make_exception_ptr(DivergenceError(where + de.what()));
          } catch (...) {
            failure = std::current_exception();
          }
        }
        next.store(jobs.size());
      }
    }
  };
  const std::size_t n_threads = std::min(resolve_threads(threads), jobs.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return runs;
}

std::size_t static_state_count(const std::vector<IndentationRun>& runs) {
  std::size_t count = 0;
  for (const IndentationRun& r : runs) count += r.positions_mm.size() - 1;
  return count;
}

}  // namespace cgnn::msm
