#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "cgnn/core/rng.hpp"
#include "cgnn/core/types.hpp"

namespace cgnn::msm {

// Mass-spring surface parameters. Geometry in mm at the interface, physics
// in SI inside the simulator.
struct MsmConfig {
  double side_length_mm = 100.0;
  std::size_t grid_n = 32;
  double mass = 0.00016;     // kg per point
  double damping = 0.1;      // N s / m, viscous, per point
  double dt = 0.0001;        // s
  double k_between = 100.0;  // N / m
  double k_fixed = 21.0;     // N / m
  double f_max = 7.5;        // N
  std::size_t n_t = 15;
  std::size_t n_n = 1;
  std::size_t n_directions = 11;
  std::size_t n_locations = 100;
  double cone_half_angle_deg = 45.0;
  double stability_v = 0.02;  // m / s
  double stability_f = 0.02;  // N
  std::size_t max_steps_per_state = 2'000'000;
  // Observation model: 0 tracks every grid point; m > 0 tracks an m x m
  // marker sub-grid plus the contact point (appended last).
  std::size_t marker_grid = 0;

  void validate() const;
  std::size_t point_count() const { return grid_n * grid_n; }
  double spacing_m() const;
};

struct Spring {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  double rest_length = 0.0;  // m
  double stiffness = 0.0;    // N / m
};

// Full simulator state, SI units. `net_force_cache` always holds the net
// force for the current positions, velocities and external forces; every
// function returning an MsmState keeps it fresh.
struct MsmState {
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
  std::vector<Vec3> rest_positions;
  std::vector<Spring> springs;
  std::vector<Vec3> external_force;
  std::vector<Vec3> net_force_cache;

  std::size_t size() const { return positions.size(); }
};

struct IndentationPlan {
  std::size_t location_index = 0;
  Vec3 direction{0.0, 0.0, -1.0};
  std::vector<double> forces;  // F_1 .. F_{n_t}
};

struct StaticState {
  MsmState state;
  double applied_force = 0.0;  // N
  std::size_t steps = 0;
};

// Convergence residuals of a static state.
struct Residual {
  double max_velocity = 0.0;  // m / s
  double max_force = 0.0;     // N
};

// One (location, direction) ramp reduced to its observable snapshots.
struct IndentationRun {
  std::size_t location = 0;
  std::size_t direction_index = 0;
  Vec3 direction;
  std::vector<double> forces;                  // n_t + 1, forces[0] = 0
  std::vector<std::vector<Vec3>> positions_mm;  // n_t + 1 snapshots
  std::vector<Residual> residuals;             // n_t + 1

  friend bool operator==(const IndentationRun&, const IndentationRun&) = default;
};

inline bool operator==(const Residual& a, const Residual& b) {
  return a.max_velocity == b.max_velocity && a.max_force == b.max_force;
}

// Row-major grid index of (column i, row j).
inline std::size_t grid_index(std::size_t i, std::size_t j, std::size_t grid_n) {
  return j * grid_n + i;
}

MsmState build_surface(const MsmConfig& config);

// Total force on every mass: between-mass springs, fixed springs, damping and
// external load. Throws DivergenceError on non-finite positions.
std::vector<Vec3> net_forces(const MsmState& state, const MsmConfig& config);

// Recompute `net_force_cache` in place (after editing external forces).
void refresh_forces(MsmState& state, const MsmConfig& config);

// Semi-implicit Euler: v += F/m dt, then p += v dt.
MsmState step(MsmState state, const MsmConfig& config);
void step_in_place(MsmState& state, const MsmConfig& config);

Residual residual(const MsmState& state);

std::pair<MsmState, std::size_t> run_to_stability(MsmState state, const MsmConfig& config);

// F_t = t F_max / (n_t n_n), t = 1..n_t.
std::vector<double> force_schedule(const MsmConfig& config);

// Quasi-static ramp: element 0 is `rest` at zero load, element t carries
// F_t along the plan direction at the plan location.
std::vector<StaticState> indent(const MsmState& rest, const IndentationPlan& plan,
                                const MsmConfig& config);

// Indices eligible as indentation locations (interior, non-marker).
std::vector<std::size_t> candidate_locations(const MsmConfig& config);

// Tracked marker indices for `marker_grid > 0`, row-major.
std::vector<std::size_t> marker_indices(const MsmConfig& config);

std::vector<Vec3> to_mm(const std::vector<Vec3>& metres);

// Runs ordered by (location ordinal, direction index). `threads == 0` picks
// the CGNN_THREADS environment variable, falling back to hardware concurrency.
std::vector<IndentationRun> generate_dataset(const MsmConfig& config, const Rng& rng,
                                             std::size_t threads = 0);

// Worker count for `requested` (0: CGNN_THREADS, else hardware concurrency).
std::size_t resolve_threads(std::size_t requested);

std::size_t static_state_count(const std::vector<IndentationRun>& runs);

}  // namespace cgnn::msm
