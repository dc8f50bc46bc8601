#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cgnn/core/rng.hpp"
#include "cgnn/core/types.hpp"
#include "cgnn/msm/simulator.hpp"

namespace cgnn::train {

struct DatasetModes {
  std::vector<Sample> single_step;  // (t -> t + 1), δF = F_max / n_t
  std::vector<Sample> multi_step;   // (t -> t'), t' >= t + 2

  // Training set: the union of both modes.
  std::vector<Sample> combined() const;
};

// Observed rows of a snapshot: every grid point, or the marker sub-grid plus
// the contact point appended last. Returns the cloud and the contact row.
struct ObservedCloud {
  std::vector<Vec3> points;
  std::size_t contact_index = 0;
};
ObservedCloud observe(const std::vector<Vec3>& snapshot_mm, std::size_t location,
                      const msm::MsmConfig& config);

// Sample mapping snapshot t_in of `run` to snapshot t_out.
Sample make_sample(const msm::IndentationRun& run, std::size_t t_in, std::size_t t_out,
                   const msm::MsmConfig& config);

// All adjacent pairs per run plus `multi_pairs_per_run` pairs drawn uniformly
// (with replacement) from {(t, t') : t' >= t + 2}. Per-run draws use
// rng.child(run ordinal).
DatasetModes build_modes(const std::vector<msm::IndentationRun>& runs, const msm::MsmConfig& config,
                         const Rng& rng, std::size_t multi_pairs_per_run = 15);

struct SplitSpec {
  std::vector<std::size_t> ratios{7, 2, 1};  // train : val : test
  std::uint64_t seed = 0;
  // 0 keeps every train location; otherwise the first n after shuffling.
  std::size_t max_train_locations = 0;
};

struct Split {
  std::vector<std::size_t> train_locations;
  std::vector<std::size_t> val_locations;
  std::vector<std::size_t> test_locations;
  std::vector<msm::IndentationRun> train;
  std::vector<msm::IndentationRun> val;
  std::vector<msm::IndentationRun> test;
};

// Location counts per split part: floor shares, remainder to the largest
// fractional parts (earlier parts win ties).
std::vector<std::size_t> split_counts(std::size_t locations, const std::vector<std::size_t>& ratios);

Split split_by_location(const std::vector<msm::IndentationRun>& runs, const SplitSpec& spec);

// Random subset of ceil(fraction * N) rows (contact row always kept, original
// order preserved); target rows follow the same indices.
Sample augment_subsample(const Sample& sample, double fraction, std::size_t min_points, Rng& rng);

struct DatasetStats {
  std::size_t samples = 0;
  double mean_point_displacement = 0.0;  // mm, mean over samples of per-sample mean |δx_n|
  double mean_contact_displacement = 0.0;
  double max_contact_displacement = 0.0;
  double min_force_change = 0.0;
  double max_force_change = 0.0;
};
DatasetStats dataset_stats(const std::vector<Sample>& samples);

}  // namespace cgnn::train
