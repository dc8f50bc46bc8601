#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cgnn/model/cgnn.hpp"
#include "cgnn/msm/simulator.hpp"
#include "cgnn/train/dataset.hpp"
#include "cgnn/train/train.hpp"

namespace cgnn::io {

struct DataConfig {
  std::uint64_t seed = 0;          // simulation draws (locations, directions)
  std::size_t multi_pairs = 15;    // multi-step pairs per run
  std::size_t threads = 0;         // 0: CGNN_THREADS or hardware concurrency
};

// Everything a command needs, as one document:
//
//   [msm]      simulator and observation model
//   [data]     generation seed, multi-step pairs, threads
//   [model]    network shape and unit scales
//   [train]    optimisation
//   [split]    location-level split
//
// Unknown keys are errors, so typos never silently fall back to defaults.
struct RunConfig {
  msm::MsmConfig msm;
  DataConfig data;
  model::ModelConfig model;
  train::TrainConfig train;
  train::SplitSpec split;

  void validate() const;
  // Assign one "section.key" from text; throws ConfigError on unknown keys or
  // unparsable values.
  void set(const std::string& key, const std::string& value);
  // Canonical document; parse(to_text()) reproduces every field exactly.
  std::string to_text() const;

  static RunConfig parse(const std::string& text, const std::string& source);
  static std::vector<std::string> keys();
};

// Named override bundles applied on top of the defaults:
//   desk    grid 16, 20 locations, 3 directions, lr 1e-3
//   target  stiffer, marker-observed second domain, lr 1e-3 (see README)
void apply_preset(RunConfig& config, const std::string& name);
std::vector<std::string> preset_names();

// Canonical [msm] text and its hash; datasets and checkpoints carry the hash
// so mismatched domains are detected.
std::string msm_text(const msm::MsmConfig& config);
std::string msm_hash(const msm::MsmConfig& config);
msm::MsmConfig parse_msm_text(const std::string& text, const std::string& source);

}  // namespace cgnn::io
