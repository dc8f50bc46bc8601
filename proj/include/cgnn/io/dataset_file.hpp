#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cgnn/msm/simulator.hpp"

namespace cgnn::io {

// Simulated indentation runs plus the configuration that produced them.
//
// Layout: a text header, then a little-endian binary payload.
//
//   cgnn-dataset <version> <header bytes>\n
//   [dataset]  seed, runs, states, points, msm_hash, payload_fnv1a64
//   [msm]      canonical simulator configuration
//   payload, per run:
//     u64 location, u64 direction_index, f64 direction[3]
//     per state: f64 force, f64 max_velocity, f64 max_force, f64 xyz[points][3] (mm)
struct DatasetFile {
  msm::MsmConfig msm;
  std::uint64_t seed = 0;
  std::vector<msm::IndentationRun> runs;

  // Hash of the simulator configuration (the data domain).
  std::string domain_hash() const;
};

inline constexpr int kDatasetVersion = 1;

std::string encode_dataset(const DatasetFile& dataset);
DatasetFile decode_dataset(const std::string& bytes, const std::string& source);

void write_dataset(const std::filesystem::path& path, const DatasetFile& dataset);
DatasetFile read_dataset(const std::filesystem::path& path);

}  // namespace cgnn::io
