#include "cgnn/io/dataset_file.hpp"

#include <sstream>

#include "cgnn/core/binary.hpp"
#include "cgnn/core/error.hpp"
#include "cgnn/core/file_util.hpp"
#include "cgnn/core/kv.hpp"
#include "cgnn/io/run_config.hpp"

namespace cgnn::io {

namespace {

constexpr const char* kMagic = "cgnn-dataset";

std::size_t states_per_run(const std::vector<msm::IndentationRun>& runs) {
  return runs.empty() ? 0 : runs.front().positions_mm.size();
}

std::size_t points_per_state(const std::vector<msm::IndentationRun>& runs) {
  return runs.empty() || runs.front().positions_mm.empty() ? 0 : runs.front().positions_mm.front().size();
}

}  // namespace

std::string DatasetFile::domain_hash() const { return msm_hash(msm); }

std::string encode_dataset(const DatasetFile& dataset) {
  const std::size_t states = states_per_run(dataset.runs);
  const std::size_t points = points_per_state(dataset.runs);
  std::string payload;
  payload.reserve(dataset.runs.size() * (40 + states * (24 + points * 24)));
  for (const msm::IndentationRun& run : dataset.runs) {
    if (run.positions_mm.size() != states || run.forces.size() != states ||
        run.residuals.size() != states) {
      throw ShapeError("encode_dataset: runs must share one state count");
    }
    binary::put_u64(payload, run.location);
    binary::put_u64(payload, run.direction_index);
    binary::put_f64(payload, run.direction.x);
    binary::put_f64(payload, run.direction.y);
    binary::put_f64(payload, run.direction.z);
    for (std::size_t t = 0; t < states; ++t) {
      if (run.positions_mm[t].size() != points) {
        throw ShapeError("encode_dataset: snapshots must share one point count");
      }
      binary::put_f64(payload, run.forces[t]);
      binary::put_f64(payload, run.residuals[t].max_velocity);
      binary::put_f64(payload, run.residuals[t].max_force);
      for (const Vec3& p : run.positions_mm[t]) {
        binary::put_f64(payload, p.x);
        binary::put_f64(payload, p.y);
        binary::put_f64(payload, p.z);
      }
    }
  }

  std::string header = "[dataset]\n";
  header += "seed = " + std::to_string(dataset.seed) + "\n";
  header += "runs = " + std::to_string(dataset.runs.size()) + "\n";
  header += "states = " + std::to_string(states) + "\n";
  header += "points = " + std::to_string(points) + "\n";
  header += "msm_hash = \"" + dataset.domain_hash() + "\"\n";
  header += "payload_fnv1a64 = \"" + hex64(fnv1a64(payload)) + "\"\n\n";
  header += msm_text(dataset.msm);

  std::string out = std::string(kMagic) + " " + std::to_string(kDatasetVersion) + " " +
                    std::to_string(header.size()) + "\n";
  out += header;
  out += payload;
  return out;
}

DatasetFile decode_dataset(const std::string& bytes, const std::string& source) {
  const auto newline = bytes.find('\n');
  if (newline == std::string::npos || newline > 256) throw IoError(source + ": not a dataset file");
  std::istringstream first(bytes.substr(0, newline));
  std::string magic;
  int version = 0;
  std::size_t header_size = 0;
  if (!(first >> magic >> version >> header_size) || magic != kMagic) {
    throw IoError(source + ": not a dataset file");
  }
  if (version != kDatasetVersion) {
    throw IoError(source + ": unsupported dataset version " + std::to_string(version));
  }
  if (header_size > bytes.size() - newline - 1) throw IoError(source + ": truncated header");
  const std::string header = bytes.substr(newline + 1, header_size);

  std::string dataset_part;
  std::string msm_part;
  {
    const auto split = header.find("[msm]");
    if (split == std::string::npos) throw IoError(source + ": header lacks [msm] section");
    dataset_part = header.substr(0, split);
    msm_part = header.substr(split);
  }
  const auto meta = kv::parse(dataset_part, source);
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = meta.find("dataset." + key);
    if (it == meta.end()) throw IoError(source + ": header lacks '" + key + "'");
    return it->second;
  };

  DatasetFile dataset;
  dataset.msm = parse_msm_text(msm_part, source);
  dataset.seed = kv::to_u64("seed", get("seed"));
  const std::size_t runs = kv::to_size("runs", get("runs"));
  const std::size_t states = kv::to_size("states", get("states"));
  const std::size_t points = kv::to_size("points", get("points"));
  if (get("msm_hash") != dataset.domain_hash()) {
    throw IoError(source + ": header hash does not match its simulator section");
  }

  const std::string_view payload = std::string_view(bytes).substr(newline + 1 + header_size);
  const std::size_t expected = runs * (40 + states * (24 + points * 24));
  if (payload.size() != expected) {
    throw IoError(source + ": payload holds " + std::to_string(payload.size()) + " bytes, expected " +
                  std::to_string(expected));
  }
  if (get("payload_fnv1a64") != hex64(fnv1a64(payload))) {
    throw IoError(source + ": payload checksum mismatch");
  }

  binary::Reader in(payload, source);
  dataset.runs.resize(runs);
  for (msm::IndentationRun& run : dataset.runs) {
    run.location = in.u64();
    run.direction_index = in.u64();
    run.direction.x = in.f64();
    run.direction.y = in.f64();
    run.direction.z = in.f64();
    run.forces.resize(states);
    run.residuals.resize(states);
    run.positions_mm.assign(states, std::vector<Vec3>(points));
    for (std::size_t t = 0; t < states; ++t) {
      run.forces[t] = in.f64();
      run.residuals[t].max_velocity = in.f64();
      run.residuals[t].max_force = in.f64();
      for (Vec3& p : run.positions_mm[t]) {
        p.x = in.f64();
        p.y = in.f64();
        p.z = in.f64();
      }
    }
  }
  return dataset;
}

void write_dataset(const std::filesystem::path& path, const DatasetFile& dataset) {
  write_file_atomic(path, encode_dataset(dataset));
}

DatasetFile read_dataset(const std::filesystem::path& path) {
  return decode_dataset(read_file(path), path.string());
}

}  // namespace cgnn::io
