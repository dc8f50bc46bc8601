#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cgnn::ad {

// One entry of a weight checkpoint. Values are stored as 32-bit floats
// regardless of the build's scalar type.
struct NamedArray {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<float> values;

  friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

// Layout (all integers little-endian):
//   "CGNNWTS\0"  u32 version  u32 count
//   per entry: u32 name_len, name bytes, u32 rank, u64 dims[rank],
//              f32 values[prod(dims)]
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const std::vector<NamedArray>& arrays);
std::vector<NamedArray> decode_checkpoint(const std::string& bytes, const std::string& source);

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path);

}  // namespace cgnn::ad
