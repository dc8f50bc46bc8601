#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace cgnn {

// Writes `bytes` to a sibling temporary file, then renames it over `path`,
// so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

// FNV-1a, 64 bit.
std::uint64_t fnv1a64(std::string_view bytes);

std::string hex64(std::uint64_t value);

}  // namespace cgnn
