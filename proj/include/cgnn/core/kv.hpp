#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cgnn::kv {

// Flat "key = value" documents with optional [section] headers, '#'
// comments and optionally double-quoted string values. Keys inside a section
// are returned as "section.key". Later duplicates are an error.
std::map<std::string, std::string> parse(const std::string& text, const std::string& source);

double to_double(const std::string& key, const std::string& value);
std::size_t to_size(const std::string& key, const std::string& value);
std::uint64_t to_u64(const std::string& key, const std::string& value);
bool to_bool(const std::string& key, const std::string& value);
std::vector<std::size_t> to_size_list(const std::string& key, const std::string& value);
std::vector<double> to_double_list(const std::string& key, const std::string& value);

// Shortest text that parses back to the same double.
std::string format_double(double v);
std::string format_list(const std::vector<std::size_t>& values);

}  // namespace cgnn::kv
