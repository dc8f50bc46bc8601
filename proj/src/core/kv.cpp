#include "cgnn/core/kv.hpp"

#include <charconv>
#include <cstdint>
#include <sstream>

#include "cgnn/core/error.hpp"

namespace cgnn::kv {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* what) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + what);
}

std::vector<std::string> split_list(const std::string& value) {
  std::string v = trim(value);
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
  std::vector<std::string> parts;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

}  // namespace

std::map<std::string, std::string> parse(const std::string& text, const std::string& source) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos && line.find('"') == std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(source + ":" + std::to_string(lineno) + ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    if (!out.emplace(key, value).second) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return out;
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) bad(key, value, "a number");
    return v;
  } catch (const std::logic_error&) {
    bad(key, value, "a number");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad(key, value, "an unsigned integer");
  return v;
}

std::size_t to_size(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(to_u64(key, value));
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad(key, value, "a boolean");
}

std::vector<std::size_t> to_size_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  for (const std::string& item : split_list(value)) out.push_back(to_size(key, item));
  return out;
}

std::vector<double> to_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const std::string& item : split_list(value)) out.push_back(to_double(key, item));
  return out;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string format_list(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(values[i]);
  }
  return out;
}

}  // namespace cgnn::kv
