#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "cgnn/core/error.hpp"

namespace cgnn::binary {

// Little-endian encoding of fixed-width scalars, independent of host order.

template <typename U>
void put_uint(std::string& out, U value) {
  for (std::size_t b = 0; b < sizeof(U); ++b) {
    out.push_back(static_cast<char>((value >> (8 * b)) & 0xff));
  }
}

inline void put_u32(std::string& out, std::uint32_t v) { put_uint(out, v); }
inline void put_u64(std::string& out, std::uint64_t v) { put_uint(out, v); }
inline void put_f32(std::string& out, float v) { put_uint(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::string& out, double v) { put_uint(out, std::bit_cast<std::uint64_t>(v)); }

// Bounds-checked sequential reader.
class Reader {
 public:
  Reader(std::string_view data, std::string source) : data_(data), source_(std::move(source)) {}

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

  std::string_view bytes(std::size_t n) {
    if (n > remaining()) {
      throw IoError(source_ + ": truncated at byte " + std::to_string(pos_));
    }
    std::string_view v = data_.substr(pos_, n);
    pos_ += n;
    return v;
  }

  template <typename U>
  U get_uint() {
    const std::string_view b = bytes(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(b[i])) << (8 * i);
    }
    return v;
  }

  std::uint32_t u32() { return get_uint<std::uint32_t>(); }
  std::uint64_t u64() { return get_uint<std::uint64_t>(); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

 private:
  std::string_view data_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace cgnn::binary
