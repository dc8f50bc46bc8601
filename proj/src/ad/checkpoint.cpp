#include "cgnn/ad/checkpoint.hpp"

#include "cgnn/core/binary.hpp"
#include "cgnn/core/error.hpp"
#include "cgnn/core/file_util.hpp"

namespace cgnn::ad {

namespace {
constexpr std::string_view kMagic{"CGNNWTS\0", 8};
}

std::string encode_checkpoint(const std::vector<NamedArray>& arrays) {
  std::string out(kMagic);
  binary::put_u32(out, kCheckpointVersion);
  binary::put_u32(out, static_cast<std::uint32_t>(arrays.size()));
  for (const NamedArray& a : arrays) {
    std::uint64_t count = 1;
    for (std::uint64_t d : a.shape) count *= d;
    if (count != a.values.size()) {
      throw ShapeError("checkpoint entry '" + a.name + "': shape holds " + std::to_string(count) +
                       " values, got " + std::to_string(a.values.size()));
    }
    binary::put_u32(out, static_cast<std::uint32_t>(a.name.size()));
    out += a.name;
    binary::put_u32(out, static_cast<std::uint32_t>(a.shape.size()));
    for (std::uint64_t d : a.shape) binary::put_u64(out, d);
    for (float v : a.values) binary::put_f32(out, v);
  }
  return out;
}

std::vector<NamedArray> decode_checkpoint(const std::string& bytes, const std::string& source) {
  binary::Reader in(bytes, source);
  if (in.bytes(kMagic.size()) != kMagic) throw IoError(source + ": not a weight checkpoint");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw IoError(source + ": unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32();
  std::vector<NamedArray> arrays;
  for (std::uint32_t e = 0; e < count; ++e) {
    NamedArray a;
    a.name = std::string(in.bytes(in.u32()));
    const std::uint32_t rank = in.u32();
    std::uint64_t total = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      a.shape.push_back(in.u64());
      total *= a.shape.back();
    }
    if (total * 4 > in.remaining()) throw IoError(source + ": truncated entry '" + a.name + "'");
    a.values.resize(total);
    for (float& v : a.values) v = in.f32();
    arrays.push_back(std::move(a));
  }
  if (in.remaining() != 0) throw IoError(source + ": trailing bytes after last entry");
  return arrays;
}

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
  write_file_atomic(path, encode_checkpoint(arrays));
}

std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path), path.string());
}

}  // namespace cgnn::ad
