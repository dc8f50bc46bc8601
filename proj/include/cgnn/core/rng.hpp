#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

#include "cgnn/core/types.hpp"

namespace cgnn {

// Seeded generator with a platform-independent stream.
//
// Raw bits come from std::mt19937_64, whose output sequence is fixed by the
// C++ standard. The standard distributions are implementation-defined, so
// every derived quantity (uniform reals, bounded integers, shuffles) is
// computed here from the raw 64-bit words:
//   uniform()      = (word >> 11) * 2^-53, in [0, 1)
//   below(n)       = rejection sampling on the top bits, unbiased
//   shuffle()      = Fisher-Yates from the back using below()
//
// Split rule: child(stream) seeds a new generator with
// splitmix64(seed ^ splitmix64(stream + 1)); children depend only on the
// parent seed and the stream id, never on how much the parent was consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t below(std::uint64_t n);

  Rng child(std::uint64_t stream) const;

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Uniform unit vector on the spherical cap of half-angle `half_angle_deg`
// around `axis`: cos(theta) ~ U[cos(half_angle), 1], azimuth ~ U[0, 2 pi).
// `axis` is normalised internally; a zero axis throws ConfigError.
Vec3 sample_unit_direction_in_cone(Rng& rng, const Vec3& axis, double half_angle_deg);

}  // namespace cgnn
