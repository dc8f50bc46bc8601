#include "cgnn/core/rng.hpp"

#include <cmath>
#include <numbers>

#include "cgnn/core/error.hpp"

namespace cgnn {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw Error("Rng::below: empty range");
  if (n == 1) return 0;
  // Smallest all-ones mask covering n - 1, then reject.
  std::uint64_t mask = n - 1;
  mask |= mask >> 1;
  mask |= mask >> 2;
  mask |= mask >> 4;
  mask |= mask >> 8;
  mask |= mask >> 16;
  mask |= mask >> 32;
  for (;;) {
    const std::uint64_t r = engine_() & mask;
    if (r < n) return r;
  }
}

Rng Rng::child(std::uint64_t stream) const {
  return Rng(splitmix64(seed_ ^ splitmix64(stream + 1)));
}

Vec3 sample_unit_direction_in_cone(Rng& rng, const Vec3& axis, double half_angle_deg) {
  const double len = norm(axis);
  if (!(len > 0.0) || !std::isfinite(len)) {
    throw ConfigError("sample_unit_direction_in_cone: zero or non-finite axis");
  }
  if (!(half_angle_deg >= 0.0 && half_angle_deg <= 180.0)) {
    throw ConfigError("sample_unit_direction_in_cone: half angle must lie in [0, 180] degrees");
  }
  const Vec3 a = axis * (1.0 / len);
  if (half_angle_deg == 0.0) return a;

  // Orthonormal frame (u, w, a); u built from the world axis least aligned with a.
  const Vec3 helper = std::abs(a.x) <= std::abs(a.y) && std::abs(a.x) <= std::abs(a.z)
                          ? Vec3{1, 0, 0}
                          : (std::abs(a.y) <= std::abs(a.z) ? Vec3{0, 1, 0} : Vec3{0, 0, 1});
  Vec3 u = cross(a, helper);
  u *= 1.0 / norm(u);
  const Vec3 w = cross(a, u);

  const double cos_max = std::cos(half_angle_deg * std::numbers::pi / 180.0);
  const double cos_theta = cos_max + (1.0 - cos_max) * rng.uniform();
  const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
  const double phi = 2.0 * std::numbers::pi * rng.uniform();
  Vec3 v = a * cos_theta + u * (sin_theta * std::cos(phi)) + w * (sin_theta * std::sin(phi));
  return v * (1.0 / norm(v));
}

}  // namespace cgnn
