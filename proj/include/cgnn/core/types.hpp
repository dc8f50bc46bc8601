#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cgnn {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Vec3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }
  friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline bool is_finite(const Vec3& a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

// N >= 1 surface points in millimetres. Point order is meaningful: index n
// of an input cloud corresponds to index n of its target.
class PointCloud {
 public:
  explicit PointCloud(std::vector<Vec3> points);

  std::size_t size() const { return points_.size(); }
  const Vec3& operator[](std::size_t i) const { return points_[i]; }
  std::span<const Vec3> points() const { return points_; }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::vector<Vec3> points_;
};

// Per-point displacement in millimetres, index-aligned with a companion cloud.
class DisplacementField {
 public:
  explicit DisplacementField(std::vector<Vec3> deltas);

  std::size_t size() const { return deltas_.size(); }
  const Vec3& operator[](std::size_t i) const { return deltas_[i]; }
  std::span<const Vec3> deltas() const { return deltas_; }

  friend bool operator==(const DisplacementField&, const DisplacementField&) = default;

 private:
  std::vector<Vec3> deltas_;
};

// Indenter-tip start and end coordinates (mm).
struct Condition {
  Vec3 start;
  Vec3 end;

  std::array<double, 6> flat() const { return {start.x, start.y, start.z, end.x, end.y, end.z}; }
  friend bool operator==(const Condition&, const Condition&) = default;
};

struct SampleMeta {
  std::size_t location = 0;   // grid index of the indented mass
  std::size_t direction = 0;  // 0 = surface normal, >0 = cone-sampled
  std::size_t t_in = 0;
  std::size_t t_out = 0;
  std::size_t contact_index = 0;  // row of the contact point inside `input`
};

struct Sample {
  PointCloud input;
  Condition condition;
  DisplacementField target_displacement;
  double target_force_change = 0.0;  // newtons
  SampleMeta meta;

  PointCloud target() const;
};

std::string shape_string(std::size_t n);

// x + d, elementwise. Throws ShapeError on size mismatch.
PointCloud apply_displacement(const PointCloud& x, const DisplacementField& d);

// (1/N) sum_n |a_n - b_n|_2
double mean_euclidean_distance(const PointCloud& a, const PointCloud& b);

// max_n |a_n - b_n|_2
double max_euclidean_distance(const PointCloud& a, const PointCloud& b);

}  // namespace cgnn
