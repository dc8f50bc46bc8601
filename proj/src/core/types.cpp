#include "cgnn/core/types.hpp"

#include <algorithm>

#include "cgnn/core/error.hpp"

namespace cgnn {

namespace {

void require_finite(std::span<const Vec3> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!is_finite(values[i])) {
      throw ShapeError(std::string(what) + ": non-finite coordinate at row " + std::to_string(i));
    }
  }
}

void require_same_size(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                     shape_string(b));
  }
}

}  // namespace

PointCloud::PointCloud(std::vector<Vec3> points) : points_(std::move(points)) {
  if (points_.empty()) {
    throw ShapeError("PointCloud: needs at least one point");
  }
  require_finite(points_, "PointCloud");
}

DisplacementField::DisplacementField(std::vector<Vec3> deltas) : deltas_(std::move(deltas)) {
  if (deltas_.empty()) {
    throw ShapeError("DisplacementField: needs at least one row");
  }
  require_finite(deltas_, "DisplacementField");
}

PointCloud Sample::target() const { return apply_displacement(input, target_displacement); }

std::string shape_string(std::size_t n) { return "[" + std::to_string(n) + " x 3]"; }

PointCloud apply_displacement(const PointCloud& x, const DisplacementField& d) {
  require_same_size(x.size(), d.size(), "apply_displacement");
  std::vector<Vec3> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + d[i];
  return PointCloud(std::move(out));
}

double mean_euclidean_distance(const PointCloud& a, const PointCloud& b) {
  require_same_size(a.size(), b.size(), "mean_euclidean_distance");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += norm(a[i] - b[i]);
  return sum / static_cast<double>(a.size());
}

double max_euclidean_distance(const PointCloud& a, const PointCloud& b) {
  require_same_size(a.size(), b.size(), "max_euclidean_distance");
  double best = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) best = std::max(best, norm(a[i] - b[i]));
  return best;
}

}  // namespace cgnn
