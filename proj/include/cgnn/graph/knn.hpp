#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cgnn::graph {

// Directed edges (target <- source), sorted by target then source. Every
// node has exactly k + 1 incoming edges: its k nearest neighbours and itself.
struct EdgeList {
  std::size_t nodes = 0;
  std::size_t k = 0;
  std::vector<std::uint32_t> target;
  std::vector<std::uint32_t> source;

  std::size_t size() const { return target.size(); }
  friend bool operator==(const EdgeList&, const EdgeList&) = default;
};

enum class KnnMethod { kAuto, kBruteForce, kKdTree, kScreened };

// Exact k-nearest-neighbour self-loop graph over `n` row-major feature rows
// of width `dim`, using squared Euclidean distance. Ties go to the smaller
// source index. Requires 1 <= k <= n - 1.
//
// kAuto picks a k-d tree for low-dimensional inputs, a Gram-matrix screened
// search for wide features, and a pruned linear scan for small clouds. All
// methods return identical edge lists.
template <typename T>
EdgeList knn_graph(std::span<const T> features, std::size_t n, std::size_t dim, std::size_t k,
                   KnnMethod method = KnnMethod::kAuto);

extern template EdgeList knn_graph<float>(std::span<const float>, std::size_t, std::size_t,
                                          std::size_t, KnnMethod);
extern template EdgeList knn_graph<double>(std::span<const double>, std::size_t, std::size_t,
                                           std::size_t, KnnMethod);

}  // namespace cgnn::graph
