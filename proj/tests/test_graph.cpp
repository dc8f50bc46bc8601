#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "cgnn/core/error.hpp"
#include "cgnn/core/rng.hpp"
#include "cgnn/graph/knn.hpp"

using namespace cgnn;
using graph::EdgeList;
using graph::KnnMethod;

namespace {

// Full sort of every (distance, index) pair per node.
template <typename T>
EdgeList oracle(const std::vector<T>& x, std::size_t n, std::size_t dim, std::size_t k) {
  EdgeList out;
  out.nodes = n;
  out.k = k;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = static_cast<double>(x[i * dim + d]) - static_cast<double>(x[j * dim + d]);
        s += diff * diff;
      }
      all.emplace_back(s, static_cast<std::uint32_t>(j));
    }
    std::sort(all.begin(), all.end());
    std::vector<std::uint32_t> row{static_cast<std::uint32_t>(i)};
    for (std::size_t r = 0; r < k; ++r) row.push_back(all[r].second);
    std::sort(row.begin(), row.end());
    for (std::uint32_t s : row) {
      out.target.push_back(static_cast<std::uint32_t>(i));
      out.source.push_back(s);
    }
  }
  return out;
}

template <typename T>
std::vector<T> random_features(Rng& rng, std::size_t n, std::size_t dim) {
  std::vector<T> x(n * dim);
  for (T& v : x) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  return x;
}

constexpr KnnMethod kMethods[] = {KnnMethod::kAuto, KnnMethod::kBruteForce, KnnMethod::kKdTree,
                                  KnnMethod::kScreened};

template <typename T>
void check_all_methods(const std::vector<T>& x, std::size_t n, std::size_t dim, std::size_t k) {
  const EdgeList expect = oracle(x, n, dim, k);
  for (KnnMethod m : kMethods) {
    CAPTURE(static_cast<int>(m));
    CHECK(graph::knn_graph<T>(x, n, dim, k, m) == expect);
  }
}

}  // namespace

TEST_CASE_TEMPLATE("kNN matches an exhaustive sort on random clouds", T, float, double) {
  Rng rng(11);
  for (std::size_t dim : {3, 8, 16, 64, 131}) {
    for (std::size_t n : {6, 40, 64, 150}) {
      for (std::size_t k : {std::size_t{1}, std::size_t{5}, n - 1}) {
        CAPTURE(dim);
        CAPTURE(n);
        CAPTURE(k);
        check_all_methods(random_features<T>(rng, n, dim), n, dim, k);
      }
    }
  }
}

TEST_CASE("ties resolve to the smaller index") {
  // Integer lattice: every interior node has four neighbours at distance 1.
  const std::size_t side = 9, n = side * side;
  std::vector<double> x;
  for (std::size_t j = 0; j < side; ++j) {
    for (std::size_t i = 0; i < side; ++i) x.insert(x.end(), {double(i), double(j), 0.0});
  }
  for (std::size_t k : {1, 2, 3, 6, 10}) check_all_methods(x, n, 3, k);

  // Lattice of identical points and duplicated wide rows.
  std::vector<float> dup(100 * 20, 0.5f);
  for (std::size_t i = 50; i < 100; ++i) dup[i * 20 + (i % 20)] = 1.5f;
  for (std::size_t k : {3, 7, 99}) check_all_methods(dup, 100, 20, k);

  const EdgeList same = graph::knn_graph<double>(std::vector<double>(12, 0.0), 4, 3, 2);
  CHECK(same.source == std::vector<std::uint32_t>{0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 3});
}

TEST_CASE("every node gets k neighbours plus itself") {
  Rng rng(3);
  const std::size_t n = 200, k = 7;
  const auto x = random_features<float>(rng, n, 3);
  const EdgeList e = graph::knn_graph<float>(x, n, 3, k);
  REQUIRE(e.size() == n * (k + 1));
  for (std::size_t i = 0; i < n; ++i) {
    bool self = false;
    for (std::size_t r = 0; r <= k; ++r) {
      CHECK(e.target[i * (k + 1) + r] == i);
      self = self || e.source[i * (k + 1) + r] == i;
      if (r > 0) CHECK(e.source[i * (k + 1) + r - 1] < e.source[i * (k + 1) + r]);
    }
    CHECK(self);
  }
}

TEST_CASE("invalid graph requests") {
  const std::vector<double> x(12, 0.0);
  CHECK_THROWS_AS(graph::knn_graph<double>(x, 4, 3, 0), ConfigError);
  CHECK_THROWS_AS(graph::knn_graph<double>(x, 4, 3, 4), ConfigError);
  CHECK_THROWS_AS(graph::knn_graph<double>(x, 5, 3, 2), ShapeError);
  std::vector<double> bad = x;
  bad[4] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(graph::knn_graph<double>(bad, 4, 3, 2), Error);
}
