#include "cgnn/graph/knn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <limits>
#include <memory>
#include <cmath>
#include <numeric>
#include <string>

#include "cgnn/core/error.hpp"

namespace cgnn::graph {

namespace {

constexpr std::size_t kKdTreeMaxDim = 8;
constexpr std::size_t kKdTreeMinPoints = 64;
constexpr std::size_t kLeafSize = 8;
constexpr std::size_t kScreenMinPoints = 32;

struct Candidate {
  double dist;
  std::uint32_t index;
  // Max-heap order: the worst candidate (largest distance, then largest
  // index) sits on top.
  friend bool operator<(const Candidate& a, const Candidate& b) {
    return a.dist < b.dist || (a.dist == b.dist && a.index < b.index);
  }
};

// Bounded set of the k best candidates seen so far.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k); }

  bool full() const { return heap_.size() == k_; }
  double worst() const { return heap_.front().dist; }

  void offer(const Candidate& c) {
    if (!full()) {
      heap_.push_back(c);
      std::push_heap(heap_.begin(), heap_.end());
    } else if (c < heap_.front()) {
      std::pop_heap(heap_.begin(), heap_.end());
      heap_.back() = c;
      std::push_heap(heap_.begin(), heap_.end());
    }
  }

  void clear() { heap_.clear(); }
  const std::vector<Candidate>& items() const { return heap_; }

 private:
  std::size_t k_;
  std::vector<Candidate> heap_;
};

template <typename T>
double squared_distance(const T* a, const T* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = static_cast<double>(a[d]) - static_cast<double>(b[d]);
    s += diff * diff;
  }
  return s;
}

// Partial sums only grow, so abandoning a row once it exceeds `bound` never
// drops a candidate the full sum would have kept.
template <typename T>
bool squared_distance_within(const T* a, const T* b, std::size_t dim, double bound, double& out) {
  double s = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = static_cast<double>(a[d]) - static_cast<double>(b[d]);
    s += diff * diff;
    if (s > bound) return false;
  }
  out = s;
  return true;
}

template <typename T>
void scan_all(const T* data, std::size_t n, std::size_t dim, std::size_t i, TopK& best) {
  const T* q = data + i * dim;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    double dist = 0.0;
    if (best.full()) {
      if (!squared_distance_within(q, data + j * dim, dim, best.worst(), dist)) continue;
    } else {
      dist = squared_distance(q, data + j * dim, dim);
    }
    best.offer({dist, static_cast<std::uint32_t>(j)});
  }
}

template <typename T>
class KdTree {
 public:
  KdTree(const T* data, std::size_t n, std::size_t dim) : data_(data), dim_(dim), order_(n) {
    std::iota(order_.begin(), order_.end(), 0u);
    nodes_.reserve(2 * n / kLeafSize + 2);
    build(0, n);
  }

  void query(std::size_t i, TopK& best) const { search(0, data_ + i * dim_, i, best); }

 private:
  struct Node {
    std::size_t begin;
    std::size_t end;
    std::size_t dim;
    double split;
    std::size_t left;
    std::size_t right;
    bool leaf;
  };

  double coord(std::uint32_t idx, std::size_t d) const {
    return static_cast<double>(data_[idx * dim_ + d]);
  }

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end, 0, 0.0, 0, 0, true});
    if (end - begin <= kLeafSize) return id;

    std::size_t best_dim = 0;
    double best_spread = -1.0;
    for (std::size_t d = 0; d < dim_; ++d) {
      double lo = coord(order_[begin], d);
      double hi = lo;
      for (std::size_t p = begin + 1; p < end; ++p) {
        lo = std::min(lo, coord(order_[p], d));
        hi = std::max(hi, coord(order_[p], d));
      }
      if (hi - lo > best_spread) {
        best_spread = hi - lo;
        best_dim = d;
      }
    }
    if (best_spread <= 0.0) return id;  // all points coincide

    const std::size_t mid = begin + (end - begin) / 2;
    auto first = order_.begin();
    std::nth_element(first + static_cast<std::ptrdiff_t>(begin), first + static_cast<std::ptrdiff_t>(mid),
                     first + static_cast<std::ptrdiff_t>(end), [&](std::uint32_t a, std::uint32_t b) {
                       return coord(a, best_dim) < coord(b, best_dim);
                     });
    const double split = coord(order_[mid], best_dim);
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    nodes_[id] = {begin, end, best_dim, split, left, right, false};
    return id;
  }

  void search(std::size_t id, const T* q, std::size_t self, TopK& best) const {
    const Node& node = nodes_[id];
    if (node.leaf) {
      for (std::size_t p = node.begin; p < node.end; ++p) {
        const std::uint32_t j = order_[p];
        if (j == self) continue;
        const double dist = squared_distance(q, data_ + j * dim_, dim_);
        best.offer({dist, j});
      }
      return;
    }
    const double diff = static_cast<double>(q[node.dim]) - node.split;
    const std::size_t near = diff <= 0.0 ? node.left : node.right;
    const std::size_t far = diff <= 0.0 ? node.right : node.left;
    search(near, q, self, best);
    // Equal bounds are still explored so index tie-breaking matches the scan.
    if (!best.full() || diff * diff <= best.worst()) search(far, q, self, best);
  }

  const T* data_;
  std::size_t dim_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

// Exact search for wide features. A Gram-matrix pass gives approximate
// distances with a rigorous rounding bound; only rows whose approximate
// distance is within twice that bound of the k-th best are rescored with
// squared_distance, so the result equals the plain scan.
template <typename T>
class ScreenedSearch {
 public:
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  ScreenedSearch(const T* data, std::size_t n, std::size_t dim)
      : data_(data), n_(n), dim_(dim), approx_(n) {
    const auto rows = static_cast<Eigen::Index>(n);
    const Eigen::Map<const Matrix> x(data, rows, static_cast<Eigen::Index>(dim));
    gram_.resize(rows, rows);
    gram_.noalias() = x * x.transpose();
    norms_.resize(n);
    T max_sq = 0;
    for (std::size_t i = 0; i < n; ++i) {
      norms_[i] = gram_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
      max_sq = std::max(max_sq, norms_[i]);
    }
    max_norm_ = std::sqrt(static_cast<double>(max_sq));
    // Each Gram entry carries at most ~dim * eps relative error against
    // |a| |b|; the extra terms cover the diagonal, the three-term sum in T and
    // the double-precision rescoring, with a factor 8 to spare.
    const double eps = static_cast<double>(std::numeric_limits<T>::epsilon());
    bound_scale_ = 8.0 * static_cast<double>(dim + 4) * eps;
  }

  void query(std::size_t i, std::size_t k, TopK& best) {
    T* approx = approx_.data();
    const T own = norms_[i];
    approx_row(gram_.data() + i * n_, norms_.data(), approx, own, n_);
    approx[i] = std::numeric_limits<T>::infinity();

    const double radius = std::sqrt(std::max(0.0, static_cast<double>(own))) + max_norm_;
    const double slack = 2.0 * bound_scale_ * radius * radius;

    // Each lane minimum is a distinct row, so the k-th smallest of them
    // bounds the k-th smallest value from above; every row that can survive
    // the final cutoff lies below that bound plus the slack.
    T upper = std::numeric_limits<T>::infinity();
    if (k <= kLanes && n_ >= kLanes) {
      std::array<T, kLanes> lane;
      lane_minima(approx, lane.data(), n_);
      std::nth_element(lane.begin(), lane.begin() + static_cast<std::ptrdiff_t>(k - 1), lane.end());
      upper = lane[k - 1];
    }
    // Rounded up so the float test never rejects a row the double test keeps.
    const T gate = std::nextafter(static_cast<T>(static_cast<double>(upper) + slack),
                                  std::numeric_limits<T>::infinity());

    candidates_.clear();
    for (std::size_t b = 0; b < n_; b += kLanes) {
      const std::size_t len = std::min(kLanes, n_ - b);
      if (count_at_most(approx + b, gate, len) == 0) continue;
      for (std::size_t j = b; j < b + len; ++j) {
        if (j != i && approx[j] <= gate) candidates_.push_back({approx[j], j});
      }
    }
    auto by_value = [](const Candidate& a, const Candidate& b) { return a.approx < b.approx; };
    std::nth_element(candidates_.begin(), candidates_.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     candidates_.end(), by_value);
    const double cutoff = static_cast<double>(candidates_[k - 1].approx) + slack;

    const T* q = data_ + i * dim_;
    for (const Candidate& c : candidates_) {
      if (static_cast<double>(c.approx) > cutoff) continue;
      best.offer({squared_distance(q, data_ + c.index * dim_, dim_), static_cast<std::uint32_t>(c.index)});
    }
  }

 private:
  struct Candidate {
    T approx;
    std::size_t index;
  };

  static constexpr std::size_t kLanes = 32;

  // The loops below are written so the compiler vectorises them; the
  // restrict qualifiers rule out aliasing between the buffers.
  static void approx_row(const T* __restrict g, const T* __restrict nrm, T* __restrict out, T own,
                         std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) out[j] = own + nrm[j] - T(2) * g[j];
  }

  static void lane_minima(const T* __restrict v, T* __restrict lane, std::size_t n) {
    for (std::size_t t = 0; t < kLanes; ++t) lane[t] = v[t];
    std::size_t b = kLanes;
    for (; b + kLanes <= n; b += kLanes) {
      for (std::size_t t = 0; t < kLanes; ++t) lane[t] = v[b + t] < lane[t] ? v[b + t] : lane[t];
    }
    for (std::size_t t = 0; b + t < n; ++t) lane[t] = std::min(lane[t], v[b + t]);
  }

  static std::size_t count_at_most(const T* __restrict v, T gate, std::size_t n) {
    std::size_t hits = 0;
    for (std::size_t j = 0; j < n; ++j) hits += v[j] <= gate;
    return hits;
  }

  const T* data_;
  std::size_t n_;
  std::size_t dim_;
  Matrix gram_;
  std::vector<T> norms_;
  std::vector<T> approx_;
  std::vector<Candidate> candidates_;
  double max_norm_ = 0.0;
  double bound_scale_ = 0.0;
};

}  // namespace

template <typename T>
EdgeList knn_graph(std::span<const T> features, std::size_t n, std::size_t dim, std::size_t k,
                   KnnMethod method) {
  if (dim == 0 || features.size() != n * dim) {
    throw ShapeError("knn_graph: feature buffer of " + std::to_string(features.size()) +
                     " values does not match [" + std::to_string(n) + " x " + std::to_string(dim) +
                     "]");
  }
  if (k < 1 || k + 1 > n) {
    throw ConfigError("knn_graph: k = " + std::to_string(k) + " out of range for " +
                      std::to_string(n) + " points (need 1 <= k <= N - 1)");
  }
  for (const T& v : features) {
    if (!std::isfinite(static_cast<double>(v))) throw Error("knn_graph: non-finite feature");
  }
  if (method == KnnMethod::kAuto) {
    if (dim <= kKdTreeMaxDim) {
      method = n >= kKdTreeMinPoints ? KnnMethod::kKdTree : KnnMethod::kBruteForce;
    } else {
      method = n >= kScreenMinPoints ? KnnMethod::kScreened : KnnMethod::kBruteForce;
    }
  }

  EdgeList out;
  out.nodes = n;
  out.k = k;
  out.target.reserve(n * (k + 1));
  out.source.reserve(n * (k + 1));

  const T* data = features.data();
  TopK best(k);
  std::vector<std::uint32_t> row(k + 1);
  std::unique_ptr<KdTree<T>> tree;
  std::unique_ptr<ScreenedSearch<T>> screen;
  if (method == KnnMethod::kKdTree) tree = std::make_unique<KdTree<T>>(data, n, dim);
  if (method == KnnMethod::kScreened) screen = std::make_unique<ScreenedSearch<T>>(data, n, dim);

  for (std::size_t i = 0; i < n; ++i) {
    best.clear();
    if (tree) {
      tree->query(i, best);
    } else if (screen) {
      screen->query(i, k, best);
    } else {
      scan_all(data, n, dim, i, best);
    }
    for (std::size_t c = 0; c < k; ++c) row[c] = best.items()[c].index;
    row[k] = static_cast<std::uint32_t>(i);
    std::sort(row.begin(), row.end());
    for (std::uint32_t j : row) {
      out.target.push_back(static_cast<std::uint32_t>(i));
      out.source.push_back(j);
    }
  }
  return out;
}

template EdgeList knn_graph<float>(std::span<const float>, std::size_t, std::size_t, std::size_t,
                                   KnnMethod);
template EdgeList knn_graph<double>(std::span<const double>, std::size_t, std::size_t,
                                    std::size_t, KnnMethod);

}  // namespace cgnn::graph
