#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cgnn::ad {

// Scalar type of the differentiable core. Training builds use 32-bit floats;
// the gradient-check build compiles the same sources with CGNN_REAL_DOUBLE.
#ifdef CGNN_REAL_DOUBLE
using Real = double;
#else
using Real = float;
#endif

// Every tensor the model needs is a matrix; vectors are [1 x n] rows and
// scalars are [1 x 1].
struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  std::string str() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;  // empty until a gradient arrives
  bool requires_grad = false;
  bool consumed = false;   // backward already ran through this root
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;  // reads this->grad, accumulates into inputs
  const char* op = "leaf";

  std::vector<Real>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), Real(0));
    return grad;
  }
};

}  // namespace detail

// Reference-semantics handle onto a node of the computation record. Copies
// alias the same storage; intermediate nodes keep their inputs alive until
// backward() releases them.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<Real> values, bool requires_grad = false);
  static Tensor scalar(Real value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rows() const { return node_->shape.rows; }
  std::size_t cols() const { return node_->shape.cols; }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  const char* op() const { return node_->op; }

  std::span<const Real> data() const { return node_->value; }
  std::span<Real> mutable_data() { return node_->value; }
  Real item() const;
  Real at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

  bool has_grad() const { return !node_->grad.empty(); }
  // Zero-filled view when no gradient has arrived yet.
  std::span<const Real> grad() const;
  std::span<Real> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.clear(); }

  // Fresh leaf with a copy of the values; no history.
  Tensor detach() const;
  // Deep copy preserving requires_grad, dropping history and gradient.
  Tensor clone() const;

  // Internal: used by the operator implementations.
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Reverse sweep from a [1 x 1] loss. Gradients accumulate (+=) into every
// reachable tensor with requires_grad, so several backward passes before an
// optimizer step sum their contributions. The record is released afterwards;
// calling backward on the same loss twice throws.
void backward(const Tensor& loss);

// While alive, operators on this thread record no history (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

using Index = std::vector<std::uint32_t>;

// [m x k] * [k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// Elementwise; `b` may also be a [1 x n] row broadcast over the rows of `a`.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real s);
// Concatenate along columns; all parts share the row count.
Tensor concat(const std::vector<Tensor>& parts);
Tensor relu(const Tensor& a);
Tensor square(const Tensor& a);
// out[r] = a[index[r]]
Tensor gather_rows(const Tensor& a, const Index& index);
// out[t] = mean of a[e] over edges e with index[e] == t; empty rows are 0.
Tensor scatter_mean(const Tensor& a, const Index& index, std::size_t out_rows);
// axis 0 -> [1 x cols], axis 1 -> [rows x 1]
Tensor reduce_mean(const Tensor& a, int axis);
Tensor reduce_max(const Tensor& a, int axis);
Tensor mean_all(const Tensor& a);
Tensor sum_all(const Tensor& a);
// Row-wise Euclidean norm, [rows x 1]. Subgradient 0 at a zero row.
Tensor sqrt_sum_rows(const Tensor& a);

}  // namespace cgnn::ad
