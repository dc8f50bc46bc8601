#include "cgnn/ad/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <utility>

#include "cgnn/core/error.hpp"

namespace cgnn::ad {

namespace {

thread_local bool g_no_grad = false;

using detail::Node;
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const Matrix>;
using Map = Eigen::Map<Matrix>;

MapC view(const std::vector<Real>& v, const Shape& s) {
  return MapC(v.data(), static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols));
}
Map view(std::vector<Real>& v, const Shape& s) {
  return Map(v.data(), static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
}

// Output node for an op; history is recorded only when an input needs it.
Tensor make_result(const char* op, Shape shape, std::vector<Real> value,
                   std::initializer_list<Tensor> inputs, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(value);
  node->op = op;
  for (const Tensor& t : inputs) {
    if (t.requires_grad() && !g_no_grad) node->requires_grad = true;
  }
  if (node->requires_grad) {
    for (const Tensor& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Tensor make_result(const char* op, Shape shape, std::vector<Real> value,
                   const std::vector<Tensor>& inputs, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(value);
  node->op = op;
  for (const Tensor& t : inputs) {
    if (t.requires_grad() && !g_no_grad) node->requires_grad = true;
  }
  if (node->requires_grad) {
    for (const Tensor& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

bool wants(const std::shared_ptr<Node>& n) { return n->requires_grad; }

void check_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw Error(std::string(op) + ": undefined tensor");
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }

std::string Shape::str() const {
  return "[" + std::to_string(rows) + " x " + std::to_string(cols) + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return from(shape, std::vector<Real>(shape.size(), Real(0)), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<Real> values, bool requires_grad) {
  if (values.size() != shape.size()) {
    throw ShapeError("Tensor::from: " + std::to_string(values.size()) + " values for shape " +
                     shape.str());
  }
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(Real value, bool requires_grad) {
  return from({1, 1}, {value}, requires_grad);
}

Real Tensor::item() const {
  if (size() != 1) throw ShapeError("Tensor::item: tensor of shape " + shape().str());
  return node_->value[0];
}

std::span<const Real> Tensor::grad() const {
  if (node_->grad.empty()) node_->grad.assign(node_->value.size(), Real(0));
  return node_->grad;
}

Tensor Tensor::detach() const { return from(shape(), node_->value, false); }

Tensor Tensor::clone() const { return from(shape(), node_->value, node_->requires_grad); }

void backward(const Tensor& loss) {
  check_defined(loss, "backward");
  if (loss.size() != 1) throw ShapeError("backward: loss must be [1 x 1], got " + loss.shape().str());
  const auto& root = loss.node();
  if (root->consumed) {
    throw Error("backward: computation record already consumed; run the forward pass again");
  }
  if (!root->requires_grad) throw Error("backward: loss does not depend on any parameter");

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.push_back({child, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_buffer()[0] += Real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
  for (Node* node : order) {
    if (node->backward) {
      node->backward = nullptr;
      node->inputs.clear();
      node->grad.clear();
    }
  }
  root->consumed = true;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_defined(a, "matmul");
  check_defined(b, "matmul");
  if (a.cols() != b.rows()) shape_error("matmul", a.shape(), b.shape());
  const Shape out{a.rows(), b.cols()};
  std::vector<Real> value(out.size());
  view(value, out).noalias() = view(a.node()->value, a.shape()) * view(b.node()->value, b.shape());
  return make_result("matmul", out, std::move(value), {a, b}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    const MapC g = view(std::as_const(self.grad), self.shape);
    if (wants(self.inputs[0])) {
      view(x.grad_buffer(), x.shape).noalias() += g * view(std::as_const(y.value), y.shape).transpose();
    }
    if (wants(self.inputs[1])) {
      view(y.grad_buffer(), y.shape).noalias() += view(std::as_const(x.value), x.shape).transpose() * g;
    }
  });
}

namespace {

// Shared body of add / sub: out = a + sign * b, b either same shape or a row.
Tensor add_impl(const Tensor& a, const Tensor& b, Real sign, const char* op) {
  check_defined(a, op);
  check_defined(b, op);
  const bool broadcast = b.shape() != a.shape();
  if (broadcast && !(b.rows() == 1 && b.cols() == a.cols())) shape_error(op, a.shape(), b.shape());
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  std::vector<Real> value(a.size());
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* brow = broadcast ? bv.data() : bv.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) value[r * cols + c] = av[r * cols + c] + sign * brow[c];
  }
  return make_result(op, a.shape(), std::move(value), {a, b}, [broadcast, sign](Node& self) {
    const std::size_t rows = self.shape.rows;
    const std::size_t cols = self.shape.cols;
    if (wants(self.inputs[0])) {
      Real* __restrict ga = self.inputs[0]->grad_buffer().data();
      const Real* __restrict up = self.grad.data();
      for (std::size_t i = 0; i < rows * cols; ++i) ga[i] += up[i];
    }
    if (wants(self.inputs[1])) {
      auto& gb = self.inputs[1]->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) {
        Real* dst = broadcast ? gb.data() : gb.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) dst[c] += sign * self.grad[r * cols + c];
      }
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_impl(a, b, Real(1), "add"); }

Tensor sub(const Tensor& a, const Tensor& b) { return add_impl(a, b, Real(-1), "sub"); }

Tensor mul(const Tensor& a, const Tensor& b) {
  check_defined(a, "mul");
  check_defined(b, "mul");
  if (a.shape() != b.shape()) shape_error("mul", a.shape(), b.shape());
  std::vector<Real> value(a.size());
  for (std::size_t i = 0; i < value.size(); ++i) value[i] = a.data()[i] * b.data()[i];
  return make_result("mul", a.shape(), std::move(value), {a, b}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    if (wants(self.inputs[0])) {
      auto& g = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y.value[i];
    }
    if (wants(self.inputs[1])) {
      auto& g = y.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * x.value[i];
    }
  });
}

Tensor scale(const Tensor& a, Real s) {
  check_defined(a, "scale");
  std::vector<Real> value(a.size());
  for (std::size_t i = 0; i < value.size(); ++i) value[i] = a.data()[i] * s;
  return make_result("scale", a.shape(), std::move(value), {a}, [s](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * s;
  });
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Tensor& p : parts) {
    check_defined(p, "concat");
    if (p.rows() != rows) shape_error("concat", parts.front().shape(), p.shape());
    cols += p.cols();
  }
  std::vector<Real> value(rows * cols);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t pc = p.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(p.data().data() + r * pc, pc, value.data() + r * cols + offset);
    }
    offset += pc;
  }
  return make_result("concat", {rows, cols}, std::move(value), parts, [](Node& self) {
    const std::size_t rows = self.shape.rows;
    const std::size_t cols = self.shape.cols;
    std::size_t offset = 0;
    for (auto& input : self.inputs) {
      const std::size_t pc = input->shape.cols;
      if (wants(input)) {
        auto& g = input->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < pc; ++c) g[r * pc + c] += self.grad[r * cols + offset + c];
        }
      }
      offset += pc;
    }
  });
}

Tensor relu(const Tensor& a) {
  check_defined(a, "relu");
  std::vector<Real> value(a.size());
  for (std::size_t i = 0; i < value.size(); ++i) value[i] = std::max(a.data()[i], Real(0));
  return make_result("relu", a.shape(), std::move(value), {a}, [](Node& self) {
    Node& x = *self.inputs[0];
    Real* __restrict g = x.grad_buffer().data();
    const Real* __restrict v = x.value.data();
    const Real* __restrict up = self.grad.data();
    const std::size_t n = x.value.size();
    for (std::size_t i = 0; i < n; ++i) g[i] += v[i] > Real(0) ? up[i] : Real(0);
  });
}

Tensor square(const Tensor& a) {
  check_defined(a, "square");
  std::vector<Real> value(a.size());
  for (std::size_t i = 0; i < value.size(); ++i) value[i] = a.data()[i] * a.data()[i];
  return make_result("square", a.shape(), std::move(value), {a}, [](Node& self) {
    Node& x = *self.inputs[0];
    auto& g = x.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += Real(2) * x.value[i] * self.grad[i];
  });
}

Tensor gather_rows(const Tensor& a, const Index& index) {
  check_defined(a, "gather_rows");
  const std::size_t cols = a.cols();
  std::vector<Real> value(index.size() * cols);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= a.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(index[r]) + " out of range for " +
                       a.shape().str());
    }
    std::copy_n(a.data().data() + index[r] * cols, cols, value.data() + r * cols);
  }
  auto idx = std::make_shared<const Index>(index);
  return make_result("gather_rows", {index.size(), cols}, std::move(value), {a},
                     [idx](Node& self) {
                       const std::size_t cols = self.shape.cols;
                       auto& g = self.inputs[0]->grad_buffer();
                       for (std::size_t r = 0; r < idx->size(); ++r) {
                         Real* dst = g.data() + (*idx)[r] * cols;
                         const Real* src = self.grad.data() + r * cols;
                         for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
                       }
                     });
}

Tensor scatter_mean(const Tensor& a, const Index& index, std::size_t out_rows) {
  check_defined(a, "scatter_mean");
  if (index.size() != a.rows()) {
    throw ShapeError("scatter_mean: " + std::to_string(index.size()) + " indices for " +
                     a.shape().str());
  }
  const std::size_t cols = a.cols();
  auto inv_count = std::make_shared<std::vector<Real>>(out_rows, Real(0));
  for (std::uint32_t t : index) {
    if (t >= out_rows) {
      throw ShapeError("scatter_mean: index " + std::to_string(t) + " out of range for " +
                       std::to_string(out_rows) + " rows");
    }
    (*inv_count)[t] += Real(1);
  }
  for (Real& c : *inv_count) c = c > Real(0) ? Real(1) / c : Real(0);

  std::vector<Real> value(out_rows * cols, Real(0));
  for (std::size_t e = 0; e < index.size(); ++e) {
    Real* dst = value.data() + index[e] * cols;
    const Real* src = a.data().data() + e * cols;
    for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
  }
  for (std::size_t r = 0; r < out_rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) value[r * cols + c] *= (*inv_count)[r];
  }
  auto idx = std::make_shared<const Index>(index);
  return make_result("scatter_mean", {out_rows, cols}, std::move(value), {a},
                     [idx, inv_count](Node& self) {
                       const std::size_t cols = self.shape.cols;
                       auto& g = self.inputs[0]->grad_buffer();
                       for (std::size_t e = 0; e < idx->size(); ++e) {
                         const std::uint32_t t = (*idx)[e];
                         const Real w = (*inv_count)[t];
                         for (std::size_t c = 0; c < cols; ++c) {
                           g[e * cols + c] += self.grad[t * cols + c] * w;
                         }
                       }
                     });
}

Tensor reduce_mean(const Tensor& a, int axis) {
  check_defined(a, "reduce_mean");
  if (axis != 0 && axis != 1) throw ShapeError("reduce_mean: axis must be 0 or 1");
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  const Shape out = axis == 0 ? Shape{1, cols} : Shape{rows, 1};
  const Real inv = Real(1) / static_cast<Real>(axis == 0 ? rows : cols);
  std::vector<Real> value(out.size(), Real(0));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) value[axis == 0 ? c : r] += a.data()[r * cols + c];
  }
  for (Real& v : value) v *= inv;
  return make_result("reduce_mean", out, std::move(value), {a}, [axis, inv](Node& self) {
    Node& x = *self.inputs[0];
    auto& g = x.grad_buffer();
    const std::size_t cols = x.shape.cols;
    for (std::size_t r = 0; r < x.shape.rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[axis == 0 ? c : r] * inv;
    }
  });
}

Tensor reduce_max(const Tensor& a, int axis) {
  check_defined(a, "reduce_max");
  if (axis != 0 && axis != 1) throw ShapeError("reduce_max: axis must be 0 or 1");
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  if (rows == 0 || cols == 0) throw ShapeError("reduce_max: empty tensor " + a.shape().str());
  const Shape out = axis == 0 ? Shape{1, cols} : Shape{rows, 1};
  std::vector<Real> value(out.size());
  // Flat position of the winning entry; the first maximum wins ties.
  auto arg = std::make_shared<std::vector<std::size_t>>(out.size());
  const auto& av = a.data();
  if (axis == 0) {
    for (std::size_t c = 0; c < cols; ++c) {
      std::size_t best = c;
      for (std::size_t r = 1; r < rows; ++r) {
        if (av[r * cols + c] > av[best]) best = r * cols + c;
      }
      (*arg)[c] = best;
      value[c] = av[best];
    }
  } else {
    for (std::size_t r = 0; r < rows; ++r) {
      std::size_t best = r * cols;
      for (std::size_t c = 1; c < cols; ++c) {
        if (av[r * cols + c] > av[best]) best = r * cols + c;
      }
      (*arg)[r] = best;
      value[r] = av[best];
    }
  }
  return make_result("reduce_max", out, std::move(value), {a}, [arg](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < arg->size(); ++i) g[(*arg)[i]] += self.grad[i];
  });
}

Tensor sum_all(const Tensor& a) {
  check_defined(a, "sum_all");
  Real total = 0;
  for (Real v : a.data()) total += v;
  return make_result("sum_all", {1, 1}, {total}, {a}, [](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (Real& v : g) v += self.grad[0];
  });
}

Tensor mean_all(const Tensor& a) {
  check_defined(a, "mean_all");
  if (a.size() == 0) throw ShapeError("mean_all: empty tensor");
  const Real n = static_cast<Real>(a.size());
  Real total = 0;
  for (Real v : a.data()) total += v;
  return make_result("mean_all", {1, 1}, {total / n}, {a}, [n](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (Real& v : g) v += self.grad[0] / n;
  });
}

Tensor sqrt_sum_rows(const Tensor& a) {
  check_defined(a, "sqrt_sum_rows");
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  std::vector<Real> value(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    Real s = 0;
    for (std::size_t c = 0; c < cols; ++c) s += a.data()[r * cols + c] * a.data()[r * cols + c];
    value[r] = std::sqrt(s);
  }
  return make_result("sqrt_sum_rows", {rows, 1}, std::move(value), {a}, [](Node& self) {
    Node& x = *self.inputs[0];
    auto& g = x.grad_buffer();
    const std::size_t cols = x.shape.cols;
    for (std::size_t r = 0; r < x.shape.rows; ++r) {
      const Real n = self.value[r];
      if (n == Real(0)) continue;  // minimal-norm subgradient
      const Real w = self.grad[r] / n;
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += w * x.value[r * cols + c];
    }
  });
}

}  // namespace cgnn::ad
