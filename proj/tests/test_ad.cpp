// Built against the 64-bit scalar library so finite differences are tight.
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "cgnn/ad/adam.hpp"
#include "cgnn/ad/tensor.hpp"
#include "cgnn/core/error.hpp"
#include "cgnn/core/rng.hpp"

using namespace cgnn;
using namespace cgnn::ad;

static_assert(std::is_same_v<Real, double>);

namespace {

Tensor random_tensor(Rng& rng, Shape s, bool grad = true, double lo = -1.0, double hi = 1.0) {
  std::vector<Real> v(s.size());
  for (Real& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(s, std::move(v), grad);
}

using Op = std::function<Tensor(const std::vector<Tensor>&)>;

// Contracts op(inputs) with fixed random weights, then compares the reverse
// sweep against central differences on every input entry.
double max_gradient_error(const Op& op, std::vector<Tensor> inputs, Rng& rng) {
  const Tensor probe = op(inputs);
  const Tensor w = random_tensor(rng, probe.shape(), false);
  auto objective = [&](const std::vector<Tensor>& in) { return sum_all(mul(op(in), w)); };

  const Tensor loss = objective(inputs);
  backward(loss);
  const double h = 1e-6;
  double worst = 0.0;
  for (Tensor& x : inputs) {
    const std::vector<Real> analytic(x.grad().begin(), x.grad().end());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const Real keep = x.data()[i];
      x.mutable_data()[i] = keep + h;
      double up;
      double down;
      {
        NoGradGuard g;
        up = objective(inputs).item();
        x.mutable_data()[i] = keep - h;
        down = objective(inputs).item();
      }
      x.mutable_data()[i] = keep;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - analytic[i]) / std::max(1.0, std::abs(fd)));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("forward values of each operator") {
  const Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  const Tensor b = Tensor::from({2, 2}, {5, 6, 7, 8});
  const Tensor ab = matmul(a, b);
  CHECK(std::vector<Real>(ab.data().begin(), ab.data().end()) == std::vector<Real>{19, 22, 43, 50});
  const Tensor row = Tensor::from({1, 2}, {10, 20});
  CHECK(add(a, row).at(1, 1) == 24);
  CHECK(sub(a, row).at(1, 0) == -7);
  CHECK(mul(a, b).at(0, 1) == 12);
  CHECK(scale(a, 0.5).at(1, 1) == 2);
  CHECK(relu(Tensor::from({1, 3}, {-1, 0, 2})).at(0, 2) == 2);
  CHECK(relu(Tensor::from({1, 3}, {-1, 0, 2})).at(0, 0) == 0);
  CHECK(square(a).at(1, 0) == 9);
  CHECK(gather_rows(a, {1, 1, 0}).at(1, 1) == 4);
  const Tensor m = scatter_mean(Tensor::from({3, 1}, {2, 4, 9}), {2, 2, 0}, 3);
  CHECK(m.at(0, 0) == 9);
  CHECK(m.at(1, 0) == 0);
  CHECK(m.at(2, 0) == 3);
  CHECK(reduce_mean(a, 0).at(0, 1) == 3);
  CHECK(reduce_mean(a, 1).at(1, 0) == 3.5);
  CHECK(reduce_max(a, 0).at(0, 0) == 3);
  CHECK(reduce_max(a, 1).at(0, 0) == 2);
  CHECK(mean_all(a).item() == 2.5);
  CHECK(sum_all(a).item() == 10);
  CHECK(sqrt_sum_rows(Tensor::from({2, 2}, {3, 4, 0, 0})).at(0, 0) == 5);
}

TEST_CASE("concat places parts side by side") {
  const Tensor a = Tensor::from({2, 1}, {1, 2});
  const Tensor b = Tensor::from({2, 2}, {3, 4, 5, 6});
  const Tensor c = concat({a, b});
  CHECK(c.shape() == Shape{2, 3});
  CHECK(std::vector<Real>(c.data().begin(), c.data().end()) == std::vector<Real>{1, 3, 4, 2, 5, 6});
}

TEST_CASE("reverse sweep agrees with central differences for every operator") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Rng rng(seed);
    auto t = [&](std::size_t r, std::size_t c) { return random_tensor(rng, {r, c}); };
    const double tol = 1e-7;
    CHECK(max_gradient_error([](auto& v) { return matmul(v[0], v[1]); }, {t(4, 3), t(3, 5)}, rng) < tol);
    CHECK(max_gradient_error([](auto& v) { return add(v[0], v[1]); }, {t(4, 3), t(4, 3)}, rng) < tol);
    CHECK(max_gradient_error([](auto& v) { return add(v[0], v[1]); }, {t(4, 3), t(1, 3)}, rng) < tol);
    CHECK(max_gradient_error([](auto& v) { return sub(v[0], v[1]); }, {t(4, 3), t(1, 3)}, rng) < tol);
    CHECK(max_gradient_error([](auto& v) { return mul(v[0], v[1]); }, {t(4, 3), t(4, 3)}, rng) < tol);
    CHECK(max_gradient_error([](auto& v) { return scale(v[0], -2.5); }, {t(3, 3)}, rng) < tol);
    CHECK(max_gradient_error([](auto& v) { return concat({v[0], v[1], v[0]}); }, {t(3, 2), t(3, 4)}, rng) < tol);
    CHECK(max_gradient_error([](auto& v) { return relu(v[0]); }, {t(5, 4)}, rng) < tol);
    CHECK(max_gradient_error([](auto& v) { return square(v[0]); }, {t(5, 4)}, rng) < tol);
    CHECK(max_gradient_error([](auto& v) { return gather_rows(v[0], {2, 0, 2, 1, 2}); }, {t(3, 4)}, rng) < tol);
    CHECK(max_gradient_error([](auto& v) { return scatter_mean(v[0], {0, 2, 2, 0, 2}, 4); }, {t(5, 3)}, rng) < tol);
    CHECK(max_gradient_error([](auto& v) { return reduce_mean(v[0], 0); }, {t(5, 3)}, rng) < tol);
    CHECK(max_gradient_error([](auto& v) { return reduce_mean(v[0], 1); }, {t(5, 3)}, rng) < tol);
    CHECK(max_gradient_error([](auto& v) { return reduce_max(v[0], 0); }, {t(5, 3)}, rng) < tol);
    CHECK(max_gradient_error([](auto& v) { return reduce_max(v[0], 1); }, {t(5, 3)}, rng) < tol);
    CHECK(max_gradient_error([](auto& v) { return mean_all(v[0]); }, {t(5, 3)}, rng) < tol);
    CHECK(max_gradient_error([](auto& v) { return sqrt_sum_rows(v[0]); }, {t(6, 3)}, rng) < tol);
    // A composite with shared subexpressions.
    CHECK(max_gradient_error(
              [](auto& v) {
                const Tensor h = relu(add(matmul(v[0], v[1]), v[2]));
                return sqrt_sum_rows(sub(gather_rows(h, {0, 1, 1, 3}), scatter_mean(h, {0, 0, 1, 1}, 4)));
              },
              {t(4, 3), t(3, 5), t(1, 5)}, rng) < tol);
  }
}

TEST_CASE("zero rows give a zero subgradient in the row norm") {
  Tensor x = Tensor::from({2, 3}, {0, 0, 0, 1, 2, 2}, true);
  backward(sum_all(sqrt_sum_rows(x)));
  CHECK(x.grad()[0] == 0);
  CHECK(x.grad()[1] == 0);
  CHECK(x.grad()[3] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("gradients accumulate across passes and the record is single-use") {
  Tensor x = Tensor::from({1, 2}, {1, 2}, true);
  const Tensor loss = sum_all(square(x));
  backward(loss);
  CHECK_THROWS_AS(backward(loss), Error);
  backward(sum_all(square(x)));
  CHECK(x.grad()[0] == 4);
  CHECK(x.grad()[1] == 8);
  x.zero_grad();
  CHECK_FALSE(x.has_grad());
  CHECK(x.grad()[1] == 0);
}

TEST_CASE("no-grad mode records nothing") {
  Tensor x = Tensor::from({1, 2}, {1, 2}, true);
  {
    NoGradGuard guard;
    const Tensor y = sum_all(square(x));
    CHECK_FALSE(y.requires_grad());
    CHECK_THROWS_AS(backward(y), Error);
  }
  CHECK(sum_all(square(x)).requires_grad());
}

TEST_CASE("shape errors") {
  const Tensor a = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(add(a, Tensor::zeros({2, 2})), ShapeError);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(gather_rows(a, {2}), ShapeError);
  CHECK_THROWS_AS(scatter_mean(a, {0, 5}, 3), ShapeError);
  CHECK_THROWS_AS(backward(sum_all(a).detach().clone()), Error);
  CHECK_THROWS_AS(backward(a), ShapeError);
}

TEST_CASE("adam follows the bias-corrected update") {
  Tensor w = Tensor::from({1, 2}, {1.0, -3.0}, true);
  std::vector<Tensor> params{w};
  AdamState s;
  s.lr = 0.1;
  const std::vector<std::vector<double>> grads = {{0.5, 2.0}, {-1.0, 2.0}, {0.25, 0.0}};
  std::vector<double> m(2, 0.0), v(2, 0.0), expect{1.0, -3.0};
  for (std::size_t t = 0; t < grads.size(); ++t) {
    zero_grads(params);
    for (std::size_t i = 0; i < 2; ++i) params[0].mutable_grad()[i] = grads[t][i];
    adam_step(params, s);
    for (std::size_t i = 0; i < 2; ++i) {
      const double g = grads[t][i];
      m[i] = 0.9 * m[i] + 0.1 * g;
      v[i] = 0.999 * v[i] + 0.001 * g * g;
      const double mh = m[i] / (1 - std::pow(0.9, double(t + 1)));
      const double vh = v[i] / (1 - std::pow(0.999, double(t + 1)));
      expect[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
      CHECK(w.data()[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    }
  }
  CHECK(s.step == 3);
  // The first step moves each weight by almost exactly lr.
  CHECK(expect[0] < 1.0);
}
