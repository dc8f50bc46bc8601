#include "cgnn/ad/adam.hpp"

#include <cmath>

#include "cgnn/core/error.hpp"

namespace cgnn::ad {

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (state.m.empty()) {
    for (const Tensor& p : params) {
      state.m.emplace_back(p.size(), Real(0));
      state.v.emplace_back(p.size(), Real(0));
    }
  }
  if (state.m.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state tracks " + std::to_string(state.m.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(state.beta1, t);
  const double bias2 = 1.0 - std::pow(state.beta2, t);
  const Real b1 = static_cast<Real>(state.beta1);
  const Real b2 = static_cast<Real>(state.beta2);

  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& param = params[p];
    auto& m = state.m[p];
    auto& v = state.v[p];
    if (m.size() != param.size()) {
      throw ShapeError("adam_step: moment buffer size mismatch for parameter " + std::to_string(p));
    }
    std::span<Real> w = param.mutable_data();
    std::span<const Real> g = param.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (Real(1) - b1) * g[i];
      v[i] = b2 * v[i] + (Real(1) - b2) * g[i] * g[i];
      const double m_hat = static_cast<double>(m[i]) / bias1;
      const double v_hat = static_cast<double>(v[i]) / bias2;
      w[i] -= static_cast<Real>(state.lr * m_hat / (std::sqrt(v_hat) + state.eps));
    }
  }
}

void zero_grads(std::span<Tensor> params) {
  for (Tensor& p : params) p.zero_grad();
}

}  // namespace cgnn::ad
