#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cgnn/ad/tensor.hpp"

namespace cgnn::ad {

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<Real>> m;  // one per parameter
  std::vector<std::vector<Real>> v;
};

// Bias-corrected Adam update of every parameter from its accumulated
// gradient. Moment buffers are sized on the first call. Parameters without a
// gradient are treated as having a zero gradient.
void adam_step(std::span<Tensor> params, AdamState& state);

void zero_grads(std::span<Tensor> params);

}  // namespace cgnn::ad
