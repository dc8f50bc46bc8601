#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "cgnn/ad/checkpoint.hpp"
#include "cgnn/ad/tensor.hpp"
#include "cgnn/core/rng.hpp"
#include "cgnn/core/types.hpp"
#include "cgnn/graph/knn.hpp"

namespace cgnn::model {

struct ModelConfig {
  std::size_t k = 5;
  std::string aggregation = "mean";
  std::vector<std::size_t> edge_widths{64, 64, 64};
  std::vector<std::size_t> displacement_widths{256, 128};  // hidden; output width 3 is implicit
  std::vector<std::size_t> force_widths{128, 64, 32, 1};
  // true: h(x_i, x_j - x_i); false: h(x_i, x_j)
  bool centered_edge_features = true;
  // Fixed unit conversions around the network: inputs (points and condition)
  // are multiplied by input_scale, raw outputs by the output scales.
  double input_scale = 0.01;        // 1 / mm
  double displacement_scale = 10.0;  // mm
  double force_scale = 10.0;         // N

  void validate() const;
  // Canonical "key = value" text; stored as the checkpoint manifest.
  std::string manifest() const;
  std::string hash() const;
  static ModelConfig from_manifest(const std::string& text);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Linear {
  ad::Tensor weight;  // [in x out]
  ad::Tensor bias;    // [1 x out]

  ad::Tensor operator()(const ad::Tensor& x) const;
};

// Edge function h: relu(W_c x_i + W_o e_ij + b), where e_ij is x_j - x_i
// (centered) or x_j (literal). Equivalent to one linear layer on the
// concatenated edge feature [x_i, e_ij] with weight rows [W_c; W_o].
struct EdgeMlp {
  ad::Tensor w_center;  // [D_in x w]
  ad::Tensor w_offset;  // [D_in x w]
  ad::Tensor bias;      // [1 x w]
};

// One DynamicEdgeConv layer: kNN self-loop graph on `features` (no gradient
// through neighbour selection), edge messages h(x_i, x_j), mean over each
// node's k + 1 incoming edges. Writes the graph to `edges_out` when given.
ad::Tensor edge_conv(const ad::Tensor& features, const EdgeMlp& h, std::size_t k, bool centered,
                     graph::EdgeList* edges_out = nullptr);

struct Output {
  ad::Tensor displacement;  // [N x 3], mm
  ad::Tensor force_change;  // [1 x 1], N
  std::array<std::size_t, 3> edges_per_layer{};
};

struct Prediction {
  PointCloud deformed;
  DisplacementField displacement;
  double force_change = 0.0;
};

// The conditional graph network: three DynamicEdgeConv layers, per-point
// concatenation with the 6-vector condition, a per-point displacement MLP and
// a max-pooled global force head.
class Cgnn {
 public:
  // Kaiming-uniform init (bound sqrt(6 / fan_in)), zero biases. With
  // `zero_final_layers` the last displacement and force layers start at zero
  // so the untrained model predicts no deformation and no force.
  Cgnn(ModelConfig config, Rng& rng, bool zero_final_layers = true);

  static Cgnn from_arrays(ModelConfig config, const std::vector<ad::NamedArray>& arrays);
  std::vector<ad::NamedArray> to_arrays() const;

  const ModelConfig& config() const { return config_; }

  // Records history when gradients are enabled on this thread.
  Output forward(const PointCloud& x, const Condition& c) const;

  // Inference; ŷ = x + δx.
  Prediction predict(const PointCloud& x, const Condition& c) const;

  std::vector<ad::Tensor>& parameters() { return params_; }
  const std::vector<ad::Tensor>& parameters() const { return params_; }
  const std::vector<std::string>& parameter_names() const { return names_; }
  std::size_t parameter_count() const;

  // Independent copy of the weights.
  Cgnn clone() const;

  const std::array<EdgeMlp, 3>& edge_layers() const { return edge_; }

 private:
  Cgnn() = default;
  void register_all();

  ModelConfig config_;
  std::array<EdgeMlp, 3> edge_;
  std::vector<Linear> displacement_head_;
  std::vector<Linear> force_head_;
  std::vector<ad::Tensor> params_;
  std::vector<std::string> names_;
};

ad::Tensor to_tensor(const PointCloud& x, double scale);
ad::Tensor to_tensor(std::span<const Vec3> rows, double scale);
std::vector<Vec3> to_vec3(const ad::Tensor& t, double scale);

}  // namespace cgnn::model
