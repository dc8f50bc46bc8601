#include "cgnn/model/cgnn.hpp"

#include <cmath>
#include <map>

#include "cgnn/core/error.hpp"
#include "cgnn/core/file_util.hpp"
#include "cgnn/core/kv.hpp"

namespace cgnn::model {

using ad::Real;
using ad::Shape;
using ad::Tensor;

namespace {

constexpr std::size_t kConditionWidth = 6;
constexpr const char* kManifestFormat = "cgnn-model/1";

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  std::vector<Real> values(shape.size());
  for (Real& v : values) v = static_cast<Real>(rng.uniform(-bound, bound));
  return Tensor::from(shape, std::move(values), true);
}

Linear make_linear(std::size_t in, std::size_t out, Rng& rng, bool zero) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in));
  Linear l;
  l.weight = zero ? Tensor::zeros({in, out}, true) : uniform_tensor({in, out}, bound, rng);
  l.bias = Tensor::zeros({1, out}, true);
  return l;
}

Tensor mlp(const std::vector<Linear>& layers, Tensor h) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (i + 1 < layers.size()) h = ad::relu(h);
  }
  return h;
}

std::size_t feature_width(const ModelConfig& c) {
  std::size_t w = kConditionWidth;
  for (std::size_t e : c.edge_widths) w += e;
  return w;
}

}  // namespace

void ModelConfig::validate() const {
  if (k < 1) throw ConfigError("ModelConfig: k must be >= 1");
  if (aggregation != "mean") {
    throw ConfigError("ModelConfig: aggregation '" + aggregation + "' unsupported (use mean)");
  }
  if (edge_widths.size() != 3) throw ConfigError("ModelConfig: exactly three edge-conv widths required");
  auto positive = [](const std::vector<std::size_t>& ws, const char* name) {
    for (std::size_t w : ws) {
      if (w == 0) throw ConfigError(std::string("ModelConfig: ") + name + " widths must be positive");
    }
  };
  positive(edge_widths, "edge");
  positive(displacement_widths, "displacement");
  positive(force_widths, "force");
  if (force_widths.size() != 4 || force_widths.back() != 1) {
    throw ConfigError("ModelConfig: force head needs four linear layers ending in width 1");
  }
  for (double s : {input_scale, displacement_scale, force_scale}) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("ModelConfig: scales must be positive");
  }
}

std::string ModelConfig::manifest() const {
  std::string out;
  out += "format = " + std::string(kManifestFormat) + "\n";
  out += "k = " + std::to_string(k) + "\n";
  out += "aggregation = " + aggregation + "\n";
  out += "edge_widths = " + kv::format_list(edge_widths) + "\n";
  out += "displacement_widths = " + kv::format_list(displacement_widths) + "\n";
  out += "force_widths = " + kv::format_list(force_widths) + "\n";
  out += std::string("centered_edge_features = ") + (centered_edge_features ? "true" : "false") + "\n";
  out += "input_scale = " + kv::format_double(input_scale) + "\n";
  out += "displacement_scale = " + kv::format_double(displacement_scale) + "\n";
  out += "force_scale = " + kv::format_double(force_scale) + "\n";
  return out;
}

std::string ModelConfig::hash() const { return hex64(fnv1a64(manifest())); }

ModelConfig ModelConfig::from_manifest(const std::string& text) {
  const auto kvs = kv::parse(text, "model manifest");
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kvs.find(key);
    if (it == kvs.end()) throw ConfigError("model manifest: missing key '" + key + "'");
    return it->second;
  };
  if (get("format") != kManifestFormat) {
    throw ConfigError("model manifest: unsupported format '" + get("format") + "'");
  }
  ModelConfig c;
  c.k = kv::to_size("k", get("k"));
  c.aggregation = get("aggregation");
  c.edge_widths = kv::to_size_list("edge_widths", get("edge_widths"));
  c.displacement_widths = kv::to_size_list("displacement_widths", get("displacement_widths"));
  c.force_widths = kv::to_size_list("force_widths", get("force_widths"));
  c.centered_edge_features = kv::to_bool("centered_edge_features", get("centered_edge_features"));
  c.input_scale = kv::to_double("input_scale", get("input_scale"));
  c.displacement_scale = kv::to_double("displacement_scale", get("displacement_scale"));
  c.force_scale = kv::to_double("force_scale", get("force_scale"));
  c.validate();
  return c;
}

Tensor Linear::operator()(const Tensor& x) const {
  return ad::add(ad::matmul(x, weight), bias);
}

Tensor edge_conv(const Tensor& features, const EdgeMlp& h, std::size_t k, bool centered,
                 graph::EdgeList* edges_out) {
  const std::size_t n = features.rows();
  if (n <= k) {
    throw ConfigError("edge_conv: " + std::to_string(n) + " points cannot form a " +
                      std::to_string(k) + "-NN graph; lower k or provide more points");
  }
  graph::EdgeList edges = graph::knn_graph<Real>(features.data(), n, features.cols(), k);

  const Tensor center = ad::matmul(features, h.w_center);
  const Tensor offset = ad::matmul(features, h.w_offset);
  // W_c x_i + W_o (x_j - x_i) = (W_c - W_o) x_i + W_o x_j
  const Tensor self_part = centered ? ad::sub(center, offset) : center;
  const Tensor pre = ad::add(ad::add(ad::gather_rows(self_part, edges.target),
                                     ad::gather_rows(offset, edges.source)),
                             h.bias);
  Tensor out = ad::scatter_mean(ad::relu(pre), edges.target, n);
  if (edges_out) *edges_out = std::move(edges);
  return out;
}

Cgnn::Cgnn(ModelConfig config, Rng& rng, bool zero_final_layers) : config_(std::move(config)) {
  config_.validate();
  std::size_t in = 3;
  for (std::size_t l = 0; l < 3; ++l) {
    const std::size_t w = config_.edge_widths[l];
    const double bound = std::sqrt(6.0 / static_cast<double>(2 * in));
    edge_[l].w_center = uniform_tensor({in, w}, bound, rng);
    edge_[l].w_offset = uniform_tensor({in, w}, bound, rng);
    edge_[l].bias = Tensor::zeros({1, w}, true);
    in = w;
  }
  const std::size_t g = feature_width(config_);
  in = g;
  for (std::size_t w : config_.displacement_widths) {
    displacement_head_.push_back(make_linear(in, w, rng, false));
    in = w;
  }
  displacement_head_.push_back(make_linear(in, 3, rng, zero_final_layers));
  in = g;
  for (std::size_t i = 0; i < config_.force_widths.size(); ++i) {
    const bool last = i + 1 == config_.force_widths.size();
    force_head_.push_back(make_linear(in, config_.force_widths[i], rng, last && zero_final_layers));
    in = config_.force_widths[i];
  }
  register_all();
}

void Cgnn::register_all() {
  params_.clear();
  names_.clear();
  for (std::size_t l = 0; l < 3; ++l) {
    const std::string p = "edge" + std::to_string(l + 1) + ".";
    params_.push_back(edge_[l].w_center);
    names_.push_back(p + "w_center");
    params_.push_back(edge_[l].w_offset);
    names_.push_back(p + "w_offset");
    params_.push_back(edge_[l].bias);
    names_.push_back(p + "bias");
  }
  for (std::size_t i = 0; i < displacement_head_.size(); ++i) {
    params_.push_back(displacement_head_[i].weight);
    names_.push_back("displacement." + std::to_string(i) + ".weight");
    params_.push_back(displacement_head_[i].bias);
    names_.push_back("displacement." + std::to_string(i) + ".bias");
  }
  for (std::size_t i = 0; i < force_head_.size(); ++i) {
    params_.push_back(force_head_[i].weight);
    names_.push_back("force." + std::to_string(i) + ".weight");
    params_.push_back(force_head_[i].bias);
    names_.push_back("force." + std::to_string(i) + ".bias");
  }
}

std::size_t Cgnn::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor& p : params_) n += p.size();
  return n;
}

std::vector<ad::NamedArray> Cgnn::to_arrays() const {
  std::vector<ad::NamedArray> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ad::NamedArray a;
    a.name = names_[i];
    a.shape = {params_[i].rows(), params_[i].cols()};
    a.values.assign(params_[i].data().begin(), params_[i].data().end());
    out.push_back(std::move(a));
  }
  return out;
}

Cgnn Cgnn::from_arrays(ModelConfig config, const std::vector<ad::NamedArray>& arrays) {
  Rng unused(0);
  Cgnn model(std::move(config), unused, true);
  std::map<std::string, const ad::NamedArray*> by_name;
  for (const ad::NamedArray& a : arrays) by_name[a.name] = &a;
  for (std::size_t i = 0; i < model.params_.size(); ++i) {
    const auto it = by_name.find(model.names_[i]);
    if (it == by_name.end()) {
      throw ConfigError("checkpoint lacks parameter '" + model.names_[i] +
                        "' (model config mismatch)");
    }
    const ad::NamedArray& a = *it->second;
    Tensor& p = model.params_[i];
    if (a.shape.size() != 2 || a.shape[0] != p.rows() || a.shape[1] != p.cols()) {
      throw ConfigError("checkpoint parameter '" + a.name + "' has the wrong shape for " +
                        p.shape().str() + " (model config mismatch)");
    }
    std::span<Real> dst = p.mutable_data();
    for (std::size_t v = 0; v < dst.size(); ++v) {
      if (!std::isfinite(a.values[v])) throw IoError("checkpoint parameter '" + a.name + "' is not finite");
      dst[v] = static_cast<Real>(a.values[v]);
    }
  }
  return model;
}

Cgnn Cgnn::clone() const {
  Cgnn copy;
  copy.config_ = config_;
  for (std::size_t l = 0; l < 3; ++l) {
    copy.edge_[l] = {edge_[l].w_center.clone(), edge_[l].w_offset.clone(), edge_[l].bias.clone()};
  }
  for (const Linear& l : displacement_head_) copy.displacement_head_.push_back({l.weight.clone(), l.bias.clone()});
  for (const Linear& l : force_head_) copy.force_head_.push_back({l.weight.clone(), l.bias.clone()});
  copy.register_all();
  return copy;
}

Output Cgnn::forward(const PointCloud& x, const Condition& c) const {
  const std::size_t n = x.size();
  if (n <= config_.k) {
    throw ConfigError("cgnn: " + std::to_string(n) + " points cannot form a " +
                      std::to_string(config_.k) + "-NN graph; lower k or provide more points");
  }
  Output out;
  const Tensor x0 = to_tensor(x, config_.input_scale);
  std::array<Tensor, 3> f;
  Tensor h = x0;
  for (std::size_t l = 0; l < 3; ++l) {
    graph::EdgeList edges;
    f[l] = edge_conv(h, edge_[l], config_.k, config_.centered_edge_features, &edges);
    out.edges_per_layer[l] = edges.size();
    h = f[l];
  }
  const std::array<double, 6> flat = c.flat();
  std::vector<Real> cond(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) cond[i] = static_cast<Real>(flat[i] * config_.input_scale);
  const Tensor condition = Tensor::from({1, kConditionWidth}, std::move(cond));
  const Tensor broadcast = ad::gather_rows(condition, ad::Index(n, 0));
  const Tensor g = ad::concat({f[0], f[1], f[2], broadcast});

  out.displacement = ad::scale(mlp(displacement_head_, g), static_cast<Real>(config_.displacement_scale));
  out.force_change = ad::scale(mlp(force_head_, ad::reduce_max(g, 0)), static_cast<Real>(config_.force_scale));
  return out;
}

Prediction Cgnn::predict(const PointCloud& x, const Condition& c) const {
  ad::NoGradGuard no_grad;
  const Output out = forward(x, c);
  DisplacementField d(to_vec3(out.displacement, 1.0));
  PointCloud y = apply_displacement(x, d);
  return {std::move(y), std::move(d), static_cast<double>(out.force_change.item())};
}

Tensor to_tensor(std::span<const Vec3> rows, double scale) {
  std::vector<Real> v(rows.size() * 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    v[3 * i] = static_cast<Real>(rows[i].x * scale);
    v[3 * i + 1] = static_cast<Real>(rows[i].y * scale);
    v[3 * i + 2] = static_cast<Real>(rows[i].z * scale);
  }
  return Tensor::from({rows.size(), 3}, std::move(v));
}

Tensor to_tensor(const PointCloud& x, double scale) { return to_tensor(x.points(), scale); }

std::vector<Vec3> to_vec3(const Tensor& t, double scale) {
  if (t.cols() != 3) throw ShapeError("to_vec3: expected [N x 3], got " + t.shape().str());
  std::vector<Vec3> out(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    out[i] = {static_cast<double>(t.at(i, 0)) * scale, static_cast<double>(t.at(i, 1)) * scale,
              static_cast<double>(t.at(i, 2)) * scale};
  }
  return out;
}

}  // namespace cgnn::model
