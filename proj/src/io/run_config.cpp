#include "cgnn/io/run_config.hpp"

#include <functional>

#include "cgnn/core/error.hpp"
#include "cgnn/core/file_util.hpp"
#include "cgnn/core/kv.hpp"

namespace cgnn::io {

namespace {

struct Field {
  std::string key;  // "section.name"
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Access>
Field real(std::string key, Access access) {
  return {std::move(key),
          [access](RunConfig& c, const std::string& k, const std::string& v) {
            access(c) = kv::to_double(k, v);
          },
          [access](const RunConfig& c) {
            return kv::format_double(access(c));
          }};
}

template <typename Access>
Field count(std::string key, Access access) {
  return {std::move(key),
          [access](RunConfig& c, const std::string& k, const std::string& v) {
            access(c) = kv::to_size(k, v);
          },
          [access](const RunConfig& c) { return std::to_string(access(c)); }};
}

template <typename Access>
Field seed(std::string key, Access access) {
  return {std::move(key),
          [access](RunConfig& c, const std::string& k, const std::string& v) {
            access(c) = kv::to_u64(k, v);
          },
          [access](const RunConfig& c) { return std::to_string(access(c)); }};
}

template <typename Access>
Field flag(std::string key, Access access) {
  return {std::move(key),
          [access](RunConfig& c, const std::string& k, const std::string& v) {
            access(c) = kv::to_bool(k, v);
          },
          [access](const RunConfig& c) {
            return std::string(access(c) ? "true" : "false");
          }};
}

template <typename Access>
Field list(std::string key, Access access) {
  return {std::move(key),
          [access](RunConfig& c, const std::string& k, const std::string& v) {
            access(c) = kv::to_size_list(k, v);
          },
          [access](const RunConfig& c) {
            return "[" + kv::format_list(access(c)) + "]";
          }};
}

#define CGNN_FIELD(kind, key, member) \
  kind(key, [](auto& c) -> auto& { return c.member; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      CGNN_FIELD(real, "msm.side_length_mm", msm.side_length_mm),
      CGNN_FIELD(count, "msm.grid_n", msm.grid_n),
      CGNN_FIELD(real, "msm.mass", msm.mass),
      CGNN_FIELD(real, "msm.damping", msm.damping),
      CGNN_FIELD(real, "msm.dt", msm.dt),
      CGNN_FIELD(real, "msm.k_between", msm.k_between),
      CGNN_FIELD(real, "msm.k_fixed", msm.k_fixed),
      CGNN_FIELD(real, "msm.f_max", msm.f_max),
      CGNN_FIELD(count, "msm.n_t", msm.n_t),
      CGNN_FIELD(count, "msm.n_n", msm.n_n),
      CGNN_FIELD(count, "msm.n_directions", msm.n_directions),
      CGNN_FIELD(count, "msm.n_locations", msm.n_locations),
      CGNN_FIELD(real, "msm.cone_half_angle_deg", msm.cone_half_angle_deg),
      CGNN_FIELD(real, "msm.stability_v", msm.stability_v),
      CGNN_FIELD(real, "msm.stability_f", msm.stability_f),
      CGNN_FIELD(count, "msm.max_steps_per_state", msm.max_steps_per_state),
      CGNN_FIELD(count, "msm.marker_grid", msm.marker_grid),

      CGNN_FIELD(seed, "data.seed", data.seed),
      CGNN_FIELD(count, "data.multi_pairs", data.multi_pairs),
      CGNN_FIELD(count, "data.threads", data.threads),

      CGNN_FIELD(count, "model.k", model.k),
      Field{"model.aggregation",
            [](RunConfig& c, const std::string&, const std::string& v) { c.model.aggregation = v; },
            [](const RunConfig& c) { return "\"" + c.model.aggregation + "\""; }},
      CGNN_FIELD(list, "model.edge_widths", model.edge_widths),
      CGNN_FIELD(list, "model.displacement_widths", model.displacement_widths),
      CGNN_FIELD(list, "model.force_widths", model.force_widths),
      CGNN_FIELD(flag, "model.centered_edge_features", model.centered_edge_features),
      CGNN_FIELD(real, "model.input_scale", model.input_scale),
      CGNN_FIELD(real, "model.displacement_scale", model.displacement_scale),
      CGNN_FIELD(real, "model.force_scale", model.force_scale),

      CGNN_FIELD(count, "train.epochs", train.epochs),
      CGNN_FIELD(count, "train.batch_size", train.batch_size),
      CGNN_FIELD(real, "train.lr", train.lr),
      CGNN_FIELD(real, "train.alpha", train.alpha),
      CGNN_FIELD(real, "train.augment_fraction", train.augment_fraction),
      CGNN_FIELD(seed, "train.seed", train.seed),
      Field{"train.mode",
            [](RunConfig& c, const std::string&, const std::string& v) {
              c.train.mode = train::parse_train_mode(v);
            },
            [](const RunConfig& c) { return "\"" + std::string(train::to_string(c.train.mode)) + "\""; }},

      CGNN_FIELD(list, "split.ratios", split.ratios),
      CGNN_FIELD(seed, "split.seed", split.seed),
      CGNN_FIELD(count, "split.max_train_locations", split.max_train_locations),
  };
  return table;
}

#undef CGNN_FIELD

const Field& find(const std::string& key) {
  for (const Field& f : fields()) {
    if (f.key == key) return f;
  }
  std::string known;
  for (const Field& f : fields()) known += (known.empty() ? "" : ", ") + f.key;
  throw ConfigError("unknown config key '" + key + "' (known: " + known + ")");
}

std::string section_text(const RunConfig& c, const std::string& section) {
  std::string out = "[" + section + "]\n";
  const std::string prefix = section + ".";
  for (const Field& f : fields()) {
    if (f.key.compare(0, prefix.size(), prefix) == 0) {
      out += f.key.substr(prefix.size()) + " = " + f.get(c) + "\n";
    }
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  msm.validate();
  model.validate();
  train.validate();
  if (split.ratios.size() != 3) throw ConfigError("split.ratios: expected train, val, test");
  if (split.ratios[0] == 0 || split.ratios[1] == 0) {
    throw ConfigError("split.ratios: train and validation shares must be positive");
  }
  if (data.multi_pairs == 0) throw ConfigError("data.multi_pairs must be >= 1");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  find(key).set(*this, key, value);
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const char* section : {"msm", "data", "model", "train", "split"}) {
    if (!out.empty()) out += "\n";
    out += section_text(*this, section);
  }
  return out;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& source) {
  RunConfig c;
  for (const auto& [key, value] : kv::parse(text, source)) c.set(key, value);
  return c;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.push_back(f.key);
  return out;
}

void apply_preset(RunConfig& config, const std::string& name) {
  if (name == "desk") {
    config.msm.grid_n = 16;
    config.msm.n_locations = 20;
    config.msm.n_directions = 3;
    // About 40 updates per epoch instead of ~700 on the full set.
    config.train.lr = 1e-3;
  } else if (name == "target") {
    config.msm.grid_n = 16;
    config.msm.n_locations = 20;
    config.msm.n_directions = 3;
    config.msm.k_between = 60.0;
    config.msm.k_fixed = 35.0;
    config.msm.marker_grid = 5;
    config.split.ratios = {12, 3, 5};
    config.train.lr = 1e-3;
  } else {
    std::string known;
    for (const std::string& p : preset_names()) known += (known.empty() ? "" : ", ") + p;
    throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
  }
}

std::vector<std::string> preset_names() { return {"desk", "target"}; }

std::string msm_text(const msm::MsmConfig& config) {
  RunConfig c;
  c.msm = config;
  return section_text(c, "msm");
}

std::string msm_hash(const msm::MsmConfig& config) { return hex64(fnv1a64(msm_text(config))); }

msm::MsmConfig parse_msm_text(const std::string& text, const std::string& source) {
  RunConfig c;
  for (const auto& [key, value] : kv::parse(text, source)) {
    if (key.compare(0, 4, "msm.") != 0) {
      throw ConfigError(source + ": unexpected key '" + key + "' in simulator section");
    }
    c.set(key, value);
  }
  return c.msm;
}

}  // namespace cgnn::io
