#include "cgnn/train/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cgnn/core/error.hpp"

namespace cgnn::train {

std::vector<Sample> DatasetModes::combined() const {
  std::vector<Sample> out = single_step;
  out.insert(out.end(), multi_step.begin(), multi_step.end());
  return out;
}

ObservedCloud observe(const std::vector<Vec3>& snapshot_mm, std::size_t location,
                      const msm::MsmConfig& config) {
  if (location >= snapshot_mm.size()) {
    throw ShapeError("observe: location " + std::to_string(location) + " outside snapshot of " +
                     std::to_string(snapshot_mm.size()) + " points");
  }
  ObservedCloud out;
  if (config.marker_grid == 0) {
    out.points = snapshot_mm;
    out.contact_index = location;
    return out;
  }
  for (std::size_t idx : msm::marker_indices(config)) out.points.push_back(snapshot_mm.at(idx));
  out.contact_index = out.points.size();
  out.points.push_back(snapshot_mm[location]);
  return out;
}

Sample make_sample(const msm::IndentationRun& run, std::size_t t_in, std::size_t t_out,
                   const msm::MsmConfig& config) {
  if (t_in >= run.positions_mm.size() || t_out >= run.positions_mm.size() || t_out <= t_in) {
    throw ConfigError("make_sample: invalid step pair (" + std::to_string(t_in) + ", " +
                      std::to_string(t_out) + ") for a run of " +
                      std::to_string(run.positions_mm.size()) + " states");
  }
  ObservedCloud in = observe(run.positions_mm[t_in], run.location, config);
  ObservedCloud out = observe(run.positions_mm[t_out], run.location, config);
  std::vector<Vec3> delta(in.points.size());
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = out.points[i] - in.points[i];
  const Condition condition{in.points[in.contact_index], out.points[out.contact_index]};
  SampleMeta meta{run.location, run.direction_index, t_in, t_out, in.contact_index};
  return Sample{PointCloud(std::move(in.points)), condition, DisplacementField(std::move(delta)),
                run.forces[t_out] - run.forces[t_in], meta};
}

DatasetModes build_modes(const std::vector<msm::IndentationRun>& runs, const msm::MsmConfig& config,
                         const Rng& rng, std::size_t multi_pairs_per_run) {
  DatasetModes modes;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const msm::IndentationRun& run = runs[r];
    const std::size_t states = run.positions_mm.size();
    if (states < 3) {
      throw ConfigError("build_modes: run at location " + std::to_string(run.location) + " has " +
                        std::to_string(states) + " states; multi-step pairs need at least 3");
    }
    for (std::size_t t = 0; t + 1 < states; ++t) {
      modes.single_step.push_back(make_sample(run, t, t + 1, config));
    }
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t t = 0; t < states; ++t) {
      for (std::size_t u = t + 2; u < states; ++u) pairs.emplace_back(t, u);
    }
    Rng pair_rng = rng.child(r);
    for (std::size_t p = 0; p < multi_pairs_per_run; ++p) {
      const auto [t, u] = pairs[pair_rng.below(pairs.size())];
      modes.multi_step.push_back(make_sample(run, t, u, config));
    }
  }
  return modes;
}

std::vector<std::size_t> split_counts(std::size_t locations, const std::vector<std::size_t>& ratios) {
  const std::size_t total = std::accumulate(ratios.begin(), ratios.end(), std::size_t{0});
  if (ratios.empty() || total == 0) throw ConfigError("split: ratios must have a positive sum");
  if (locations < total) {
    throw ConfigError("split: " + std::to_string(locations) + " locations cannot be split " +
                      "into parts summing to " + std::to_string(total));
  }
  std::vector<std::size_t> counts(ratios.size());
  std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (remainder numerator, part)
  std::size_t assigned = 0;
  for (std::size_t p = 0; p < ratios.size(); ++p) {
    counts[p] = locations * ratios[p] / total;
    assigned += counts[p];
    remainders.emplace_back(locations * ratios[p] % total, p);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < locations; ++i, ++assigned) ++counts[remainders[i].second];
  return counts;
}

Split split_by_location(const std::vector<msm::IndentationRun>& runs, const SplitSpec& spec) {
  if (spec.ratios.size() != 3) throw ConfigError("split: expected train:val:test ratios");
  std::set<std::size_t> unique;
  for (const auto& run : runs) unique.insert(run.location);
  std::vector<std::size_t> locations(unique.begin(), unique.end());
  const std::vector<std::size_t> counts = split_counts(locations.size(), spec.ratios);

  Rng rng(spec.seed);
  rng.shuffle(std::span<std::size_t>(locations));
  Split split;
  auto take = [&, offset = std::size_t{0}](std::size_t n) mutable {
    std::vector<std::size_t> part(locations.begin() + static_cast<std::ptrdiff_t>(offset),
                                  locations.begin() + static_cast<std::ptrdiff_t>(offset + n));
    offset += n;
    return part;
  };
  split.train_locations = take(counts[0]);
  split.val_locations = take(counts[1]);
  split.test_locations = take(counts[2]);
  if (spec.max_train_locations > 0 && split.train_locations.size() > spec.max_train_locations) {
    split.train_locations.resize(spec.max_train_locations);
  }
  for (auto* part : {&split.train_locations, &split.val_locations, &split.test_locations}) {
    std::sort(part->begin(), part->end());
  }
  auto contains = [](const std::vector<std::size_t>& v, std::size_t x) {
    return std::binary_search(v.begin(), v.end(), x);
  };
  for (const auto& run : runs) {
    if (contains(split.train_locations, run.location)) {
      split.train.push_back(run);
    } else if (contains(split.val_locations, run.location)) {
      split.val.push_back(run);
    } else if (contains(split.test_locations, run.location)) {
      split.test.push_back(run);
    }
  }
  return split;
}

Sample augment_subsample(const Sample& sample, double fraction, std::size_t min_points, Rng& rng) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("augment_subsample: fraction must lie in (0, 1]");
  }
  const std::size_t n = sample.input.size();
  // The epsilon keeps exact products such as 0.1 * 260 from rounding up.
  const std::size_t keep = std::min(
      n, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9)));
  if (keep < min_points) {
    throw ConfigError("augment_subsample: " + std::to_string(keep) + " of " + std::to_string(n) +
                      " points is too few for the kNN graph (need " + std::to_string(min_points) +
                      ")");
  }
  if (keep == n) return sample;

  const std::size_t contact = sample.meta.contact_index;
  std::vector<std::size_t> others;
  others.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (i != contact) others.push_back(i);
  }
  // Partial Fisher-Yates: the first keep - 1 slots become a uniform subset.
  for (std::size_t i = 0; i + 1 < keep; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(others.size() - i));
    std::swap(others[i], others[j]);
  }
  std::vector<std::size_t> chosen(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(keep - 1));
  chosen.push_back(contact);
  std::sort(chosen.begin(), chosen.end());

  std::vector<Vec3> points;
  std::vector<Vec3> deltas;
  SampleMeta meta = sample.meta;
  for (std::size_t r = 0; r < chosen.size(); ++r) {
    points.push_back(sample.input[chosen[r]]);
    deltas.push_back(sample.target_displacement[chosen[r]]);
    if (chosen[r] == contact) meta.contact_index = r;
  }
  return Sample{PointCloud(std::move(points)), sample.condition, DisplacementField(std::move(deltas)),
                sample.target_force_change, meta};
}

DatasetStats dataset_stats(const std::vector<Sample>& samples) {
  DatasetStats s;
  s.samples = samples.size();
  if (samples.empty()) return s;
  s.min_force_change = samples.front().target_force_change;
  s.max_force_change = samples.front().target_force_change;
  for (const Sample& sample : samples) {
    double sum = 0.0;
    for (const Vec3& d : sample.target_displacement.deltas()) sum += norm(d);
    s.mean_point_displacement += sum / static_cast<double>(sample.target_displacement.size());
    const double contact = norm(sample.target_displacement[sample.meta.contact_index]);
    s.mean_contact_displacement += contact;
    s.max_contact_displacement = std::max(s.max_contact_displacement, contact);
    s.min_force_change = std::min(s.min_force_change, sample.target_force_change);
    s.max_force_change = std::max(s.max_force_change, sample.target_force_change);
  }
  s.mean_point_displacement /= static_cast<double>(samples.size());
  s.mean_contact_displacement /= static_cast<double>(samples.size());
  return s;
}

}  // namespace cgnn::train
