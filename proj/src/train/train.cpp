#include "cgnn/train/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "cgnn/core/error.hpp"
#include "cgnn/train/dataset.hpp"

namespace cgnn::train {

using ad::Real;
using ad::Tensor;

Tensor loss_distance(const Tensor& y, const Tensor& y_hat) {
  if (y.shape() != y_hat.shape() || y.cols() != 3) {
    throw ShapeError("loss_distance: shape mismatch " + y.shape().str() + " vs " +
                     y_hat.shape().str());
  }
  return ad::mean_all(ad::sqrt_sum_rows(ad::sub(y_hat, y)));
}

Tensor loss_total(const Tensor& y, const Tensor& y_hat, const Tensor& force_true,
                  const Tensor& force_pred, double alpha) {
  const Tensor ld = loss_distance(y, y_hat);
  const Tensor lf = ad::square(ad::sub(force_pred, force_true));
  return ad::add(ad::scale(ld, static_cast<Real>(alpha)), lf);
}

SampleLoss sample_loss(const model::Cgnn& net, const Sample& sample, double alpha) {
  const model::Output out = net.forward(sample.input, sample.condition);
  const Tensor x = model::to_tensor(sample.input, 1.0);
  const Tensor y = model::to_tensor(sample.target(), 1.0);
  const Tensor y_hat = ad::add(x, out.displacement);
  const Tensor ld = loss_distance(y, y_hat);
  const Tensor force_true = Tensor::scalar(static_cast<Real>(sample.target_force_change));
  const Tensor lf = ad::square(ad::sub(out.force_change, force_true));
  SampleLoss result;
  result.total = ad::add(ad::scale(ld, static_cast<Real>(alpha)), lf);
  result.distance = static_cast<double>(ld.item());
  result.force_error = static_cast<double>(out.force_change.item()) - sample.target_force_change;
  return result;
}

const char* to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kPretrain:
      return "pretrain";
    case TrainMode::kFinetune:
      return "finetune";
    case TrainMode::kFromScratch:
      return "from-scratch";
  }
  return "?";
}

TrainMode parse_train_mode(const std::string& text) {
  if (text == "pretrain") return TrainMode::kPretrain;
  if (text == "finetune") return TrainMode::kFinetune;
  if (text == "from-scratch") return TrainMode::kFromScratch;
  throw ConfigError("unknown training mode '" + text + "' (pretrain | finetune | from-scratch)");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("TrainConfig: lr must be positive");
  if (!(alpha > 0.0)) throw ConfigError("TrainConfig: alpha must be positive");
  if (augment_fraction != 0.0 && !(augment_fraction > 0.0 && augment_fraction <= 1.0)) {
    throw ConfigError("TrainConfig: augment_fraction must be 0 (off) or in (0, 1]");
  }
}

double mean_total_loss(const model::Cgnn& net, const std::vector<Sample>& samples, double alpha) {
  if (samples.empty()) throw ConfigError("mean_total_loss: empty sample set");
  ad::NoGradGuard no_grad;
  double sum = 0.0;
  for (const Sample& s : samples) sum += static_cast<double>(sample_loss(net, s, alpha).total.item());
  return sum / static_cast<double>(samples.size());
}

TrainResult fit(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                const TrainConfig& config, const model::Cgnn& init, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw ConfigError("fit: empty training set");
  if (val_set.empty()) throw ConfigError("fit: empty validation set");

  model::Cgnn net = init.clone();
  std::vector<Tensor>& params = net.parameters();
  ad::AdamState optimizer;
  optimizer.lr = config.lr;

  TrainResult result{init.clone(), 0, mean_total_loss(init, val_set, config.alpha), {}, {}};
  const Rng root(config.seed);
  const std::size_t min_points = net.config().k + 1;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    Rng shuffle_rng = root.child(2 * epoch);
    Rng augment_rng = root.child(2 * epoch + 1);
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    double ld_sum = 0.0;
    double force_sum = 0.0;
    for (std::size_t begin = 0, batch = 0; begin < order.size(); begin += config.batch_size, ++batch) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const Real inv_len = Real(1) / static_cast<Real>(end - begin);
      ad::zero_grads(params);
      for (std::size_t i = begin; i < end; ++i) {
        const Sample& original = train_set[order[i]];
        const Sample sample = config.augment_fraction > 0.0
                                  ? augment_subsample(original, config.augment_fraction, min_points,
                                                      augment_rng)
                                  : original;
        SampleLoss sl = sample_loss(net, sample, config.alpha);
        const double total = static_cast<double>(sl.total.item());
        if (!std::isfinite(total)) {
          throw DivergenceError("training diverged: non-finite loss at epoch " +
                                std::to_string(epoch) + ", batch " + std::to_string(batch));
        }
        ad::backward(ad::scale(sl.total, inv_len));
        loss_sum += total;
        ld_sum += sl.distance;
        force_sum += std::abs(sl.force_error);
      }
      ad::adam_step(params, optimizer);
    }
    ad::zero_grads(params);

    EpochRecord record;
    record.epoch = epoch;
    const double n = static_cast<double>(train_set.size());
    record.train_loss = loss_sum / n;
    record.train_mean_ld = ld_sum / n;
    record.train_force_abs = force_sum / n;
    record.val_loss = mean_total_loss(net, val_set, config.alpha);
    if (!std::isfinite(record.val_loss)) {
      throw DivergenceError("training diverged: non-finite validation loss at epoch " +
                            std::to_string(epoch));
    }
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (record.val_loss < result.best_val_loss) {
      result.best_val_loss = record.val_loss;
      result.best_epoch = epoch;
      result.best = net.clone();
    }
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  result.optimizer = std::move(optimizer);
  return result;
}

TrainResult finetune(const model::Cgnn& checkpoint, const model::ModelConfig& expected,
                     const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                     TrainConfig config, const EpochCallback& on_epoch) {
  if (!(checkpoint.config() == expected)) {
    throw ConfigError("finetune: checkpoint model config " + checkpoint.config().hash() +
                      " does not match the requested config " + expected.hash());
  }
  config.mode = TrainMode::kFinetune;
  return fit(train_set, val_set, config, checkpoint, on_epoch);
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / n);
  return out;
}

Predictor model_predictor(const model::Cgnn& net) {
  return [&net](const Sample& s) {
    model::Prediction p = net.predict(s.input, s.condition);
    return PredictorOutput{std::move(p.displacement), p.force_change};
  };
}

Predictor identity_predictor() {
  return [](const Sample& s) {
    return PredictorOutput{DisplacementField(std::vector<Vec3>(s.input.size())), 0.0};
  };
}

Metrics evaluate(const std::vector<Sample>& test_set, const Predictor& predictor) {
  if (test_set.empty()) throw ConfigError("evaluate: empty test set");
  Metrics m;
  m.samples = test_set.size();
  std::vector<double> abs_err, mean_ld, max_ld;
  double sq_sum = 0.0;
  for (const Sample& s : test_set) {
    const PredictorOutput out = predictor(s);
    const PointCloud predicted = apply_displacement(s.input, out.displacement);
    const PointCloud target = s.target();
    SampleMetrics r;
    r.meta = s.meta;
    r.mean_ld = mean_euclidean_distance(target, predicted);
    r.max_ld = max_euclidean_distance(target, predicted);
    r.force_true = s.target_force_change;
    r.force_pred = out.force_change;
    r.force_abs_error = std::abs(out.force_change - s.target_force_change);
    r.force_sq_error = r.force_abs_error * r.force_abs_error;
    sq_sum += r.force_sq_error;
    abs_err.push_back(r.force_abs_error);
    mean_ld.push_back(r.mean_ld);
    max_ld.push_back(r.max_ld);
    m.per_sample.push_back(r);
  }
  m.force_mse = sq_sum / static_cast<double>(test_set.size());
  m.force_abs_error = mean_std(abs_err);
  m.mean_ld = mean_std(mean_ld);
  m.max_ld = mean_std(max_ld);
  return m;
}

Metrics evaluate(const std::vector<Sample>& test_set, const model::Cgnn& net) {
  return evaluate(test_set, model_predictor(net));
}

}  // namespace cgnn::train
