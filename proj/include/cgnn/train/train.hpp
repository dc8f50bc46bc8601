#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cgnn/ad/adam.hpp"
#include "cgnn/ad/tensor.hpp"
#include "cgnn/core/types.hpp"
#include "cgnn/model/cgnn.hpp"

namespace cgnn::train {

// L_d = (1/N) sum_n |y_n - ŷ_n|_2 on [N x 3] tensors (mm).
ad::Tensor loss_distance(const ad::Tensor& y, const ad::Tensor& y_hat);

// alpha * L_d + (δF_true - δF_pred)^2
ad::Tensor loss_total(const ad::Tensor& y, const ad::Tensor& y_hat, const ad::Tensor& force_true,
                      const ad::Tensor& force_pred, double alpha);

struct SampleLoss {
  ad::Tensor total;
  double distance = 0.0;     // L_d, mm
  double force_error = 0.0;  // δF_pred - δF_true, N
};

// Forward pass plus loss for one sample.
SampleLoss sample_loss(const model::Cgnn& net, const Sample& sample, double alpha);

enum class TrainMode { kPretrain, kFinetune, kFromScratch };
const char* to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& text);

struct TrainConfig {
  std::size_t epochs = 250;
  std::size_t batch_size = 32;
  double lr = 1e-4;
  double alpha = 88.0;
  double augment_fraction = 0.0;  // 0 disables point subsampling
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::kFromScratch;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_mean_ld = 0.0;
  double train_force_abs = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  model::Cgnn best;
  std::size_t best_epoch = 0;  // 0 = the initial weights
  double best_val_loss = 0.0;
  std::vector<EpochRecord> history;
  ad::AdamState optimizer;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mean total loss over `samples` without recording gradients.
double mean_total_loss(const model::Cgnn& net, const std::vector<Sample>& samples, double alpha);

// Minibatch Adam training. Each batch accumulates per-sample gradients of
// loss / batch_len and takes one optimizer step. The initial weights count
// as epoch 0 for best-validation selection.
TrainResult fit(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                const TrainConfig& config, const model::Cgnn& init,
                const EpochCallback& on_epoch = {});

// Continue training every weight of `checkpoint` on target-domain data with a
// fresh optimizer state. Throws ConfigError if `expected` differs from the
// checkpoint's model configuration.
TrainResult finetune(const model::Cgnn& checkpoint, const model::ModelConfig& expected,
                     const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                     TrainConfig config, const EpochCallback& on_epoch = {});

struct SampleMetrics {
  SampleMeta meta;
  double mean_ld = 0.0;  // mm
  double max_ld = 0.0;   // mm
  double force_true = 0.0;
  double force_pred = 0.0;
  double force_abs_error = 0.0;
  double force_sq_error = 0.0;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

struct Metrics {
  std::size_t samples = 0;
  double force_mse = 0.0;  // N^2
  MeanStd force_abs_error;
  MeanStd mean_ld;
  MeanStd max_ld;
  std::vector<SampleMetrics> per_sample;
};

struct PredictorOutput {
  DisplacementField displacement;
  double force_change = 0.0;
};
using Predictor = std::function<PredictorOutput(const Sample&)>;

Predictor model_predictor(const model::Cgnn& net);
// δx = 0, δF = 0
Predictor identity_predictor();

Metrics evaluate(const std::vector<Sample>& test_set, const Predictor& predictor);
Metrics evaluate(const std::vector<Sample>& test_set, const model::Cgnn& net);

MeanStd mean_std(const std::vector<double>& values);

}  // namespace cgnn::train
