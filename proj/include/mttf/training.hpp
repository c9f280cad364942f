#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "mttf/key_value.hpp"
#include "mttf/losses.hpp"
#include "mttf/model.hpp"

namespace mttf {

// Training hyperparameters; read from the same key=value file as the model
// configuration.
struct TrainConfig {
  int epochs = 100;
  int steps_per_epoch = 100;
  int batch_size = 1;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::vector<int> milestones{60, 90};
  double gamma = 0.1;
  LossWeights weights;
  std::uint64_t seed = 0;
  int log_interval = 1;          // steps between CSV rows
  int checkpoint_interval = 10;  // epochs between checkpoints; 0 disables periodic checkpoints
  std::string feature_backend = "vgg19";  // vgg19 | random
  std::string vgg19_weights;              // converted checkpoint; required for vgg19
  std::string matting = "luminance";      // luminance | command
  double matting_threshold = 0.5;
  std::string matting_command;
  int perceptual_scales = 4;  // dyadic downscales 1/2 .. 1/2^n

  void validate() const;
  KeyValueMap to_key_values() const;
  static TrainConfig from_key_values(const KeyValueMap& kv);
};

// lr(epoch) = base * gamma^(number of milestones <= epoch).
double learning_rate_at(int epoch, const TrainConfig& config);

// A clip is T x 3 x r x r in [0, 1] at the model's largest resolution.
using Clip = torch::Tensor;

struct FramePairBatch {
  torch::Tensor key;    // B x 3 x r x r
  torch::Tensor inter;  // B x 3 x r x r
  std::vector<std::string> ids;  // "clip<c>:frame<t>" of each inter frame
};

// Uniform random (key, inter) pairs from uniformly chosen clips.
FramePairBatch sample_pairs(const std::vector<Clip>& clips, int batch_size, std::mt19937_64& rng);

struct MultiResLoss {
  int input_index = 0;                // sampled r_i
  std::vector<LossComponents> terms;  // one per generated route
  torch::Tensor total;                // sum of the weighted terms
};

// Samples the input resolution index uniformly from [0, N_s), analyzes the
// pair at that resolution and sums the weighted loss over every route's
// output against the inter frame resized to that route.
MultiResLoss multires_loss(MttfModel& model, const FramePairBatch& batch, FeatureBackend& backend,
                           MattingAdapter& matting, const LossWeights& weights, std::mt19937_64& rng,
                           const std::vector<double>& perceptual_scales = default_perceptual_scales());

struct TrainLogRow {
  int64_t step = 0;
  int epoch = 0;
  double perceptual = 0;
  double l1 = 0;
  double background = 0;
  double total = 0;
  double lr = 0;
};

std::string train_log_header();
std::string to_csv(const TrainLogRow& row);

std::shared_ptr<FeatureBackend> make_feature_backend(const TrainConfig& config);
std::unique_ptr<MattingAdapter> make_matting(const TrainConfig& config);

class Trainer {
 public:
  Trainer(MttfModel model, TrainConfig config, std::shared_ptr<FeatureBackend> backend,
          std::unique_ptr<MattingAdapter> matting);

  // One optimizer step at the current learning rate.
  TrainLogRow step(const std::vector<Clip>& clips);

  // Runs the whole schedule; writes CSV rows to log (if non-null), a
  // checkpoint to "<checkpoint_dir>/epoch_<n>.ckpt" every
  // checkpoint_interval epochs and "<checkpoint_dir>/final.ckpt" at the end.
  // Empty clip lists raise ConfigError.
  std::vector<TrainLogRow> train(const std::vector<Clip>& clips, std::ostream* log,
                                 const std::string& checkpoint_dir);

  void set_epoch(int epoch);
  MttfModel& model() { return model_; }
  torch::optim::Adam& optimizer() { return *optimizer_; }

 private:
  MttfModel model_;
  TrainConfig config_;
  std::shared_ptr<FeatureBackend> backend_;
  std::unique_ptr<MattingAdapter> matting_;
  std::unique_ptr<torch::optim::Adam> optimizer_;
  std::vector<double> scales_;
  std::mt19937_64 rng_;
  int epoch_ = 0;
  int64_t step_ = 0;
};

}  // namespace mttf
