#pragma once

#include <torch/torch.h>

#include <memory>
#include <string>
#include <vector>

#include "mttf/model.hpp"

namespace mttf {

// Maps an image batch B x 3 x H x W to five feature maps. Backends are frozen:
// their parameters never receive gradients, but gradients flow to the input.
class FeatureBackend : public torch::nn::Module {
 public:
  virtual std::vector<torch::Tensor> features(const torch::Tensor& images) = 0;
};

// Deterministic random-weight stand-in: five 3x3 conv + ReLU stages with
// 2x average pooling between stages while the map is at least 2 px.
class RandomFeatureBackend final : public FeatureBackend {
 public:
  explicit RandomFeatureBackend(std::uint64_t seed = 0, std::vector<int64_t> widths = {8, 16, 16, 32, 32});
  std::vector<torch::Tensor> features(const torch::Tensor& images) override;

 private:
  std::vector<torch::nn::Conv2d> convs_;
};

// VGG-19 convolutional trunk with the standard layer numbering, tapped at
// relu1_1, relu2_1, relu3_1, relu4_1 and relu5_1. Inputs in [0, 1] are
// normalized with the ImageNet mean and standard deviation. Pretrained
// weights load from a checkpoint written by tools/convert_vgg19.py.
class Vgg19FeatureBackend final : public FeatureBackend {
 public:
  Vgg19FeatureBackend();
  std::vector<torch::Tensor> features(const torch::Tensor& images) override;
  void load_weights(const std::string& path);

 private:
  torch::nn::Sequential trunk_{nullptr};
  torch::Tensor mean_, std_;
};

// Produces a soft foreground mask B x 1 x H x W in [0, 1] for frames B x 3 x H x W.
class MattingAdapter {
 public:
  virtual ~MattingAdapter() = default;
  virtual torch::Tensor matte(const torch::Tensor& frames) = 0;
};

// 1 where Rec.601 luma exceeds the threshold, else 0.
class LuminanceThresholdMatting final : public MattingAdapter {
 public:
  explicit LuminanceThresholdMatting(double threshold = 0.5) : threshold_(threshold) {}
  torch::Tensor matte(const torch::Tensor& frames) override;

 private:
  double threshold_;
};

// External matting tool: template receives {input} (a binary PPM) and writes
// {output} (a binary PPM whose channel mean is the mask).
class CommandMatting final : public MattingAdapter {
 public:
  explicit CommandMatting(std::string command_template);
  torch::Tensor matte(const torch::Tensor& frames) override;

 private:
  std::string template_;
};

struct LossWeights {
  double perceptual = 10.0;
  double l1 = 10.0;
  double background = 10.0;

  void validate() const;
};

struct LossComponents {
  torch::Tensor perceptual;
  torch::Tensor l1;
  torch::Tensor background;
};

// Per-scale factors applied before feature extraction; defaults to 1/2, 1/4,
// 1/8 and 1/16. Downscaled sizes are floored and never drop below 1 px.
std::vector<double> default_perceptual_scales();

// Sum over scales and backend layers of the mean absolute feature difference.
torch::Tensor perceptual_loss(const torch::Tensor& pred, const torch::Tensor& target, FeatureBackend& backend,
                              const std::vector<double>& scales = default_perceptual_scales());

torch::Tensor l1_loss(const torch::Tensor& pred, const torch::Tensor& target);

// Mean absolute difference between mask and matting(frame). Adapter failures
// raise TrainingError naming frame_id.
torch::Tensor background_loss(const torch::Tensor& mask, const torch::Tensor& frame, MattingAdapter& matting,
                              const std::string& frame_id = {});

torch::Tensor total_loss(const LossComponents& components, const LossWeights& weights);

}  // namespace mttf
