#pragma once

// Building blocks shared by the factorizer, the motion estimator and the
// generators.

#include <torch/torch.h>

namespace mttf::nn {

// GroupNorm with the largest group count <= 8 that divides `channels`.
torch::nn::GroupNorm make_group_norm(int64_t channels);

// conv3x3 -> GroupNorm -> LeakyReLU(0.2).
struct ConvNormActImpl : torch::nn::Module {
  ConvNormActImpl(int64_t in_channels, int64_t out_channels, int64_t stride = 1);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d conv{nullptr};
  torch::nn::GroupNorm norm{nullptr};
};
TORCH_MODULE(ConvNormAct);

// Nearest-neighbour 2x upsampling followed by ConvNormAct.
struct UpBlockImpl : torch::nn::Module {
  UpBlockImpl(int64_t in_channels, int64_t out_channels);
  torch::Tensor forward(const torch::Tensor& x);

  ConvNormAct body{nullptr};
};
TORCH_MODULE(UpBlock);

// Stride-2 ConvNormAct.
struct DownBlockImpl : torch::nn::Module {
  DownBlockImpl(int64_t in_channels, int64_t out_channels);
  torch::Tensor forward(const torch::Tensor& x);

  ConvNormAct body{nullptr};
};
TORCH_MODULE(DownBlock);

// Residual block that keeps the feature size: x + conv(act(norm(conv(x)))).
struct SameBlockImpl : torch::nn::Module {
  explicit SameBlockImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

  ConvNormAct first{nullptr};
  torch::nn::Conv2d second{nullptr};
};
TORCH_MODULE(SameBlock);

// Two-level U-Net: stem, 2x down, bottleneck, 2x up, skip concatenation with
// the stem output, fusion conv. Output has `base_channels` channels at the
// input size; task heads are attached by the owner. Input size must be even.
struct UNetImpl : torch::nn::Module {
  UNetImpl(int64_t in_channels, int64_t base_channels);
  torch::Tensor forward(const torch::Tensor& x);

  int64_t out_channels() const { return base_channels_; }

  ConvNormAct stem{nullptr};
  DownBlock down{nullptr};
  ConvNormAct bottleneck{nullptr};
  UpBlock up{nullptr};
  ConvNormAct fuse{nullptr};

 private:
  int64_t base_channels_;
};
TORCH_MODULE(UNet);

// Generalized divisive normalization:
//   y_c = x_c / sqrt(beta_c + sum_j gamma_cj * x_j^2)
// with beta = beta_raw^2 + 1e-6 and gamma = gamma_raw^2 to keep both
// non-negative.
struct GdnImpl : torch::nn::Module {
  explicit GdnImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

  torch::Tensor beta_raw;
  torch::Tensor gamma_raw;
};
TORCH_MODULE(Gdn);

torch::nn::Conv2d make_conv(int64_t in_channels, int64_t out_channels, int64_t kernel, int64_t stride = 1);

}  // namespace mttf::nn
