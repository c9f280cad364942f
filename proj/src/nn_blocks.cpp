#include "mttf/nn_blocks.hpp"

namespace mttf::nn {

namespace F = torch::nn::functional;

namespace {

torch::Tensor activation(const torch::Tensor& x) {
  return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(0.2));
}

}  // namespace

torch::nn::Conv2d make_conv(int64_t in_channels, int64_t out_channels, int64_t kernel, int64_t stride) {
  return torch::nn::Conv2d(
      torch::nn::Conv2dOptions(in_channels, out_channels, kernel).stride(stride).padding(kernel / 2));
}

torch::nn::GroupNorm make_group_norm(int64_t channels) {
  int64_t groups = 8;
  while (channels % groups != 0) --groups;
  return torch::nn::GroupNorm(torch::nn::GroupNormOptions(groups, channels));
}

ConvNormActImpl::ConvNormActImpl(int64_t in_channels, int64_t out_channels, int64_t stride) {
  conv = register_module("conv", make_conv(in_channels, out_channels, 3, stride));
  norm = register_module("norm", make_group_norm(out_channels));
}

torch::Tensor ConvNormActImpl::forward(const torch::Tensor& x) { return activation(norm(conv(x))); }

UpBlockImpl::UpBlockImpl(int64_t in_channels, int64_t out_channels) {
  body = register_module("body", ConvNormAct(in_channels, out_channels));
}

torch::Tensor UpBlockImpl::forward(const torch::Tensor& x) {
  auto up = F::interpolate(x, F::InterpolateFuncOptions()
                                  .scale_factor(std::vector<double>{2.0, 2.0})
                                  .mode(torch::kNearest));
  return body(up);
}

DownBlockImpl::DownBlockImpl(int64_t in_channels, int64_t out_channels) {
  body = register_module("body", ConvNormAct(in_channels, out_channels, 2));
}

torch::Tensor DownBlockImpl::forward(const torch::Tensor& x) { return body(x); }

SameBlockImpl::SameBlockImpl(int64_t channels) {
  first = register_module("first", ConvNormAct(channels, channels));
  second = register_module("second", make_conv(channels, channels, 3));
}

torch::Tensor SameBlockImpl::forward(const torch::Tensor& x) { return x + second(first(x)); }

UNetImpl::UNetImpl(int64_t in_channels, int64_t base_channels) : base_channels_(base_channels) {
  stem = register_module("stem", ConvNormAct(in_channels, base_channels));
  down = register_module("down", DownBlock(base_channels, 2 * base_channels));
  bottleneck = register_module("bottleneck", ConvNormAct(2 * base_channels, 2 * base_channels));
  up = register_module("up", UpBlock(2 * base_channels, base_channels));
  fuse = register_module("fuse", ConvNormAct(2 * base_channels, base_channels));
}

torch::Tensor UNetImpl::forward(const torch::Tensor& x) {
  auto skip = stem(x);
  auto deep = up(bottleneck(down(skip)));
  return fuse(torch::cat({deep, skip}, 1));
}

GdnImpl::GdnImpl(int64_t channels) {
  beta_raw = register_parameter("beta_raw", torch::ones({channels}));
  // Diagonal starts at 0.1 + 1e-3, off-diagonal couplings at 1e-3.
  gamma_raw = register_parameter("gamma_raw", torch::sqrt(torch::eye(channels) * 0.1 + 1e-3));
}

torch::Tensor GdnImpl::forward(const torch::Tensor& x) {
  const int64_t c = x.size(1);
  auto beta = beta_raw * beta_raw + 1e-6;
  auto gamma = (gamma_raw * gamma_raw).view({c, c, 1, 1});
  auto norm = F::conv2d(x * x, gamma, F::Conv2dFuncOptions().bias(beta));
  return x * torch::rsqrt(norm);
}

}  // namespace mttf::nn
