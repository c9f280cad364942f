#pragma once

// Resolution-expandable foreground and background generators.
//
// Both generators live on a ladder of dyadic scales above the analysis grid
// G: level k has spatial size G * 2^k and width ModelConfig::generator_width(k).
// A route for output resolution r_i = G * 2^(N_B - i) runs n_u = N_B - i
// upsample blocks followed by n_same = i size-preserving blocks at r_i.
// Upsample blocks are keyed by output size and downsample blocks by input
// size, so routes share every block that operates at a common scale.

#include <torch/torch.h>

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mttf/config.hpp"
#include "mttf/nn_blocks.hpp"
#include "mttf/types.hpp"

namespace mttf {

struct RoutePlan {
  int resolution = 0;        // r_i
  int resolution_index = 0;  // i
  int num_up = 0;            // n_u
  int num_same = 0;          // N_B - n_u
  int grid = 0;              // G
  std::vector<std::string> shared_block_ids;  // decoder-side blocks in execution order
};

// Requires r_i = r / 2^i with 0 <= i < num_resolutions (N_B when omitted).
RoutePlan plan_route(int resolution, int target_resolution, int num_blocks, int num_resolutions = -1);

// Records which blocks a forward pass touched, in order.
using BlockUsageLog = std::vector<std::string>;

class BackgroundGeneratorImpl : public torch::nn::Module {
 public:
  explicit BackgroundGeneratorImpl(const ModelConfig& config);

  // key_small: B x 3 x G x G; returns B x 3 x r_i x r_i in [0, 1].
  torch::Tensor forward(const torch::Tensor& key_small, const DenseMotion& motion, const RoutePlan& plan);

  void set_usage_log(BlockUsageLog* log) { usage_log_ = log; }
  std::vector<std::string> block_ids() const;

 private:
  void touch(const std::string& id) const;

  ModelConfig config_;
  nn::UNet unet_{nullptr};
  torch::nn::Conv2d unet_head_{nullptr};
  std::map<std::string, nn::UpBlock> up_;
  std::map<std::string, nn::SameBlock> same_;
  std::map<std::string, torch::nn::Conv2d> heads_;
  BlockUsageLog* usage_log_ = nullptr;
};
TORCH_MODULE(BackgroundGenerator);

// Per-stage record of the foreground decoder.
struct ForegroundTrace {
  std::vector<torch::Tensor> generated;     // b_i(F^{i-1})
  std::vector<torch::Tensor> warped_skips;  // F^{-i} warped by the resized motion
  std::vector<torch::Tensor> stage_outputs; // F^i
};

class ForegroundGeneratorImpl : public torch::nn::Module {
 public:
  explicit ForegroundGeneratorImpl(const ModelConfig& config);

  // Encoder features of the key frame at r_i: the stem output, the i
  // size-preserving block outputs and the n_u downsample outputs; the last
  // entry is the G x G bottleneck.
  std::vector<torch::Tensor> encode(const torch::Tensor& key, const RoutePlan& plan);

  // Warp-while-generate decoder. Returns (image, mask), both sigmoid outputs.
  std::pair<torch::Tensor, torch::Tensor> decode(const std::vector<torch::Tensor>& features, const DenseMotion& motion,
                                                 const OcclusionMap& occlusion, const RoutePlan& plan,
                                                 ForegroundTrace* trace = nullptr);

  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& key, const DenseMotion& motion,
                                                  const OcclusionMap& occlusion, const RoutePlan& plan) {
    return decode(encode(key, plan), motion, occlusion, plan);
  }

  void set_usage_log(BlockUsageLog* log) { usage_log_ = log; }
  std::vector<std::string> block_ids() const;

 private:
  void touch(const std::string& id) const;

  ModelConfig config_;
  std::map<std::string, nn::ConvNormAct> stems_;
  std::map<std::string, nn::SameBlock> encoder_same_;
  std::map<std::string, nn::DownBlock> down_;
  std::map<std::string, nn::UpBlock> up_;
  std::map<std::string, nn::SameBlock> same_;
  std::map<std::string, torch::nn::Conv2d> heads_;
  BlockUsageLog* usage_log_ = nullptr;
};
TORCH_MODULE(ForegroundGenerator);

// mask * foreground + (1 - mask) * background.
torch::Tensor fuse(const torch::Tensor& foreground, const torch::Tensor& background, const torch::Tensor& mask);

}  // namespace mttf
