#pragma once

#include <torch/torch.h>

#include <utility>

#include "mttf/config.hpp"
#include "mttf/nn_blocks.hpp"
#include "mttf/types.hpp"

namespace mttf {

// FL: predicts 2N_F coarse sampling grids as identity + displacement. The
// displacement head is zero-initialized, so a fresh network predicts the
// identity motion for every component.
struct FlowPredictorImpl : torch::nn::Module {
  FlowPredictorImpl(int64_t num_features, int64_t base_channels);
  torch::Tensor forward(const torch::Tensor& fields);  // B x 2N_F x G x G x 2 displacements

  nn::UNet unet{nullptr};
  torch::nn::Conv2d head{nullptr};
  int64_t components;
};
TORCH_MODULE(FlowPredictor);

// W: one U-Net with two heads, combination logits and an occlusion logit.
struct WeightPredictorImpl : torch::nn::Module {
  WeightPredictorImpl(int64_t num_features, int64_t base_channels);
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& input);

  nn::UNet unet{nullptr};
  torch::nn::Conv2d logit_head{nullptr};
  torch::nn::Conv2d occlusion_head{nullptr};
};
TORCH_MODULE(WeightPredictor);

struct MotionEstimate {
  CoarseFlowSet flows;
  DeformedStack deformed;
  MotionWeights weights;
  OcclusionMap occlusion;
  DenseMotion foreground;
  DenseMotion background;
};

class MotionEstimatorImpl : public torch::nn::Module {
 public:
  explicit MotionEstimatorImpl(const ModelConfig& config);

  CoarseFlowSet predict_coarse_flows(const FineGrainedMotionField& key_field,
                                     const FineGrainedMotionField& inter_field);

  std::pair<MotionWeights, OcclusionMap> predict_weights_and_occlusion(const FineGrainedMotionField& key_field,
                                                                       const FineGrainedMotionField& inter_field,
                                                                       const DeformedStack& deformed);

  // Full estimation from the two fields and the G x G key frame.
  MotionEstimate estimate(const FineGrainedMotionField& key_field, const FineGrainedMotionField& inter_field,
                          const torch::Tensor& key_small);

  FlowPredictor& flow_predictor() { return flow_; }
  WeightPredictor& weight_predictor() { return weight_; }

 private:
  ModelConfig config_;
  FlowPredictor flow_{nullptr};
  WeightPredictor weight_{nullptr};
};
TORCH_MODULE(MotionEstimator);

// Warps the G x G key frame (B x 3 x G x G) by every coarse flow.
DeformedStack deform_keyframe(const torch::Tensor& key_small, const CoarseFlowSet& flows);

// Splits components into [0, N_fg) foreground and [N_fg, 2N_F) background,
// softmax-normalizes each group's logits per pixel and sums the group's
// flows with those weights.
std::pair<DenseMotion, DenseMotion> compose_dense_motion(const CoarseFlowSet& flows, const MotionWeights& logits,
                                                         int num_foreground, int num_background);

}  // namespace mttf
