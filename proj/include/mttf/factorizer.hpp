#pragma once

#include <torch/torch.h>

#include <span>
#include <utility>
#include <vector>

#include "mttf/config.hpp"
#include "mttf/feature_codec.hpp"
#include "mttf/nn_blocks.hpp"
#include "mttf/types.hpp"

namespace mttf {

// E_F: U-Net from the G x G resampled frame to an N_F-channel latent.
struct FeatureExtractorImpl : torch::nn::Module {
  FeatureExtractorImpl(int64_t num_features, int64_t base_channels);
  torch::Tensor forward(const torch::Tensor& x);

  nn::UNet unet{nullptr};
  torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(FeatureExtractor);

// E_W / E_B: three stride-2 stages with divisive normalization, global
// average pooling and a linear head to N_F scalars.
struct VectorPredictorImpl : torch::nn::Module {
  VectorPredictorImpl(int64_t num_features, int64_t channels, double initial_bias);
  torch::Tensor forward(const torch::Tensor& latent);

  torch::nn::Sequential stages{nullptr};
  torch::nn::Linear head{nullptr};
};
TORCH_MODULE(VectorPredictor);

class FactorizerImpl : public torch::nn::Module {
 public:
  explicit FactorizerImpl(const ModelConfig& config);

  // Resamples the frame to the analysis grid and runs E_F.
  Latent extract_latent(const FrameImage& frame);
  CompactMotionVector predict_motion_vectors(const Latent& latent);

  std::pair<Latent, CompactMotionVector> analyze(const FrameImage& frame) {
    Latent latent = extract_latent(frame);
    CompactMotionVector mv = predict_motion_vectors(latent);
    return {std::move(latent), std::move(mv)};
  }

  const FactorizerConfig& config() const { return config_; }

 private:
  FactorizerConfig config_;
  FeatureExtractor extractor_{nullptr};
  VectorPredictor weight_predictor_{nullptr};
  VectorPredictor bias_predictor_{nullptr};
};
TORCH_MODULE(Factorizer);

// Channel-wise affine modulation of the key latent:
//   out[b, c] = weights[b, c] * key_latent[b, c] + biases[b, c].
FineGrainedMotionField motion_transform(const Latent& key_latent, const CompactMotionVector& mv);

// Bridges between network tensors and codec-side values.
codec::MotionVectorValues to_values(const CompactMotionVector& mv, int64_t batch_index = 0);
CompactMotionVector from_values(std::span<const codec::MotionVectorValues> values,
                                const torch::TensorOptions& options = torch::kFloat32);

}  // namespace mttf
