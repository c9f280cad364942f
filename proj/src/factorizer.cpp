#include "mttf/factorizer.hpp"

#include "mttf/errors.hpp"
#include "mttf/warp.hpp"

namespace mttf {

FeatureExtractorImpl::FeatureExtractorImpl(int64_t num_features, int64_t base_channels) {
  unet = register_module("unet", nn::UNet(3, base_channels));
  head = register_module("head", nn::make_conv(base_channels, num_features, 1));
}

torch::Tensor FeatureExtractorImpl::forward(const torch::Tensor& x) { return head(unet(x)); }

VectorPredictorImpl::VectorPredictorImpl(int64_t num_features, int64_t channels, double initial_bias) {
  stages = register_module("stages", torch::nn::Sequential(nn::make_conv(num_features, channels, 3, 2),
                                                           nn::Gdn(channels), nn::make_conv(channels, channels, 3, 2),
                                                           nn::Gdn(channels), nn::make_conv(channels, channels, 3, 2),
                                                           nn::Gdn(channels)));
  head = register_module("head", torch::nn::Linear(channels, num_features));
  torch::NoGradGuard no_grad;
  head->bias.fill_(initial_bias);
}

torch::Tensor VectorPredictorImpl::forward(const torch::Tensor& latent) {
  return head(stages->forward(latent).mean({2, 3}));
}

FactorizerImpl::FactorizerImpl(const ModelConfig& config) : config_(config.factorizer) {
  config.validate();
  const int64_t nf = config_.num_features;
  extractor_ = register_module("extractor", FeatureExtractor(nf, config.extractor_channels));
  // Weight head starts at 1, bias head at 0.
  weight_predictor_ = register_module("weight_predictor", VectorPredictor(nf, config.predictor_channels, 1.0));
  bias_predictor_ = register_module("bias_predictor", VectorPredictor(nf, config.predictor_channels, 0.0));
}

Latent FactorizerImpl::extract_latent(const FrameImage& frame) {
  config_.resolution_index(static_cast<int>(frame.size()));
  const int64_t g = config_.grid_size();
  auto small = resize_bilinear(frame.pixels(), g);
  return Latent{extractor_->forward(small)};
}

CompactMotionVector FactorizerImpl::predict_motion_vectors(const Latent& latent) {
  const int64_t g = config_.grid_size();
  detail::expect_shape(latent.data, {-1, config_.num_features, g, g}, "factorizer", "latent");
  return CompactMotionVector{weight_predictor_->forward(latent.data), bias_predictor_->forward(latent.data)};
}

FineGrainedMotionField motion_transform(const Latent& key_latent, const CompactMotionVector& mv) {
  detail::expect_shape(key_latent.data, {-1, -1, -1, -1}, "factorizer", "key latent");
  const int64_t b = key_latent.data.size(0);
  const int64_t nf = key_latent.data.size(1);
  detail::expect_shape(mv.weights, {-1, nf}, "factorizer", "motion weights");
  detail::expect_shape(mv.biases, {mv.weights.size(0), nf}, "factorizer", "motion biases");
  if (mv.weights.size(0) != b && b != 1) {
    throw InputError("factorizer", "motion vector batch does not match the key latent batch");
  }
  auto w = mv.weights.view({-1, nf, 1, 1});
  auto bias = mv.biases.view({-1, nf, 1, 1});
  return FineGrainedMotionField{w * key_latent.data + bias};
}

codec::MotionVectorValues to_values(const CompactMotionVector& mv, int64_t batch_index) {
  auto w = mv.weights[batch_index].detach().to(torch::kCPU, torch::kFloat64).contiguous();
  auto b = mv.biases[batch_index].detach().to(torch::kCPU, torch::kFloat64).contiguous();
  codec::MotionVectorValues out;
  out.weights.assign(w.data_ptr<double>(), w.data_ptr<double>() + w.numel());
  out.biases.assign(b.data_ptr<double>(), b.data_ptr<double>() + b.numel());
  return out;
}

CompactMotionVector from_values(std::span<const codec::MotionVectorValues> values, const torch::TensorOptions& options) {
  if (values.empty()) throw InputError("factorizer", "no motion vectors to convert");
  const auto n = static_cast<int64_t>(values.front().size());
  auto w = torch::empty({static_cast<int64_t>(values.size()), n}, torch::kFloat64);
  auto b = torch::empty_like(w);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (static_cast<int64_t>(values[i].size()) != n || values[i].biases.size() != values[i].weights.size()) {
      throw InputError("factorizer", "motion vectors of different lengths in one batch");
    }
    std::copy(values[i].weights.begin(), values[i].weights.end(), w[i].data_ptr<double>());
    std::copy(values[i].biases.begin(), values[i].biases.end(), b[i].data_ptr<double>());
  }
  return CompactMotionVector{w.to(options), b.to(options)};
}

}  // namespace mttf
