#include "mttf/motion_estimator.hpp"

#include "mttf/errors.hpp"
#include "mttf/warp.hpp"

namespace mttf {

FlowPredictorImpl::FlowPredictorImpl(int64_t num_features, int64_t base_channels) : components(2 * num_features) {
  unet = register_module("unet", nn::UNet(2 * num_features, base_channels));
  head = register_module("head", nn::make_conv(base_channels, 2 * components, 3));
  torch::NoGradGuard no_grad;
  head->weight.zero_();
  head->bias.zero_();
}

torch::Tensor FlowPredictorImpl::forward(const torch::Tensor& fields) {
  auto d = head(unet(fields));  // B x 2K x G x G
  const int64_t b = d.size(0), g = d.size(2);
  return d.view({b, components, 2, g, g}).permute({0, 1, 3, 4, 2});
}

WeightPredictorImpl::WeightPredictorImpl(int64_t num_features, int64_t base_channels) {
  const int64_t k = 2 * num_features;
  unet = register_module("unet", nn::UNet(2 * num_features + 3 * k, base_channels));
  logit_head = register_module("logit_head", nn::make_conv(base_channels, k, 3));
  occlusion_head = register_module("occlusion_head", nn::make_conv(base_channels, 1, 3));
}

std::pair<torch::Tensor, torch::Tensor> WeightPredictorImpl::forward(const torch::Tensor& input) {
  auto features = unet(input);
  return {logit_head(features), torch::sigmoid(occlusion_head(features))};
}

MotionEstimatorImpl::MotionEstimatorImpl(const ModelConfig& config) : config_(config) {
  config_.validate();
  const int64_t nf = config_.factorizer.num_features;
  flow_ = register_module("flow", FlowPredictor(nf, config_.flow_channels));
  weight_ = register_module("weight", WeightPredictor(nf, config_.weight_channels));
}

namespace {

void check_fields(const FineGrainedMotionField& key_field, const FineGrainedMotionField& inter_field, int64_t nf,
                  int64_t g) {
  detail::expect_shape(key_field.data, {-1, nf, g, g}, "motion_estimator", "key motion field");
  detail::expect_shape(inter_field.data, {key_field.data.size(0), nf, g, g}, "motion_estimator",
                       "inter motion field");
}

}  // namespace

CoarseFlowSet MotionEstimatorImpl::predict_coarse_flows(const FineGrainedMotionField& key_field,
                                                        const FineGrainedMotionField& inter_field) {
  const int64_t g = config_.factorizer.grid_size();
  check_fields(key_field, inter_field, config_.factorizer.num_features, g);
  auto displacement = flow_->forward(torch::cat({key_field.data, inter_field.data}, 1));
  auto identity = identity_grid(g, displacement.options()).unsqueeze(1);  // 1 x 1 x G x G x 2
  const double bound = 1.0 + config_.flow_margin;
  return CoarseFlowSet{torch::clamp(identity + displacement, -bound, bound)};
}

std::pair<MotionWeights, OcclusionMap> MotionEstimatorImpl::predict_weights_and_occlusion(
    const FineGrainedMotionField& key_field, const FineGrainedMotionField& inter_field,
    const DeformedStack& deformed) {
  const int64_t g = config_.factorizer.grid_size();
  const int64_t nf = config_.factorizer.num_features;
  check_fields(key_field, inter_field, nf, g);
  const int64_t b = key_field.data.size(0);
  detail::expect_shape(deformed.images, {b, 3, 2 * nf, g, g}, "motion_estimator", "deformed key frames");
  auto input = torch::cat({key_field.data, inter_field.data, deformed.images.reshape({b, 3 * 2 * nf, g, g})}, 1);
  auto [logits, occlusion] = weight_->forward(input);
  return {MotionWeights{logits}, OcclusionMap{occlusion}};
}

MotionEstimate MotionEstimatorImpl::estimate(const FineGrainedMotionField& key_field,
                                             const FineGrainedMotionField& inter_field,
                                             const torch::Tensor& key_small) {
  MotionEstimate out;
  out.flows = predict_coarse_flows(key_field, inter_field);
  const int64_t b = key_field.data.size(0);
  auto key = key_small.size(0) == b ? key_small : key_small.expand({b, -1, -1, -1});
  out.deformed = deform_keyframe(key, out.flows);
  std::tie(out.weights, out.occlusion) = predict_weights_and_occlusion(key_field, inter_field, out.deformed);
  std::tie(out.foreground, out.background) =
      compose_dense_motion(out.flows, out.weights, config_.num_foreground, config_.num_background);
  return out;
}

DeformedStack deform_keyframe(const torch::Tensor& key_small, const CoarseFlowSet& flows) {
  detail::expect_shape(flows.flows, {-1, -1, -1, -1, 2}, "motion_estimator", "coarse flows");
  const int64_t b = flows.flows.size(0), k = flows.flows.size(1), g = flows.flows.size(2);
  detail::expect_shape(key_small, {b, 3, g, g}, "motion_estimator", "downsampled key frame");
  auto sources = key_small.unsqueeze(1).expand({b, k, 3, g, g}).reshape({b * k, 3, g, g});
  auto warped = warp(sources, flows.flows.reshape({b * k, g, g, 2}));
  return DeformedStack{warped.view({b, k, 3, g, g}).permute({0, 2, 1, 3, 4})};
}

std::pair<DenseMotion, DenseMotion> compose_dense_motion(const CoarseFlowSet& flows, const MotionWeights& logits,
                                                         int num_foreground, int num_background) {
  detail::expect_shape(flows.flows, {-1, -1, -1, -1, 2}, "motion_estimator", "coarse flows");
  const int64_t k = flows.flows.size(1);
  if (num_foreground < 1 || num_background < 1 || num_foreground + num_background != k) {
    throw ConfigError("motion_estimator", "invalid foreground/background split " + std::to_string(num_foreground) +
                                              " + " + std::to_string(num_background) + " for " + std::to_string(k) +
                                              " components");
  }
  detail::expect_shape(logits.logits, {flows.flows.size(0), k, flows.flows.size(2), flows.flows.size(3)},
                       "motion_estimator", "motion weights");

  auto group = [&](int64_t start, int64_t count, MotionRole role) {
    auto w = torch::softmax(logits.logits.narrow(1, start, count), 1).unsqueeze(-1);  // B x n x G x G x 1
    auto f = flows.flows.narrow(1, start, count);
    return DenseMotion{(w * f).sum(1), role};
  };
  return {group(0, num_foreground, MotionRole::kForeground),
          group(num_foreground, num_background, MotionRole::kBackground)};
}

}  // namespace mttf
