#include "mttf/generator.hpp"

#include "mttf/errors.hpp"
#include "mttf/warp.hpp"

namespace mttf {

namespace {

std::string up_id(int out_size) { return "up" + std::to_string(out_size); }
std::string down_id(int in_size) { return "down" + std::to_string(in_size); }
std::string same_id(int size, int j) { return "same" + std::to_string(size) + "_" + std::to_string(j); }
std::string encoder_same_id(int size, int j) { return "enc_same" + std::to_string(size) + "_" + std::to_string(j); }
std::string stem_id(int size) { return "stem" + std::to_string(size); }
std::string head_id(int size) { return "head" + std::to_string(size); }

void check_plan(const RoutePlan& plan, const ModelConfig& config) {
  const auto& f = config.factorizer;
  if (plan.grid != f.grid_size() || plan.num_up + plan.num_same != f.num_blocks || plan.resolution_index < 0 ||
      plan.resolution_index >= f.num_resolutions || plan.resolution != f.resolution_at(plan.resolution_index)) {
    throw InputError("generator", "route plan for r_i=" + std::to_string(plan.resolution) +
                                      " does not belong to this model (r=" + std::to_string(f.resolution) +
                                      ", N_B=" + std::to_string(f.num_blocks) + ")");
  }
}

void check_motion(const DenseMotion& motion, int64_t batch, int64_t grid) {
  detail::expect_shape(motion.grid, {batch, grid, grid, 2}, "generator", "dense motion");
}

template <typename Map>
auto& lookup(Map& map, const std::string& id) {
  auto it = map.find(id);
  if (it == map.end()) throw InputError("generator", "route needs block '" + id + "' which this model lacks");
  return it->second;
}

}  // namespace

RoutePlan plan_route(int resolution, int target_resolution, int num_blocks, int num_resolutions) {
  if (num_resolutions < 0) num_resolutions = num_blocks;
  if (num_blocks < 1 || resolution < 1 || resolution % (1 << num_blocks) != 0) {
    throw ConfigError("generator", "r=" + std::to_string(resolution) + " is not divisible by 2^N_B");
  }
  if (num_resolutions < 1 || num_resolutions > num_blocks) {
    throw ConfigError("generator", "N_s must lie in [1, N_B]");
  }
  int index = -1;
  for (int i = 0; i < num_resolutions; ++i) {
    if ((resolution >> i) == target_resolution) index = i;
  }
  if (index < 0) {
    throw ConfigError("generator", "unsupported target resolution " + std::to_string(target_resolution) +
                                       " for r=" + std::to_string(resolution));
  }
  RoutePlan plan;
  plan.resolution = target_resolution;
  plan.resolution_index = index;
  plan.num_up = num_blocks - index;
  plan.num_same = index;
  plan.grid = resolution >> num_blocks;
  for (int k = 1; k <= plan.num_up; ++k) plan.shared_block_ids.push_back(up_id(plan.grid << k));
  for (int j = 0; j < plan.num_same; ++j) plan.shared_block_ids.push_back(same_id(target_resolution, j));
  return plan;
}

// ---------------------------------------------------------------------------
// Background: warp-then-generate

BackgroundGeneratorImpl::BackgroundGeneratorImpl(const ModelConfig& config) : config_(config) {
  config_.validate();
  const auto& f = config_.factorizer;
  const int g = f.grid_size();
  unet_ = register_module("unet", nn::UNet(3, config_.background_channels));
  unet_head_ = register_module("unet_head", nn::make_conv(config_.background_channels, config_.generator_width(0), 1));
  for (int k = 1; k <= f.num_blocks; ++k) {
    const auto id = up_id(g << k);
    up_.emplace(id, register_module(id, nn::UpBlock(config_.generator_width(k - 1), config_.generator_width(k))));
  }
  for (int i = 0; i < f.num_resolutions; ++i) {
    const int size = f.resolution_at(i);
    const int level = f.num_blocks - i;
    for (int j = 0; j < i; ++j) {
      const auto id = same_id(size, j);
      same_.emplace(id, register_module(id, nn::SameBlock(config_.generator_width(level))));
    }
    const auto id = head_id(size);
    heads_.emplace(id, register_module(id, nn::make_conv(config_.generator_width(level), 3, 3)));
  }
}

void BackgroundGeneratorImpl::touch(const std::string& id) const {
  if (usage_log_) usage_log_->push_back(id);
}

std::vector<std::string> BackgroundGeneratorImpl::block_ids() const {
  std::vector<std::string> out{"unet", "unet_head"};
  for (const auto& [id, _] : up_) out.push_back(id);
  for (const auto& [id, _] : same_) out.push_back(id);
  for (const auto& [id, _] : heads_) out.push_back(id);
  return out;
}

torch::Tensor BackgroundGeneratorImpl::forward(const torch::Tensor& key_small, const DenseMotion& motion,
                                               const RoutePlan& plan) {
  check_plan(plan, config_);
  const int64_t g = plan.grid;
  detail::expect_shape(key_small, {-1, 3, g, g}, "generator", "downsampled key frame");
  const int64_t b = motion.grid.defined() ? motion.grid.size(0) : -1;
  check_motion(motion, b, g);
  auto key = key_small.size(0) == b ? key_small : key_small.expand({b, -1, -1, -1});

  touch("unet");
  touch("unet_head");
  auto x = unet_head_->forward(unet_->forward(warp(key, motion.grid)));
  for (const auto& id : plan.shared_block_ids) {
    touch(id);
    if (id.rfind("up", 0) == 0) {
      x = lookup(up_, id)->forward(x);
    } else {
      x = lookup(same_, id)->forward(x);
    }
  }
  const auto hid = head_id(plan.resolution);
  touch(hid);
  return torch::sigmoid(lookup(heads_, hid)->forward(x));
}

// ---------------------------------------------------------------------------
// Foreground: warp-while-generate

ForegroundGeneratorImpl::ForegroundGeneratorImpl(const ModelConfig& config) : config_(config) {
  config_.validate();
  const auto& f = config_.factorizer;
  const int g = f.grid_size();
  for (int k = 1; k <= f.num_blocks; ++k) {
    const auto did = down_id(g << k);
    down_.emplace(did, register_module(did, nn::DownBlock(config_.generator_width(k), config_.generator_width(k - 1))));
    const auto uid = up_id(g << k);
    up_.emplace(uid, register_module(uid, nn::UpBlock(config_.generator_width(k - 1), config_.generator_width(k))));
  }
  for (int i = 0; i < f.num_resolutions; ++i) {
    const int size = f.resolution_at(i);
    const int level = f.num_blocks - i;
    const int width = config_.generator_width(level);
    const auto sid = stem_id(size);
    stems_.emplace(sid, register_module(sid, nn::ConvNormAct(3, width)));
    for (int j = 0; j < i; ++j) {
      const auto eid = encoder_same_id(size, j);
      encoder_same_.emplace(eid, register_module(eid, nn::SameBlock(width)));
      const auto id = same_id(size, j);
      same_.emplace(id, register_module(id, nn::SameBlock(width)));
    }
    const auto hid = head_id(size);
    heads_.emplace(hid, register_module(hid, nn::make_conv(width, 4, 3)));
  }
}

void ForegroundGeneratorImpl::touch(const std::string& id) const {
  if (usage_log_) usage_log_->push_back(id);
}

std::vector<std::string> ForegroundGeneratorImpl::block_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : stems_) out.push_back(id);
  for (const auto& [id, _] : encoder_same_) out.push_back(id);
  for (const auto& [id, _] : down_) out.push_back(id);
  for (const auto& [id, _] : up_) out.push_back(id);
  for (const auto& [id, _] : same_) out.push_back(id);
  for (const auto& [id, _] : heads_) out.push_back(id);
  return out;
}

std::vector<torch::Tensor> ForegroundGeneratorImpl::encode(const torch::Tensor& key, const RoutePlan& plan) {
  check_plan(plan, config_);
  detail::expect_shape(key, {-1, 3, plan.resolution, plan.resolution}, "generator", "key frame");

  std::vector<torch::Tensor> features;
  const auto sid = stem_id(plan.resolution);
  touch(sid);
  features.push_back(lookup(stems_, sid)->forward(key));
  for (int j = 0; j < plan.num_same; ++j) {
    const auto id = encoder_same_id(plan.resolution, j);
    touch(id);
    features.push_back(lookup(encoder_same_, id)->forward(features.back()));
  }
  for (int size = plan.resolution; size > plan.grid; size /= 2) {
    const auto id = down_id(size);
    touch(id);
    features.push_back(lookup(down_, id)->forward(features.back()));
  }
  return features;
}

std::pair<torch::Tensor, torch::Tensor> ForegroundGeneratorImpl::decode(const std::vector<torch::Tensor>& features,
                                                                        const DenseMotion& motion,
                                                                        const OcclusionMap& occlusion,
                                                                        const RoutePlan& plan,
                                                                        ForegroundTrace* trace) {
  check_plan(plan, config_);
  const int num_blocks = plan.num_up + plan.num_same;
  if (static_cast<int>(features.size()) != num_blocks + 1) {
    throw InputError("generator", "expected " + std::to_string(num_blocks + 1) + " encoder features, got " +
                                      std::to_string(features.size()));
  }
  const int64_t g = plan.grid;
  const int64_t b = motion.grid.defined() ? motion.grid.size(0) : -1;
  check_motion(motion, b, g);
  detail::expect_shape(occlusion.map, {b, 1, g, g}, "generator", "occlusion map");

  auto broadcast = [b](const torch::Tensor& t) { return t.size(0) == b ? t : t.expand({b, -1, -1, -1}); };

  torch::Tensor x = warp(broadcast(features.back()), motion.grid);
  for (int k = 1; k <= num_blocks; ++k) {
    const auto& id = plan.shared_block_ids[k - 1];
    touch(id);
    torch::Tensor generated = k <= plan.num_up ? lookup(up_, id)->forward(x) : lookup(same_, id)->forward(x);
    const int64_t size = generated.size(2);
    auto occ = resize_bilinear(occlusion.map, size);
    auto skip = warp(broadcast(features[num_blocks - k]), resize_grid(motion.grid, size));
    x = generated * (1 - occ) + skip * occ;
    if (trace) {
      trace->generated.push_back(generated);
      trace->warped_skips.push_back(skip);
      trace->stage_outputs.push_back(x);
    }
  }
  const auto hid = head_id(plan.resolution);
  touch(hid);
  auto out = torch::sigmoid(lookup(heads_, hid)->forward(x));
  return {out.narrow(1, 0, 3), out.narrow(1, 3, 1)};
}

torch::Tensor fuse(const torch::Tensor& foreground, const torch::Tensor& background, const torch::Tensor& mask) {
  detail::expect_shape(foreground, {-1, -1, -1, -1}, "generator", "foreground");
  detail::expect_shape(background, {foreground.size(0), foreground.size(1), foreground.size(2), foreground.size(3)},
                       "generator", "background");
  detail::expect_shape(mask, {foreground.size(0), -1, foreground.size(2), foreground.size(3)}, "generator", "mask");
  if (mask.size(1) != 1 && mask.size(1) != foreground.size(1)) {
    throw InputError("generator", "mask must have one channel or match the image channels");
  }
  return mask * foreground + (1 - mask) * background;
}

}  // namespace mttf
