#pragma once

#include <torch/torch.h>

#include <string>
#include <vector>

#include "mttf/config.hpp"
#include "mttf/factorizer.hpp"
#include "mttf/generator.hpp"
#include "mttf/motion_estimator.hpp"

namespace mttf {

struct Synthesis {
  MotionEstimate motion;
  std::vector<GenerationOutput> outputs;  // one per requested route
};

// Decoder-side network: factorizer, motion estimator and both generators.
class MttfModelImpl : public torch::nn::Module {
 public:
  explicit MttfModelImpl(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  RoutePlan route_for(int resolution) const;
  std::vector<RoutePlan> all_routes() const;

  // Reconstructs inter frames from the key frame, its latent and vectors,
  // and the inter-frame vectors (batch B, broadcast against a batch-1 key).
  Synthesis synthesize(const FrameImage& key, const Latent& key_latent, const CompactMotionVector& key_vectors,
                       const CompactMotionVector& inter_vectors, const std::vector<RoutePlan>& routes);

  Factorizer& factorizer() { return factorizer_; }
  MotionEstimator& motion_estimator() { return motion_; }
  ForegroundGenerator& foreground() { return foreground_; }
  BackgroundGenerator& background() { return background_; }

 private:
  ModelConfig config_;
  Factorizer factorizer_{nullptr};
  MotionEstimator motion_{nullptr};
  ForegroundGenerator foreground_{nullptr};
  BackgroundGenerator background_{nullptr};
};
TORCH_MODULE(MttfModel);

// Checkpoint file: key=value config header terminated by a blank line, then
// one record per parameter:
//   u32 name length (big-endian), name bytes,
//   u8 dtype (0 = float32, 1 = float64), u8 rank, rank x u64 extents (big-endian),
//   raw little-endian element data.
void save_checkpoint(MttfModel& model, const std::string& path);
MttfModel load_checkpoint(const std::string& path);

// Generic form used by the feature backends as well.
void save_parameters(torch::nn::Module& module, const KeyValueMap& header, const std::string& path);
KeyValueMap read_checkpoint_header(const std::string& path);
void load_parameters(torch::nn::Module& module, const std::string& path);

}  // namespace mttf
