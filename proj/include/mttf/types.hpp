#pragma once

// Tensor-backed domain types. Every tensor carries a leading batch
// dimension; constructors check shapes so that a mis-wired tensor fails where
// it is created instead of deep inside a convolution.

#include <torch/torch.h>

#include <string>

namespace mttf {

// RGB frame batch, B x 3 x H x W with H == W and values in [0, 1].
class FrameImage {
 public:
  FrameImage() = default;
  explicit FrameImage(torch::Tensor pixels);

  // Accepts 3 x H x W as well and adds the batch dimension.
  static FrameImage from_tensor(torch::Tensor pixels);

  const torch::Tensor& pixels() const { return pixels_; }
  int64_t batch() const { return pixels_.size(0); }
  int64_t size() const { return pixels_.size(2); }

 private:
  torch::Tensor pixels_;
};

// B x N_F x G x G spatial latent.
struct Latent {
  torch::Tensor data;

  int64_t channels() const { return data.size(1); }
  int64_t grid() const { return data.size(2); }
};

// Per-frame weights and biases, each B x N_F.
struct CompactMotionVector {
  torch::Tensor weights;
  torch::Tensor biases;

  int64_t num_features() const { return weights.size(1); }
};

// B x N_F x G x G modulated key latent.
struct FineGrainedMotionField {
  torch::Tensor data;
};

// B x 2N_F x G x G x 2 absolute sampling grids (x, y) in normalized coordinates.
struct CoarseFlowSet {
  torch::Tensor flows;

  int64_t components() const { return flows.size(1); }
};

// B x 3 x 2N_F x G x G key frame warped by each coarse flow.
struct DeformedStack {
  torch::Tensor images;
};

// B x 2N_F x G x G pre-softmax combination logits.
struct MotionWeights {
  torch::Tensor logits;
};

enum class MotionRole { kForeground, kBackground };

// B x G x G x 2 sampling grid.
struct DenseMotion {
  torch::Tensor grid;
  MotionRole role = MotionRole::kForeground;
};

// B x 1 x G x G, values in [0, 1].
struct OcclusionMap {
  torch::Tensor map;
};

struct GenerationOutput {
  torch::Tensor foreground;  // B x 3 x r_i x r_i
  torch::Tensor background;  // B x 3 x r_i x r_i
  torch::Tensor mask;        // B x 1 x r_i x r_i
  torch::Tensor fused;       // B x 3 x r_i x r_i
};

namespace detail {

// Throws InputError(module, ...) unless `t` is defined with the given rank
// and, where expected[k] >= 0, the given extent at dimension k.
void expect_shape(const torch::Tensor& t, std::initializer_list<int64_t> expected, const std::string& module,
                  const std::string& what);

std::string shape_string(const torch::Tensor& t);

}  // namespace detail

}  // namespace mttf
