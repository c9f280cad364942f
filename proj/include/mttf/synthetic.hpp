#pragma once

#include <torch/torch.h>

#include <cstdint>

namespace mttf {

struct DiscClipOptions {
  int frames = 8;
  int size = 64;
  double radius = 0.22;  // fraction of the frame size
  double speed = 0.04;   // fraction of the frame size per frame; 0 gives a static clip
  std::uint64_t seed = 0;
};

// A bright soft-edged disc moving along a seeded direction (bouncing off the
// borders) over a dark static gradient. T x 3 x S x S on the 8-bit grid; disc
// pixels have luma above 0.5 and background pixels below.
torch::Tensor moving_disc_clip(const DiscClipOptions& options);

}  // namespace mttf
