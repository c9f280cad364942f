#pragma once

#include <torch/torch.h>

namespace mttf {

// Identity sampling grid, 1 x size x size x 2, pixel centres in normalized
// coordinates: x_j = (2j + 1) / size - 1 (align_corners = false).
torch::Tensor identity_grid(int64_t size, const torch::TensorOptions& options);

// Bilinear grid sampling with border clamping. `image` is B x C x H x W and
// `grid` B x h x w x 2 with (x, y) in normalized coordinates; returns
// B x C x h x w. Differentiable in both arguments. Non-finite coordinates
// sample the image centre.
torch::Tensor warp(const torch::Tensor& image, const torch::Tensor& grid);

// Bilinear resampling of a B x C x H x W tensor to size x size
// (antialiased when shrinking).
torch::Tensor resize_bilinear(const torch::Tensor& image, int64_t size);

// Resizes a B x h x w x 2 sampling grid to size x size. Coordinates are
// normalized, so the values carry over unchanged.
torch::Tensor resize_grid(const torch::Tensor& grid, int64_t size);

}  // namespace mttf
