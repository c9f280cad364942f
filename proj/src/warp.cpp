#include "mttf/warp.hpp"

#include "mttf/errors.hpp"
#include "mttf/types.hpp"

namespace mttf {

namespace F = torch::nn::functional;

torch::Tensor identity_grid(int64_t size, const torch::TensorOptions& options) {
  auto coords = (torch::arange(size, options) * 2 + 1) / static_cast<double>(size) - 1;
  auto y = coords.view({size, 1}).expand({size, size});
  auto x = coords.view({1, size}).expand({size, size});
  return torch::stack({x, y}, -1).unsqueeze(0);
}

torch::Tensor warp(const torch::Tensor& image, const torch::Tensor& grid) {
  detail::expect_shape(image, {-1, -1, -1, -1}, "motion_estimator", "warp source");
  detail::expect_shape(grid, {image.size(0), -1, -1, 2}, "motion_estimator", "warp grid");
  // Non-finite coordinates crash the CPU backward kernel; they sample the centre instead.
  const auto safe_grid = torch::nan_to_num(grid, 0.0, 0.0, 0.0);
  return F::grid_sample(image, safe_grid,
                        F::GridSampleFuncOptions()
                            .mode(torch::kBilinear)
                            .padding_mode(torch::kBorder)
                            .align_corners(false));
}

torch::Tensor resize_bilinear(const torch::Tensor& image, int64_t size) {
  if (image.size(2) == size && image.size(3) == size) return image;
  const bool shrinking = image.size(2) > size || image.size(3) > size;
  return F::interpolate(image, F::InterpolateFuncOptions()
                                   .size(std::vector<int64_t>{size, size})
                                   .mode(torch::kBilinear)
                                   .align_corners(false)
                                   .antialias(shrinking));
}

torch::Tensor resize_grid(const torch::Tensor& grid, int64_t size) {
  if (grid.size(1) == size) return grid;
  return resize_bilinear(grid.permute({0, 3, 1, 2}), size).permute({0, 2, 3, 1});
}

}  // namespace mttf
