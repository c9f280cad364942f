#include "mttf/synthetic.hpp"

#include <cmath>
#include <random>

#include "mttf/errors.hpp"
#include "mttf/video_io.hpp"

namespace mttf {

namespace {

// Reflects p into [lo, hi].
double bounce(double p, double lo, double hi) {
  const double span = hi - lo;
  double t = std::fmod(p - lo, 2 * span);
  if (t < 0) t += 2 * span;
  return lo + (t <= span ? t : 2 * span - t);
}

}  // namespace

torch::Tensor moving_disc_clip(const DiscClipOptions& o) {
  if (o.frames < 1 || o.size < 4 || o.radius <= 0 || o.radius >= 0.5) {
    throw ConfigError("synthetic", "invalid disc clip options");
  }
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> angle(0.0, 2 * M_PI);
  std::uniform_real_distribution<double> start(o.radius, 1.0 - o.radius);
  const double theta = angle(rng);
  const double x0 = start(rng), y0 = start(rng);

  const auto s = static_cast<int64_t>(o.size);
  const auto coords = (torch::arange(s, torch::kFloat64) + 0.5) / static_cast<double>(s);
  const auto yy = coords.view({s, 1}).expand({s, s});
  const auto xx = coords.view({1, s}).expand({s, s});
  const auto background = torch::stack({0.10 + 0.15 * xx, 0.12 + 0.10 * yy, 0.25 - 0.10 * xx}).to(torch::kFloat64);
  const auto disc_color = torch::tensor({0.95, 0.80, 0.55}, torch::kFloat64).view({3, 1, 1});

  std::vector<torch::Tensor> frames;
  for (int t = 0; t < o.frames; ++t) {
    const double cx = bounce(x0 + o.speed * t * std::cos(theta), o.radius, 1.0 - o.radius);
    const double cy = bounce(y0 + o.speed * t * std::sin(theta), o.radius, 1.0 - o.radius);
    const auto dist = ((xx - cx).pow(2) + (yy - cy).pow(2)).sqrt();
    // One-pixel linear edge.
    const auto alpha = ((o.radius - dist) * static_cast<double>(s) + 0.5).clamp(0, 1);
    frames.push_back(alpha * disc_color + (1 - alpha) * background);
  }
  return quantize_to_bytes(torch::stack(frames).to(torch::kFloat32));
}

}  // namespace mttf
