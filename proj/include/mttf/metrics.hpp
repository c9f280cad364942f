#pragma once

#include <torch/torch.h>

#include <optional>
#include <string>
#include <vector>

#include "mttf/video_io.hpp"

namespace mttf {

inline constexpr double kPsnrCeilingDb = 100.0;

// Mean over frames of 10 log10(1 / MSE_t) for videos in [0, 1]. Identical
// videos give +infinity; otherwise an exactly matching frame counts as
// kPsnrCeilingDb.
double psnr(const torch::Tensor& a, const torch::Tensor& b);

struct RDPoint {
  double rate_kbps = 0.0;
  double quality = 0.0;  // higher is better (display-transformed)
};

enum class BdInterpolation { kPchip, kCubicFit };

// Average log-rate difference of test against anchor over the common quality
// interval, as a percentage (negative means savings). Log-rate is
// interpolated over quality piecewise-cubically (PCHIP) or with one
// least-squares cubic per curve.
double bd_rate(const std::vector<RDPoint>& anchor, const std::vector<RDPoint>& test,
               BdInterpolation method = BdInterpolation::kPchip);

// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes,
// three-point endpoint rule); x must be strictly increasing.
class Pchip {
 public:
  Pchip(std::vector<double> x, std::vector<double> y);

  double operator()(double t) const;
  // Exact integral over [a, b] within the data range.
  double integrate(double a, double b) const;

  const std::vector<double>& slopes() const { return d_; }

 private:
  std::size_t segment(double t) const;
  double segment_integral(std::size_t k, double a, double b) const;

  std::vector<double> x_, y_, d_;
};

// Quality metric with the axis convention used on RD plots: psnr is builtin,
// dists / lpips / fvd run an external command template with {reference},
// {distorted} (raw video files with sidecars) and print the score as the
// last number on stdout.
struct MetricAdapter {
  std::string id;
  bool higher_is_better = true;
  std::string axis_label;
  std::string command_template;  // empty for builtin metrics

  bool builtin() const { return id == "psnr"; }
  bool available() const { return builtin() || !command_template.empty(); }

  // Raw score in the metric's own orientation.
  double evaluate(const Video& reference, const Video& distorted) const;
  // Score mapped so that larger is better: 1-DISTS, 1-LPIPS, 5000-FVD.
  double display(double raw) const;
};

// Throws ConfigError for unknown ids.
MetricAdapter make_metric(const std::string& id, const std::string& command_template = {});

}  // namespace mttf
