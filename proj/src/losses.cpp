#include "mttf/losses.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>

#include "mttf/command.hpp"
#include "mttf/errors.hpp"
#include "mttf/video_io.hpp"

namespace mttf {

namespace F = torch::nn::functional;

namespace {

constexpr const char* kModule = "training";

void expect_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) {
    throw InputError(kModule, std::string(what) + " shape mismatch: " + detail::shape_string(a) + " vs " +
                                  detail::shape_string(b));
  }
}

void freeze(torch::nn::Module& module) {
  for (auto& p : module.parameters()) p.set_requires_grad(false);
}

}  // namespace

RandomFeatureBackend::RandomFeatureBackend(std::uint64_t seed, std::vector<int64_t> widths) {
  if (widths.size() != 5) throw ConfigError(kModule, "feature backends expose exactly five layers");
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  int64_t in = 3;
  torch::NoGradGuard no_grad;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    auto conv = torch::nn::Conv2d(torch::nn::Conv2dOptions(in, widths[i], 3).padding(1));
    const double stddev = std::sqrt(2.0 / static_cast<double>(in * 9));
    conv->weight.copy_(at::normal(0.0, stddev, conv->weight.sizes(), gen));
    conv->bias.copy_(at::normal(0.0, 0.01, conv->bias.sizes(), gen));
    convs_.push_back(register_module("conv" + std::to_string(i), conv));
    in = widths[i];
  }
  freeze(*this);
}

std::vector<torch::Tensor> RandomFeatureBackend::features(const torch::Tensor& images) {
  std::vector<torch::Tensor> out;
  auto x = images;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    if (i > 0 && x.size(2) >= 2 && x.size(3) >= 2) x = F::avg_pool2d(x, F::AvgPool2dFuncOptions(2));
    x = torch::relu(convs_[i]->forward(x));
    out.push_back(x);
  }
  return out;
}

Vgg19FeatureBackend::Vgg19FeatureBackend() {
  // Layer indices follow the reference trunk so weights map by name.
  const int plan[] = {64, 64, 0, 128, 128, 0, 256, 256, 256, 256, 0, 512, 512, 512, 512, 0, 512, 512, 512, 512};
  torch::nn::Sequential seq;
  int64_t in = 3;
  for (int width : plan) {
    if (width == 0) {
      seq->push_back(torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(2).stride(2)));
    } else {
      seq->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, width, 3).padding(1)));
      seq->push_back(torch::nn::ReLU());
      in = width;
    }
  }
  trunk_ = register_module("features", seq);
  mean_ = register_buffer("mean", torch::tensor({0.485f, 0.456f, 0.406f}).view({1, 3, 1, 1}));
  std_ = register_buffer("std", torch::tensor({0.229f, 0.224f, 0.225f}).view({1, 3, 1, 1}));
  freeze(*this);
}

std::vector<torch::Tensor> Vgg19FeatureBackend::features(const torch::Tensor& images) {
  // Exclusive end indices of relu1_1, relu2_1, relu3_1, relu4_1, relu5_1.
  static constexpr std::size_t kTaps[] = {2, 7, 12, 21, 30};
  std::vector<torch::Tensor> out;
  auto x = (images - mean_) / std_;
  std::size_t layer = 0;
  for (std::size_t tap : kTaps) {
    for (; layer < tap; ++layer) {
      const auto module = trunk_[layer];
      if (auto* conv = module->as<torch::nn::Conv2d>()) {
        x = conv->forward(x);
      } else if (module->as<torch::nn::ReLU>()) {
        x = torch::relu(x);
      } else if (x.size(2) >= 2 && x.size(3) >= 2) {
        // Pooling a 1 px map is skipped so tiny downscales stay valid.
        x = F::max_pool2d(x, F::MaxPool2dFuncOptions(2).stride(2));
      }
    }
    out.push_back(x);
  }
  return out;
}

void Vgg19FeatureBackend::load_weights(const std::string& path) {
  const auto header = read_checkpoint_header(path);
  if (header.get_or("format", "") != "mttf-vgg19-1") {
    throw InputError(kModule, path + " is not a converted VGG-19 checkpoint");
  }
  load_parameters(*this, path);
  freeze(*this);
}

torch::Tensor LuminanceThresholdMatting::matte(const torch::Tensor& frames) {
  const auto luma = 0.299 * frames.select(1, 0) + 0.587 * frames.select(1, 1) + 0.114 * frames.select(1, 2);
  return (luma > threshold_).to(frames.scalar_type()).unsqueeze(1);
}

CommandMatting::CommandMatting(std::string command_template) : template_(std::move(command_template)) {
  if (template_.empty()) throw ConfigError(kModule, "matting command template is empty");
}

torch::Tensor CommandMatting::matte(const torch::Tensor& frames) {
  std::vector<torch::Tensor> masks;
  for (int64_t b = 0; b < frames.size(0); ++b) {
    ScratchDir scratch("mttf-matte");
    const std::string input = scratch.file("frame.ppm");
    const std::string output = scratch.file("mask.ppm");
    write_ppm(input, frames[b]);
    const std::string command =
        expand_template(template_, {{"input", shell_quote(input)}, {"output", shell_quote(output)}});
    const auto result = run_command(command);
    if (result.exit_code != 0) {
      throw AdapterError(kModule, "matting tool exited with status " + std::to_string(result.exit_code),
                         "command: " + command + "\n" + result.output);
    }
    auto mask = read_ppm(output).mean(0, true);
    if (mask.size(1) != frames.size(2) || mask.size(2) != frames.size(3)) {
      throw AdapterError(kModule, "matting tool returned " + detail::shape_string(mask) + " for a " +
                                      detail::shape_string(frames[b]) + " frame");
    }
    masks.push_back(mask.to(frames.scalar_type()));
  }
  return torch::stack(masks);
}

void LossWeights::validate() const {
  if (perceptual < 0 || l1 < 0 || background < 0) {
    throw ConfigError(kModule, "loss weights must be non-negative");
  }
}

std::vector<double> default_perceptual_scales() { return {0.5, 0.25, 0.125, 0.0625}; }

torch::Tensor perceptual_loss(const torch::Tensor& pred, const torch::Tensor& target, FeatureBackend& backend,
                              const std::vector<double>& scales) {
  expect_same_shape(pred, target, "perceptual loss");
  auto total = torch::zeros({}, pred.options());
  for (double s : scales) {
    const auto h = std::max<int64_t>(1, static_cast<int64_t>(std::floor(static_cast<double>(pred.size(2)) * s)));
    const auto w = std::max<int64_t>(1, static_cast<int64_t>(std::floor(static_cast<double>(pred.size(3)) * s)));
    auto opts = F::InterpolateFuncOptions().size(std::vector<int64_t>{h, w}).mode(torch::kArea);
    const auto fp = backend.features(F::interpolate(pred, opts));
    const auto ft = backend.features(F::interpolate(target, opts));
    for (std::size_t i = 0; i < fp.size(); ++i) total = total + (fp[i] - ft[i]).abs().mean();
  }
  return total;
}

torch::Tensor l1_loss(const torch::Tensor& pred, const torch::Tensor& target) {
  expect_same_shape(pred, target, "L1 loss");
  return (pred - target).abs().mean();
}

torch::Tensor background_loss(const torch::Tensor& mask, const torch::Tensor& frame, MattingAdapter& matting,
                              const std::string& frame_id) {
  torch::Tensor target;
  try {
    torch::NoGradGuard no_grad;
    target = matting.matte(frame);
  } catch (const Error& e) {
    throw TrainingError(kModule, "matting failed for frame " + (frame_id.empty() ? "<unnamed>" : frame_id) + ": " +
                                     e.what());
  }
  if (target.size(1) != 1) throw TrainingError(kModule, "matting adapter must return one channel");
  if (mask.size(1) != 1) throw InputError(kModule, "predicted mask must have one channel");
  expect_same_shape(mask, target, "background loss");
  return (mask - target).abs().mean();
}

torch::Tensor total_loss(const LossComponents& c, const LossWeights& w) {
  w.validate();
  return w.perceptual * c.perceptual + w.l1 * c.l1 + w.background * c.background;
}

}  // namespace mttf
