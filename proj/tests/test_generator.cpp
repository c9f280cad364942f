#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <set>

#include "mttf/command.hpp"
#include "mttf/errors.hpp"
#include "mttf/model.hpp"
#include "mttf/warp.hpp"
#include "test_support.hpp"

using namespace mttf;

namespace {

DenseMotion identity_motion(int64_t batch, int64_t g, MotionRole role) {
  return DenseMotion{identity_grid(g, torch::kFloat32).expand({batch, g, g, 2}).contiguous(), role};
}

std::size_t distinct_parameters(torch::nn::Module& m) {
  std::set<const void*> ptrs;
  for (const auto& p : m.parameters()) ptrs.insert(p.data_ptr());
  return ptrs.size();
}

}  // namespace

TEST_CASE("route plans") {
  SUBCASE("three-resolution model at 768") {
    auto a = plan_route(768, 768, 3);
    auto b = plan_route(768, 384, 3);
    auto c = plan_route(768, 192, 3);
    CHECK(a.num_up == 3);
    CHECK(b.num_up == 2);
    CHECK(c.num_up == 1);
    for (const auto* p : {&a, &b, &c}) {
      CHECK(p->num_up + p->num_same == 3);
      CHECK(p->grid == 96);
    }
    CHECK(a.shared_block_ids == std::vector<std::string>{"up192", "up384", "up768"});
    CHECK(c.shared_block_ids == std::vector<std::string>{"up192", "same192_0", "same192_1"});
  }
  SUBCASE("three-resolution model at 512") {
    auto p = plan_route(512, 128, 3);
    CHECK(p.num_up == 1);
    CHECK(p.num_same == 2);
  }
  SUBCASE("single-resolution degenerate case") {
    auto p = plan_route(64, 64, 2, 1);
    CHECK(p.num_up == 2);
    CHECK(p.num_same == 0);
  }
  SUBCASE("unsupported targets") {
    CHECK_THROWS_AS(plan_route(768, 96, 3), ConfigError);
    CHECK_THROWS_AS(plan_route(768, 384, 3, 1), ConfigError);
    CHECK_THROWS_AS(plan_route(100, 100, 3), ConfigError);
  }
}

TEST_CASE("background generator") {
  torch::manual_seed(0);
  torch::NoGradGuard no_grad;
  auto cfg = test::toy_config(2, 32, 2, 1, 8);  // G = 8, r_i = 32
  BackgroundGenerator bg(cfg);
  bg->eval();
  BlockUsageLog log;
  bg->set_usage_log(&log);
  auto plan = plan_route(32, 32, 2, 1);
  auto out = bg->forward(torch::rand({1, 3, 8, 8}), identity_motion(1, 8, MotionRole::kBackground), plan);
  CHECK(out.sizes() == torch::IntArrayRef{1, 3, 32, 32});
  CHECK(out.min().item<double>() >= 0.0);
  CHECK(out.max().item<double>() <= 1.0);
  CHECK(log == BlockUsageLog{"unet", "unet_head", "up16", "up32", "head32"});

  SUBCASE("batched motion broadcasts a batch-1 key frame") {
    auto many = bg->forward(torch::rand({1, 3, 8, 8}), identity_motion(3, 8, MotionRole::kBackground), plan);
    CHECK(many.size(0) == 3);
  }
  SUBCASE("foreign route plans are rejected") {
    CHECK_THROWS_AS(bg->forward(torch::rand({1, 3, 8, 8}), identity_motion(1, 8, MotionRole::kBackground),
                                plan_route(64, 64, 2, 1)),
                    InputError);
  }
}

TEST_CASE("foreground generator output range and shape") {
  torch::manual_seed(1);
  torch::NoGradGuard no_grad;
  auto cfg = test::toy_config(2, 32, 2, 1, 8);
  ForegroundGenerator fg(cfg);
  fg->eval();
  auto plan = plan_route(32, 32, 2, 1);
  auto [image, mask] = fg->forward(torch::rand({2, 3, 32, 32}), identity_motion(2, 8, MotionRole::kForeground),
                                   OcclusionMap{torch::rand({2, 1, 8, 8})}, plan);
  CHECK(image.sizes() == torch::IntArrayRef{2, 3, 32, 32});
  CHECK(mask.sizes() == torch::IntArrayRef{2, 1, 32, 32});
  for (const auto& t : {image, mask}) {
    CHECK(t.min().item<double>() >= 0.0);
    CHECK(t.max().item<double>() <= 1.0);
  }
}

TEST_CASE("occlusion limits of the warp-while-generate decoder") {
  torch::manual_seed(2);
  torch::NoGradGuard no_grad;
  auto cfg = test::toy_config(2, 32, 2, 2, 8);
  ForegroundGenerator fg(cfg);
  fg->eval();
  auto grid = identity_grid(8, torch::kFloat32) + 0.05 * torch::randn({1, 8, 8, 2});
  DenseMotion motion{grid, MotionRole::kForeground};

  for (int r : {32, 16}) {
    CAPTURE(r);
    auto plan = plan_route(32, r, 2, 2);
    auto features = fg->encode(torch::rand({1, 3, r, r}), plan);
    REQUIRE(features.size() == 3);

    ForegroundTrace trace;
    fg->decode(features, motion, OcclusionMap{torch::ones({1, 1, 8, 8})}, plan, &trace);
    REQUIRE(trace.stage_outputs.size() == 2);
    for (std::size_t k = 0; k < trace.stage_outputs.size(); ++k) {
      CHECK(torch::equal(trace.stage_outputs[k], trace.warped_skips[k]));
    }

    auto closed = OcclusionMap{torch::zeros({1, 1, 8, 8})};
    auto reference = fg->decode(features, motion, closed, plan);
    auto perturbed = features;
    for (std::size_t k = 0; k + 1 < perturbed.size(); ++k) perturbed[k] = perturbed[k] + torch::randn_like(perturbed[k]);
    auto moved = fg->decode(perturbed, motion, closed, plan);
    CHECK(torch::equal(reference.first, moved.first));
    CHECK(torch::equal(reference.second, moved.second));

    // With occlusion open, the same perturbation reaches the output.
    auto open = OcclusionMap{torch::full({1, 1, 8, 8}, 0.5)};
    CHECK_FALSE(torch::equal(fg->decode(features, motion, open, plan).first,
                             fg->decode(perturbed, motion, open, plan).first));
  }
}

TEST_CASE("fusion") {
  torch::manual_seed(3);
  auto fg = torch::rand({1, 3, 4, 4});
  auto bg = torch::rand({1, 3, 4, 4});
  CHECK(torch::equal(fuse(fg, bg, torch::ones({1, 1, 4, 4})), fg));
  CHECK(torch::equal(fuse(fg, bg, torch::zeros({1, 1, 4, 4})), bg));
  CHECK(torch::all(fuse(torch::ones({1, 3, 4, 4}), torch::zeros({1, 3, 4, 4}), torch::full({1, 1, 4, 4}, 0.5)) == 0.5)
            .item<bool>());
  auto mixed = fuse(fg, bg, torch::rand({1, 1, 4, 4}));
  CHECK(torch::all(mixed >= torch::minimum(fg, bg) - 1e-7).item<bool>());
  CHECK(torch::all(mixed <= torch::maximum(fg, bg) + 1e-7).item<bool>());
  CHECK_THROWS_AS(fuse(fg, torch::rand({1, 3, 4, 5}), torch::ones({1, 1, 4, 4})), InputError);
  CHECK_THROWS_AS(fuse(fg, bg, torch::ones({1, 2, 4, 4})), InputError);
}

TEST_CASE("routes share blocks across resolutions") {
  torch::manual_seed(4);
  auto cfg = test::toy_config(2, 64, 2, 2, 8);
  MttfModel model(cfg);
  const auto params_before = distinct_parameters(*model);
  CHECK(params_before == model->parameters().size());

  BlockUsageLog fg_log, bg_log;
  model->foreground()->set_usage_log(&fg_log);
  model->background()->set_usage_log(&bg_log);
  std::set<std::string> fg_used, bg_used;
  auto key = FrameImage::from_tensor(torch::rand({3, 64, 64}));
  for (const auto& plan : model->all_routes()) {
    fg_log.clear();
    bg_log.clear();
    auto [latent, mv] = model->factorizer()->analyze(key);
    auto syn = model->synthesize(key, latent, mv, mv, {plan});
    CHECK(syn.outputs.front().fused.size(2) == plan.resolution);
    CHECK(distinct_parameters(*model) == params_before);
    CHECK(std::set<std::string>(fg_log.begin(), fg_log.end()).size() == fg_log.size());
    CHECK(std::set<std::string>(bg_log.begin(), bg_log.end()).size() == bg_log.size());
    fg_used.insert(fg_log.begin(), fg_log.end());
    bg_used.insert(bg_log.begin(), bg_log.end());
  }
  auto fg_ids = model->foreground()->block_ids();
  auto bg_ids = model->background()->block_ids();
  CHECK(fg_used == std::set<std::string>(fg_ids.begin(), fg_ids.end()));
  CHECK(bg_used == std::set<std::string>(bg_ids.begin(), bg_ids.end()));

  // The 16 -> 32 upsample block serves both routes and collects both gradients.
  model->zero_grad();
  auto [latent, mv] = model->factorizer()->analyze(key);
  auto syn = model->synthesize(key, latent, mv, mv, model->all_routes());
  syn.outputs[0].fused.mean().backward();
  auto fg_params = model->foreground()->named_parameters();
  auto* up32 = fg_params.find("up32.body.conv.weight");
  REQUIRE(up32 != nullptr);
  auto g0 = up32->grad().clone();
  model->zero_grad();
  std::tie(latent, mv) = model->factorizer()->analyze(key);
  syn = model->synthesize(key, latent, mv, mv, model->all_routes());
  syn.outputs[1].fused.mean().backward();
  CHECK(g0.abs().sum().item<double>() > 0);
  CHECK(up32->grad().abs().sum().item<double>() > 0);
}

TEST_CASE("three-resolution model at 768 produces every r_i") {
  torch::manual_seed(5);
  torch::NoGradGuard no_grad;
  auto cfg = test::toy_config(2, 768, 3, 3, 8);
  cfg.generator_min_channels = 4;
  MttfModel model(cfg);
  model->eval();
  auto key = FrameImage::from_tensor(torch::rand({3, 768, 768}));
  auto [latent, mv] = model->factorizer()->analyze(key);
  auto syn = model->synthesize(key, latent, mv, mv, model->all_routes());
  REQUIRE(syn.outputs.size() == 3);
  const std::vector<int> sizes{768, 384, 192};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& out = syn.outputs[i];
    CHECK(out.fused.sizes() == torch::IntArrayRef{1, 3, sizes[i], sizes[i]});
    CHECK(out.mask.sizes() == torch::IntArrayRef{1, 1, sizes[i], sizes[i]});
    CHECK(torch::allclose(out.fused, out.mask * out.foreground + (1 - out.mask) * out.background));
  }
}

TEST_CASE("checkpoints round-trip parameters and configuration") {
  torch::manual_seed(6);
  ScratchDir dir("mttf-ckpt");
  auto cfg = test::toy_config(3, 32, 2, 2, 8);
  MttfModel model(cfg);
  const auto path = dir.file("m.ckpt");
  save_checkpoint(model, path);
  auto loaded = load_checkpoint(path);
  CHECK(loaded->config().to_key_values().entries() == cfg.to_key_values().entries());
  auto a = model->named_parameters();
  auto b = loaded->named_parameters();
  REQUIRE(a.size() == b.size());
  for (const auto& p : a) CHECK(torch::equal(p.value(), b[p.key()]));

  SUBCASE("truncated files are rejected") {
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 10);
    CHECK_THROWS_AS(load_checkpoint(path), InputError);
  }
  SUBCASE("missing files are rejected") { CHECK_THROWS_AS(load_checkpoint(dir.file("nope.ckpt")), InputError); }
}
