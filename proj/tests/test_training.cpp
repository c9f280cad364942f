#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>

#include "mttf/command.hpp"
#include "mttf/errors.hpp"
#include "mttf/files.hpp"
#include "mttf/losses.hpp"
#include "mttf/synthetic.hpp"
#include "mttf/training.hpp"
#include "test_support.hpp"

using namespace mttf;

namespace {

// Two linear layers: 2x and the per-image sum.
class LinearBackend final : public FeatureBackend {
 public:
  std::vector<torch::Tensor> features(const torch::Tensor& images) override {
    return {2 * images, images.sum({1, 2, 3}, true)};
  }
};

double scalar_l1(const torch::Tensor& a, const torch::Tensor& b) {
  auto x = a.to(torch::kFloat64).contiguous().flatten();
  auto y = b.to(torch::kFloat64).contiguous().flatten();
  double sum = 0;
  for (int64_t i = 0; i < x.numel(); ++i) sum += std::abs(x[i].item<double>() - y[i].item<double>());
  return sum / static_cast<double>(x.numel());
}

TrainConfig toy_train_config() {
  TrainConfig c;
  c.feature_backend = "random";
  c.epochs = 1;
  c.steps_per_epoch = 2;
  c.perceptual_scales = 2;
  return c;
}

std::vector<Clip> disc_clips(int size, int count = 2) {
  std::vector<Clip> clips;
  for (int i = 0; i < count; ++i) {
    DiscClipOptions o;
    o.frames = 4;
    o.size = size;
    o.seed = static_cast<std::uint64_t>(i);
    clips.push_back(moving_disc_clip(o));
  }
  return clips;
}

}  // namespace

TEST_CASE("loss weights and the weighted sum") {
  LossWeights w;
  CHECK(w.perceptual == 10.0);
  CHECK(w.l1 == 10.0);
  CHECK(w.background == 10.0);
  LossComponents c{torch::tensor(0.1, torch::kFloat64), torch::tensor(0.2, torch::kFloat64),
                   torch::tensor(0.3, torch::kFloat64)};
  CHECK(total_loss(c, w).item<double>() == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(total_loss(c, LossWeights{0, 0, 0}).item<double>() == 0.0);
  CHECK(total_loss(c, LossWeights{1, 0, 0}).item<double>() == doctest::Approx(0.1).epsilon(1e-12));
  CHECK_THROWS_AS(total_loss(c, LossWeights{-1, 0, 0}), ConfigError);
}

TEST_CASE("L1 loss") {
  torch::manual_seed(10);
  auto a = torch::rand({2, 3, 8, 8});
  auto b = torch::rand({2, 3, 8, 8});
  CHECK(mttf::l1_loss(a, a).item<double>() == 0.0);
  CHECK(mttf::l1_loss(a, b).item<double>() == mttf::l1_loss(b, a).item<double>());
  CHECK(mttf::l1_loss(a, a + 0.5).item<double>() == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(std::abs(mttf::l1_loss(a, b).item<double>() - scalar_l1(a, b)) <= 1e-7);
  CHECK_THROWS_AS(mttf::l1_loss(a, torch::rand({2, 3, 8, 7})), InputError);
}

TEST_CASE("perceptual loss against a linear backend") {
  torch::manual_seed(11);
  auto p = torch::rand({1, 1, 4, 4}, torch::kFloat64);
  auto t = torch::rand({1, 1, 4, 4}, torch::kFloat64);
  LinearBackend backend;

  // Scalar oracle: full scale and one 2x2 area downscale.
  auto d = (p - t).squeeze();
  double full_l1 = 0, full_sum = 0;
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      full_l1 += std::abs(2 * d[y][x].item<double>());
      full_sum += d[y][x].item<double>();
    }
  }
  double half_l1 = 0, half_sum = 0;
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) {
      const double m = (d[2 * y][2 * x].item<double>() + d[2 * y][2 * x + 1].item<double>() +
                        d[2 * y + 1][2 * x].item<double>() + d[2 * y + 1][2 * x + 1].item<double>()) / 4;
      half_l1 += std::abs(2 * m);
      half_sum += m;
    }
  }
  const double expected = full_l1 / 16 + std::abs(full_sum) + half_l1 / 4 + std::abs(half_sum);
  CHECK(perceptual_loss(p, t, backend, {1.0, 0.5}).item<double>() == doctest::Approx(expected).epsilon(1e-12));
  CHECK(perceptual_loss(p, p, backend, {1.0, 0.5}).item<double>() == 0.0);

  SUBCASE("scales floor to at least one pixel") {
    const double tiny = perceptual_loss(p, t, backend, {0.01}).item<double>();
    const double mean = d.mean().item<double>();
    CHECK(tiny == doctest::Approx(2 * std::abs(mean) + std::abs(mean)).epsilon(1e-12));
  }
}

TEST_CASE("random feature backend") {
  RandomFeatureBackend a(7), b(7), c(8);
  torch::manual_seed(12);
  auto x = torch::rand({2, 3, 16, 16});
  auto fa = a.features(x);
  auto fb = b.features(x);
  auto fc = c.features(x);
  REQUIRE(fa.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(torch::equal(fa[i], fb[i]));
  CHECK_FALSE(torch::equal(fa[0], fc[0]));
  for (const auto& p : a.parameters()) CHECK_FALSE(p.requires_grad());

  auto y = torch::rand({1, 3, 16, 16});
  auto z = torch::rand({1, 3, 16, 16}).requires_grad_(true);
  perceptual_loss(z, y, a).backward();
  CHECK(z.grad().abs().sum().item<double>() > 0);
  CHECK(perceptual_loss(y, y, a).item<double>() == 0.0);
  CHECK(perceptual_loss(z, y, a).item<double>() == perceptual_loss(y, z, a).item<double>());

  CHECK_THROWS_AS(RandomFeatureBackend(0, {8, 8, 8}), ConfigError);
}

TEST_CASE("VGG-19 backend structure and weight files") {
  Vgg19FeatureBackend vgg;
  auto params = vgg.named_parameters();
  int convs = 0;
  for (const auto& p : params) convs += p.key().find(".weight") != std::string::npos ? 1 : 0;
  CHECK(convs == 16);
  CHECK(params.find("features.0.weight") != nullptr);
  CHECK(params.find("features.34.bias") != nullptr);
  CHECK(vgg.named_buffers().find("mean") != nullptr);

  torch::NoGradGuard no_grad;
  auto f = vgg.features(torch::rand({1, 3, 32, 32}));
  REQUIRE(f.size() == 5);
  const std::vector<std::vector<int64_t>> shapes{
      {1, 64, 32, 32}, {1, 128, 16, 16}, {1, 256, 8, 8}, {1, 512, 4, 4}, {1, 512, 2, 2}};
  for (std::size_t i = 0; i < 5; ++i) CHECK(f[i].sizes() == torch::IntArrayRef(shapes[i]));
  CHECK(vgg.features(torch::rand({1, 3, 1, 1}))[4].sizes() == torch::IntArrayRef{1, 512, 1, 1});

  ScratchDir dir("mttf-vgg");
  KeyValueMap header;
  header.set("format", "mttf-vgg19-1");
  save_parameters(vgg, header, dir.file("vgg.ckpt"));
  Vgg19FeatureBackend loaded;
  loaded.load_weights(dir.file("vgg.ckpt"));
  auto lp = loaded.named_parameters();
  for (const auto& p : params) CHECK(torch::equal(p.value(), lp[p.key()]));
  for (const auto& p : loaded.parameters()) CHECK_FALSE(p.requires_grad());

  KeyValueMap wrong;
  wrong.set("format", "something-else");
  save_parameters(vgg, wrong, dir.file("other.ckpt"));
  CHECK_THROWS_AS(loaded.load_weights(dir.file("other.ckpt")), InputError);

  TrainConfig c;
  CHECK_THROWS_AS(make_feature_backend(c), ConfigError);
  c.vgg19_weights = dir.file("vgg.ckpt");
  CHECK(make_feature_backend(c) != nullptr);
}

TEST_CASE("VGG-19 weight converter") {
  if (std::string(MTTF_PYTHON).empty() || run_command(std::string(MTTF_PYTHON) + " -c 'import torch'").exit_code != 0) {
    MESSAGE("python3 with torch unavailable; converter not exercised");
    return;
  }
  ScratchDir dir("mttf-convert");
  // A state dict with VGG-19 shapes; features.0.weight holds 0, 1, 2, ...
  const std::string make =
      "import torch, sys\n"
      "plan = [64, 64, 0, 128, 128, 0, 256, 256, 256, 256, 0, 512, 512, 512, 512, 0, 512, 512, 512, 512]\n"
      "sd, i, c = {}, 0, 3\n"
      "for w in plan:\n"
      "    if w == 0:\n"
      "        i += 1\n"
      "        continue\n"
      "    sd[f'features.{i}.weight'] = torch.full((w, c, 3, 3), 0.01)\n"
      "    sd[f'features.{i}.bias'] = torch.zeros(w)\n"
      "    c, i = w, i + 2\n"
      "sd['features.0.weight'] = torch.arange(64 * 27, dtype=torch.float32).view(64, 3, 3, 3)\n"
      "sd['classifier.0.weight'] = torch.zeros(2, 2)\n"
      "torch.save(sd, sys.argv[1])\n";
  write_text_atomic(dir.file("make.py"), make);
  const auto py = std::string(MTTF_PYTHON);
  auto r = run_command(py + " " + shell_quote(dir.file("make.py")) + " " + shell_quote(dir.file("vgg.pth")));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  r = run_command(py + " " + shell_quote(MTTF_CONVERTER_PATH) + " " + shell_quote(dir.file("vgg.pth")) + " " +
                  shell_quote(dir.file("vgg.ckpt")));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);

  Vgg19FeatureBackend vgg;
  vgg.load_weights(dir.file("vgg.ckpt"));
  auto params = vgg.named_parameters();
  CHECK(torch::equal(params["features.0.weight"], torch::arange(64 * 27, torch::kFloat32).view({64, 3, 3, 3})));
  CHECK(torch::all(params["features.34.weight"] == 0.01f).item<bool>());

  write_text_atomic(dir.file("bad.py"), "import torch, sys\ntorch.save({'x': torch.zeros(1)}, sys.argv[1])\n");
  run_command(py + " " + shell_quote(dir.file("bad.py")) + " " + shell_quote(dir.file("bad.pth")));
  r = run_command(py + " " + shell_quote(MTTF_CONVERTER_PATH) + " " + shell_quote(dir.file("bad.pth")) + " " +
                  shell_quote(dir.file("bad.ckpt")));
  CHECK(r.exit_code != 0);
  CHECK(r.output.find("features.0.weight") != std::string::npos);
}

TEST_CASE("background loss") {
  LuminanceThresholdMatting matting;
  const int n = 32;
  const double c = 16.0, radius = 9.5;
  auto frame = torch::full({1, 3, n, n}, 0.1);
  auto acc = frame.accessor<float, 4>();
  int disc_left = 0, disc_right = 0;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double dx = x + 0.5 - c, dy = y + 0.5 - c;
      if (dx * dx + dy * dy <= radius * radius) {
        for (int ch = 0; ch < 3; ++ch) acc[0][ch][y][x] = 0.9f;
        (x < n / 2 ? disc_left : disc_right)++;
      }
    }
  }
  const double pixels = n * n;

  auto target = matting.matte(frame);
  CHECK(target.sum().item<double>() == disc_left + disc_right);
  CHECK(background_loss(target, frame, matting).item<double>() == 0.0);

  const double all_fg = background_loss(torch::ones({1, 1, n, n}), frame, matting).item<double>();
  CHECK(all_fg == doctest::Approx(1.0 - (disc_left + disc_right) / pixels).epsilon(1e-6));

  auto left = torch::zeros({1, 1, n, n});
  left.narrow(3, 0, n / 2).fill_(1.0);
  const double background_left = n * n / 2 - disc_left;
  CHECK(background_loss(left, frame, matting).item<double>() ==
        doctest::Approx((disc_right + background_left) / pixels).epsilon(1e-6));

  CHECK(background_loss(torch::full({1, 1, n, n}, 0.5), frame, matting).item<double>() ==
        doctest::Approx(0.5).epsilon(1e-6));
  CHECK_THROWS_AS(background_loss(torch::ones({1, 2, n, n}), frame, matting), InputError);

  SUBCASE("luma weights") {
    auto red = torch::zeros({1, 3, 1, 1});
    red[0][0] = 1.0;
    CHECK(LuminanceThresholdMatting(0.29).matte(red).item<double>() == 1.0);
    CHECK(LuminanceThresholdMatting(0.30).matte(red).item<double>() == 0.0);
  }

  SUBCASE("matting tool failures name the frame") {
    CommandMatting failing("exit 3");
    try {
      background_loss(torch::ones({1, 1, 4, 4}), torch::rand({1, 3, 4, 4}), failing, "clip2:frame7");
      FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
      CHECK(std::string(e.what()).find("clip2:frame7") != std::string::npos);
    }
    CHECK_THROWS_AS(CommandMatting(""), ConfigError);
  }

  SUBCASE("matting tool output is read back") {
    CommandMatting copy("cp {input} {output}");
    auto img = torch::full({1, 3, 4, 4}, 0.4);
    auto mask = copy.matte(img);
    CHECK(mask.sizes() == torch::IntArrayRef{1, 1, 4, 4});
    CHECK(test::max_abs_diff(mask, torch::full({1, 1, 4, 4}, 0.4)) <= 1.0 / 255);
  }
}

TEST_CASE("learning-rate schedule") {
  TrainConfig c;
  CHECK(c.learning_rate == 2e-4);
  CHECK(c.beta1 == 0.5);
  CHECK(c.beta2 == 0.999);
  CHECK(c.epochs == 100);
  CHECK(c.milestones == std::vector<int>{60, 90});
  const std::vector<std::pair<int, double>> expected{
      {0, 2e-4}, {59, 2e-4}, {60, 2e-5}, {89, 2e-5}, {90, 2e-6}, {95, 2e-6}, {100, 2e-6}};
  for (const auto& [epoch, lr] : expected) {
    CAPTURE(epoch);
    // Within four ulps of the decimal value.
    CHECK(std::abs(learning_rate_at(epoch, c) - lr) <= 1e-15 * lr);
  }
}

TEST_CASE("training configuration") {
  TrainConfig c = toy_train_config();
  c.milestones = {3, 7};
  c.seed = 99;
  c.matting_threshold = 0.25;
  auto back = TrainConfig::from_key_values(c.to_key_values());
  CHECK(back.to_key_values().entries() == c.to_key_values().entries());
  CHECK(back.milestones == c.milestones);
  CHECK(back.seed == 99);

  auto bad = [](auto mutate) {
    TrainConfig t = toy_train_config();
    mutate(t);
    return t;
  };
  CHECK_THROWS_AS(bad([](TrainConfig& t) { t.epochs = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& t) { t.beta1 = 1.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& t) { t.milestones = {90, 60}; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& t) { t.feature_backend = "resnet"; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& t) { t.matting = "command"; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](TrainConfig& t) { t.weights.l1 = -1; }).validate(), ConfigError);
}

TEST_CASE("synthetic disc clips") {
  DiscClipOptions o;
  o.frames = 5;
  o.size = 32;
  auto clip = moving_disc_clip(o);
  CHECK(clip.sizes() == torch::IntArrayRef{5, 3, 32, 32});
  CHECK(torch::equal(clip, moving_disc_clip(o)));
  CHECK(test::max_abs_diff(clip * 255, (clip * 255).round()) <= 1e-4);
  CHECK_FALSE(torch::equal(clip[0], clip[4]));

  LuminanceThresholdMatting matting;
  const double area = matting.matte(clip).mean({1, 2, 3}).mean().item<double>();
  CHECK(area == doctest::Approx(M_PI * o.radius * o.radius).epsilon(0.1));

  o.speed = 0;
  auto still = moving_disc_clip(o);
  for (int t = 1; t < 5; ++t) CHECK(torch::equal(still[0], still[t]));
  o.radius = 0.5;
  CHECK_THROWS_AS(moving_disc_clip(o), ConfigError);
}

TEST_CASE("pair sampling") {
  auto clips = disc_clips(16, 3);
  std::mt19937_64 a(5), b(5);
  auto x = sample_pairs(clips, 4, a);
  auto y = sample_pairs(clips, 4, b);
  CHECK(x.key.sizes() == torch::IntArrayRef{4, 3, 16, 16});
  CHECK(x.inter.sizes() == torch::IntArrayRef{4, 3, 16, 16});
  CHECK(x.ids == y.ids);
  CHECK(torch::equal(x.inter, y.inter));
  for (const auto& id : x.ids) CHECK(id.rfind("clip", 0) == 0);
  CHECK_THROWS_AS(sample_pairs({}, 1, a), ConfigError);
}

TEST_CASE("multi-resolution loss") {
  torch::manual_seed(13);
  RandomFeatureBackend backend(0);
  LuminanceThresholdMatting matting;
  auto clips = disc_clips(64);

  SUBCASE("single resolution") {
    MttfModel model(test::toy_config(2, 32, 2, 1, 8));
    std::mt19937_64 rng(1);
    auto batch = sample_pairs(disc_clips(32), 1, rng);
    auto loss = multires_loss(model, batch, backend, matting, LossWeights{}, rng, {0.5});
    REQUIRE(loss.terms.size() == 1);
    CHECK(loss.input_index == 0);
    CHECK(loss.total.item<double>() ==
          doctest::Approx(total_loss(loss.terms[0], LossWeights{}).item<double>()).epsilon(1e-6));
  }

  SUBCASE("three resolutions") {
    MttfModel model(test::toy_config(2, 64, 3, 3, 8));
    std::mt19937_64 rng(2);
    auto batch = sample_pairs(clips, 1, rng);
    std::set<int> seen;
    for (int i = 0; i < 12; ++i) {
      auto loss = multires_loss(model, batch, backend, matting, LossWeights{}, rng, {0.5});
      CHECK(loss.terms.size() == 3);
      CHECK(std::isfinite(loss.total.item<double>()));
      seen.insert(loss.input_index);
    }
    CHECK(seen == std::set<int>{0, 1, 2});

    std::mt19937_64 r1(3), r2(3);
    auto l1 = multires_loss(model, batch, backend, matting, LossWeights{}, r1, {0.5});
    auto l2 = multires_loss(model, batch, backend, matting, LossWeights{}, r2, {0.5});
    CHECK(l1.input_index == l2.input_index);
    CHECK(l1.total.item<double>() == l2.total.item<double>());
  }
}

TEST_CASE("end-to-end gradients match finite differences") {
  torch::manual_seed(14);
  MttfModel model(test::toy_config(2, 16, 1, 1, 4));
  model->to(torch::kFloat64);
  {
    // Move away from the near-identity start so every path carries gradient.
    torch::NoGradGuard no_grad;
    for (auto& p : model->parameters()) p.add_(0.05 * torch::randn_like(p));
  }
  RandomFeatureBackend backend(0, {4, 4, 4, 4, 4});
  backend.to(torch::kFloat64);
  LuminanceThresholdMatting matting;
  DiscClipOptions o;
  o.frames = 2;
  o.size = 16;
  auto clip = moving_disc_clip(o).to(torch::kFloat64);
  const FrameImage key(clip.narrow(0, 0, 1));
  const auto inter_frame = clip.narrow(0, 1, 1);
  const auto route = model->all_routes();

  auto [latent, key_mv] = model->factorizer()->analyze(key);
  latent.data = latent.data.detach();
  key_mv.weights = key_mv.weights.detach();
  key_mv.biases = key_mv.biases.detach();
  auto inter_mv = model->factorizer()->analyze(FrameImage(inter_frame)).second;
  auto weights = inter_mv.weights.detach().clone().requires_grad_(true);
  auto biases = inter_mv.biases.detach().clone();

  auto loss_fn = [&](const torch::Tensor& w) {
    const auto syn = model->synthesize(key, latent, key_mv, CompactMotionVector{w, biases}, route);
    const auto& out = syn.outputs.front();
    LossComponents c;
    c.perceptual = perceptual_loss(out.fused, inter_frame, backend, {1.0, 0.5});
    c.l1 = mttf::l1_loss(out.fused, inter_frame);
    c.background = background_loss(out.mask, inter_frame, matting);
    return total_loss(c, LossWeights{});
  };

  const double h = 1e-6;
  auto check = [&](const torch::Tensor& analytic, const std::function<double(double)>& eval) {
    const double fd = (eval(h) - eval(-h)) / (2 * h);
    const double g = analytic.item<double>();
    CAPTURE(g);
    CAPTURE(fd);
    CHECK(std::abs(g - fd) <= 1e-2 * std::max(std::abs(fd), 1e-4));
  };

  // Motion vector entries.
  model->zero_grad();
  loss_fn(weights).backward();
  const auto gw = weights.grad().clone();
  CHECK(gw.abs().sum().item<double>() > 0);
  for (int64_t k = 0; k < weights.size(1); ++k) {
    CAPTURE(k);
    check(gw[0][k], [&](double e) {
      torch::NoGradGuard no_grad;
      auto w = weights.detach().clone();
      w[0][k] += e;
      return loss_fn(w).item<double>();
    });
  }

  // A sample of parameter entries from every sub-network.
  auto named = model->named_parameters();
  std::mt19937_64 rng(0);
  int checked = 0;
  for (const auto& prefix : {"motion.", "foreground.", "background."}) {
    std::vector<std::string> names;
    for (const auto& p : named) {
      if (p.key().rfind(prefix, 0) == 0 && p.value().grad().defined() && p.value().grad().abs().sum().item<double>() > 0) {
        names.push_back(p.key());
      }
    }
    REQUIRE_FALSE(names.empty());
    for (int i = 0; i < 3; ++i) {
      const auto& name = names[std::uniform_int_distribution<std::size_t>(0, names.size() - 1)(rng)];
      auto param = named[name];
      const auto flat_grad = param.grad().flatten();
      const auto index = flat_grad.abs().argmax().item<int64_t>();
      CAPTURE(name);
      check(flat_grad[index], [&](double e) {
        torch::NoGradGuard no_grad;
        auto flat = param.view({-1});
        const double old = flat[index].item<double>();
        flat[index] = old + e;
        const double value = loss_fn(weights.detach()).item<double>();
        flat[index] = old;
        return value;
      });
      ++checked;
    }
  }
  CHECK(checked == 9);
}

TEST_CASE("trainer") {
  torch::manual_seed(15);
  auto cfg = test::toy_config(2, 32, 2, 2, 8);
  auto clips = disc_clips(32);

  SUBCASE("optimizer settings follow the configuration") {
    TrainConfig tc = toy_train_config();
    Trainer trainer(MttfModel(cfg), tc, make_feature_backend(tc), make_matting(tc));
    auto& opts = static_cast<torch::optim::AdamOptions&>(trainer.optimizer().param_groups()[0].options());
    CHECK(opts.lr() == 2e-4);
    CHECK(std::get<0>(opts.betas()) == 0.5);
    CHECK(std::get<1>(opts.betas()) == 0.999);
    trainer.set_epoch(60);
    CHECK(std::abs(opts.lr() - 2e-5) <= 1e-15 * 2e-5);
  }

  SUBCASE("a training run logs and checkpoints") {
    ScratchDir dir("mttf-train");
    TrainConfig tc = toy_train_config();
    tc.epochs = 2;
    tc.checkpoint_interval = 1;
    Trainer trainer(MttfModel(cfg), tc, make_feature_backend(tc), make_matting(tc));
    std::ostringstream log;
    auto rows = trainer.train(clips, &log, dir.path().string());
    REQUIRE(rows.size() == 4);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(rows[i].step == static_cast<int64_t>(i));
      CHECK(rows[i].epoch == static_cast<int>(i / 2));
      CHECK(std::isfinite(rows[i].total));
      CHECK(rows[i].total == doctest::Approx(10 * (rows[i].perceptual + rows[i].l1 + rows[i].background)).epsilon(1e-5));
    }
    std::istringstream lines(log.str());
    std::string line;
    std::getline(lines, line);
    CHECK(line == "step,epoch,L_per,L_L1,L_bg,total,lr");
    int count = 0;
    while (std::getline(lines, line)) ++count;
    CHECK(count == 4);
    for (const char* f : {"epoch_1.ckpt", "epoch_2.ckpt", "final.ckpt"}) {
      CHECK(std::filesystem::exists(dir.path() / f));
    }
    auto reloaded = load_checkpoint(dir.file("final.ckpt"));
    auto a = trainer.model()->named_parameters();
    for (const auto& p : reloaded->named_parameters()) CHECK(torch::equal(p.value(), a[p.key()]));
  }

  SUBCASE("seeded runs are reproducible") {
    TrainConfig tc = toy_train_config();
    std::vector<double> totals[2];
    for (auto& totals_run : totals) {
      torch::manual_seed(16);
      Trainer trainer(MttfModel(cfg), tc, make_feature_backend(tc), make_matting(tc));
      for (int i = 0; i < 2; ++i) totals_run.push_back(trainer.step(clips).total);
    }
    CHECK(totals[0] == totals[1]);
  }

  SUBCASE("bad inputs") {
    TrainConfig tc = toy_train_config();
    Trainer trainer(MttfModel(cfg), tc, make_feature_backend(tc), make_matting(tc));
    CHECK_THROWS_AS(trainer.train({}, nullptr, ""), ConfigError);
    CHECK_THROWS_AS(trainer.train(disc_clips(16), nullptr, ""), ConfigError);
    CHECK_THROWS_AS(Trainer(MttfModel(cfg), tc, nullptr, make_matting(tc)), ConfigError);
    {
      torch::NoGradGuard no_grad;
      for (auto& p : trainer.model()->parameters()) p.fill_(std::nan(""));
    }
    CHECK_THROWS_AS(trainer.step(clips), TrainingError);
  }
}
