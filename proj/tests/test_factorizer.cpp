#include <doctest.h>

#include <random>

#include "mttf/errors.hpp"
#include "mttf/factorizer.hpp"
#include "mttf/nn_blocks.hpp"
#include "test_support.hpp"

using namespace mttf;

TEST_CASE("configuration defaults and validation") {
  ModelConfig cfg;
  CHECK(cfg.factorizer.num_features == 20);
  CHECK(cfg.num_foreground == 35);
  CHECK(cfg.num_background == 5);
  auto split = ModelConfig::with_features(20);
  CHECK(split.num_foreground == 35);
  CHECK(split.num_background == 5);
  auto toy = ModelConfig::with_features(4);
  CHECK(toy.num_foreground + toy.num_background == 8);
  CHECK(toy.num_background >= 1);

  FactorizerConfig f;
  f.resolution = 768;
  f.num_blocks = 3;
  f.num_resolutions = 3;
  CHECK(f.grid_size() == 96);
  CHECK(f.supported_resolutions() == std::vector<int>{768, 384, 192});
  CHECK(f.resolution_index(192) == 2);
  CHECK_THROWS_AS(f.resolution_index(96), ConfigError);

  f.num_resolutions = 4;
  CHECK_THROWS_AS(f.validate(), ConfigError);
  f.num_resolutions = 3;
  f.resolution = 100;
  CHECK_THROWS_AS(f.validate(), ConfigError);
  f.resolution = 768;
  f.num_features = 0;
  CHECK_THROWS_AS(f.validate(), ConfigError);

  auto bad = test::toy_config();
  bad.num_foreground = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("configuration survives a key=value round trip") {
  auto cfg = test::toy_config(4, 64, 2, 2, 12);
  auto back = ModelConfig::from_key_values(KeyValueMap::parse([&] {
    std::ostringstream os;
    cfg.to_key_values().write_block(os);
    return os.str();
  }()));
  CHECK(back.to_key_values().entries() == cfg.to_key_values().entries());
}

TEST_CASE("frame images check shape and range") {
  CHECK_NOTHROW(FrameImage::from_tensor(torch::rand({3, 8, 8})));
  CHECK_THROWS_AS(FrameImage(torch::rand({1, 3, 8, 6})), InputError);
  CHECK_THROWS_AS(FrameImage(torch::rand({1, 1, 8, 8})), InputError);
  CHECK_THROWS_AS(FrameImage(torch::rand({1, 3, 8, 8}) + 1.5), InputError);
  auto nan = torch::rand({1, 3, 8, 8});
  nan[0][0][0][0].fill_(std::nan(""));
  CHECK_THROWS_AS(FrameImage{nan}, InputError);
}

TEST_CASE("divisive normalization keeps its parameters non-negative") {
  torch::manual_seed(0);
  nn::Gdn gdn(6);
  {
    torch::NoGradGuard g;
    gdn->beta_raw.uniform_(-2, 2);
    gdn->gamma_raw.uniform_(-2, 2);
  }
  auto x = torch::randn({2, 6, 5, 5});
  auto y = gdn(x);
  CHECK(torch::isfinite(y).all().item<bool>());
  // The denominator is positive, so signs survive.
  CHECK(torch::equal(torch::sign(y), torch::sign(x)));
  CHECK(nn::make_group_norm(12)->options.num_groups() == 6);
  CHECK(nn::make_group_norm(7)->options.num_groups() == 7);
  CHECK(nn::make_group_norm(16)->options.num_groups() == 8);
}

TEST_CASE("latent lives on the analysis grid") {
  torch::manual_seed(1);
  torch::NoGradGuard no_grad;

  SUBCASE("toy configuration") {
    Factorizer f(test::toy_config());
    f->eval();
    auto latent = f->extract_latent(FrameImage::from_tensor(torch::rand({3, 64, 64})));
    CHECK(latent.data.sizes() == torch::IntArrayRef{1, 4, 16, 16});
    auto mv = f->predict_motion_vectors(latent);
    CHECK(mv.weights.sizes() == torch::IntArrayRef{1, 4});
    CHECK(mv.biases.sizes() == torch::IntArrayRef{1, 4});
  }
  SUBCASE("default configuration at the middle resolution") {
    auto cfg = ModelConfig::with_features(20);
    cfg.factorizer.resolution = 768;
    cfg.factorizer.num_blocks = 3;
    cfg.factorizer.num_resolutions = 3;
    Factorizer f(cfg);
    f->eval();
    auto [latent, mv] = f->analyze(FrameImage::from_tensor(torch::rand({3, 384, 384})));
    CHECK(latent.data.sizes() == torch::IntArrayRef{1, 20, 96, 96});
    CHECK(mv.weights.size(1) == 20);
    CHECK(mv.biases.size(1) == 20);
  }
  SUBCASE("every supported resolution maps to the same grid") {
    Factorizer f(test::toy_config(4, 64, 2, 2));
    f->eval();
    for (int size : {64, 32}) {
      auto latent = f->extract_latent(FrameImage::from_tensor(torch::rand({3, size, size})));
      CHECK(latent.grid() == 16);
      CHECK(torch::isfinite(latent.data).all().item<bool>());
    }
    CHECK_THROWS_AS(f->extract_latent(FrameImage::from_tensor(torch::rand({3, 48, 48}))), ConfigError);
  }
}

TEST_CASE("analysis is deterministic") {
  torch::manual_seed(2);
  torch::NoGradGuard no_grad;
  Factorizer f(test::toy_config());
  f->eval();
  auto zero = FrameImage::from_tensor(torch::zeros({3, 64, 64}));
  auto [l1, v1] = f->analyze(zero);
  auto [l2, v2] = f->analyze(zero);
  CHECK(torch::isfinite(l1.data).all().item<bool>());
  CHECK(test::bit_equal(l1.data, l2.data));
  CHECK(test::bit_equal(v1.weights, v2.weights));
  CHECK(test::bit_equal(v1.biases, v2.biases));
}

TEST_CASE("fresh predictors start near the identity transform") {
  torch::manual_seed(3);
  torch::NoGradGuard no_grad;
  Factorizer f(test::toy_config());
  auto mv = f->analyze(FrameImage::from_tensor(torch::rand({3, 64, 64}))).second;
  CHECK(test::max_abs(mv.weights - 1) < 1.0);
  CHECK(test::max_abs(mv.biases) < 1.0);
}

TEST_CASE("motion transform examples") {
  torch::manual_seed(4);
  Latent latent{torch::randn({1, 5, 6, 6})};

  SUBCASE("unit weights and zero biases reproduce the latent") {
    auto out = motion_transform(latent, {torch::ones({1, 5}), torch::zeros({1, 5})});
    CHECK(test::bit_equal(out.data, latent.data));
  }
  SUBCASE("zero weights give constant channels") {
    auto b = torch::randn({1, 5});
    auto out = motion_transform(latent, {torch::zeros({1, 5}), b});
    for (int c = 0; c < 5; ++c) CHECK(torch::all(out.data[0][c] == b[0][c]).item<bool>());
  }
  SUBCASE("element-wise scalar-loop oracle") {
    for (int trial = 0; trial < 20; ++trial) {
      Latent l{torch::randn({2, 3, 4, 4}, torch::kFloat64)};
      CompactMotionVector mv{torch::randn({2, 3}, torch::kFloat64), torch::randn({2, 3}, torch::kFloat64)};
      auto out = motion_transform(l, mv).data;
      auto L = l.data.accessor<double, 4>();
      auto W = mv.weights.accessor<double, 2>();
      auto B = mv.biases.accessor<double, 2>();
      auto O = out.accessor<double, 4>();
      double worst = 0;
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 3; ++c)
          for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) worst = std::max(worst, std::abs(O[b][c][y][x] - (W[b][c] * L[b][c][y][x] + B[b][c])));
      CHECK(worst <= 1e-12);
    }
  }
  SUBCASE("joint linearity in weights and biases") {
    Latent l{torch::randn({1, 3, 4, 4}, torch::kFloat64)};
    CompactMotionVector mv{torch::randn({1, 3}, torch::kFloat64), torch::randn({1, 3}, torch::kFloat64)};
    const double alpha = 2.5;
    auto scaled = motion_transform(l, {mv.weights * alpha, mv.biases * alpha}).data;
    CHECK(test::max_abs_diff(scaled, alpha * motion_transform(l, mv).data) <= 1e-12);
  }
  SUBCASE("batch-1 key latent broadcasts against batched vectors") {
    auto out = motion_transform(latent, {torch::ones({3, 5}), torch::zeros({3, 5})});
    CHECK(out.data.size(0) == 3);
  }
  SUBCASE("shape mismatches raise") {
    CHECK_THROWS_AS(motion_transform(latent, {torch::ones({1, 4}), torch::zeros({1, 4})}), InputError);
    CHECK_THROWS_AS(motion_transform(latent, {torch::ones({1, 5}), torch::zeros({2, 5})}), InputError);
  }
}

TEST_CASE("codec value bridge round-trips") {
  std::vector<codec::MotionVectorValues> values{{{1.0, 0.5}, {0.0, -0.25}}, {{0.75, 2.0}, {1.0, 0.125}}};
  auto mv = from_values(values, torch::kFloat64);
  CHECK(mv.weights.sizes() == torch::IntArrayRef{2, 2});
  CHECK(to_values(mv, 0) == values[0]);
  CHECK(to_values(mv, 1) == values[1]);
  std::vector<codec::MotionVectorValues> ragged{{{1.0}, {0.0}}, {{1.0, 2.0}, {0.0, 0.0}}};
  CHECK_THROWS_AS(from_values(ragged), InputError);
}
