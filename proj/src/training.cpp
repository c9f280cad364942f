#include "mttf/training.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "mttf/errors.hpp"
#include "mttf/warp.hpp"

namespace mttf {

namespace {

constexpr const char* kModule = "training";

torch::Tensor resize_to(const torch::Tensor& frames, int64_t size) {
  if (frames.size(2) == size && frames.size(3) == size) return frames;
  return resize_bilinear(frames, size).clamp(0, 1);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1 || steps_per_epoch < 1 || batch_size < 1) {
    throw ConfigError(kModule, "epochs, steps_per_epoch and batch_size must be positive");
  }
  if (!(learning_rate > 0) || !(gamma > 0)) throw ConfigError(kModule, "learning rate and gamma must be positive");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) throw ConfigError(kModule, "Adam betas must be in [0, 1)");
  for (std::size_t i = 1; i < milestones.size(); ++i) {
    if (milestones[i] <= milestones[i - 1]) throw ConfigError(kModule, "milestones must be strictly increasing");
  }
  weights.validate();
  if (log_interval < 1 || checkpoint_interval < 0) throw ConfigError(kModule, "invalid log or checkpoint interval");
  if (feature_backend != "vgg19" && feature_backend != "random") {
    throw ConfigError(kModule, "feature_backend must be vgg19 or random");
  }
  if (matting != "luminance" && matting != "command") throw ConfigError(kModule, "matting must be luminance or command");
  if (matting == "command" && matting_command.empty()) throw ConfigError(kModule, "matting=command needs matting_command");
  if (perceptual_scales < 1) throw ConfigError(kModule, "perceptual_scales must be positive");
}

KeyValueMap TrainConfig::to_key_values() const {
  KeyValueMap kv;
  kv.set("epochs", static_cast<long long>(epochs));
  kv.set("steps_per_epoch", static_cast<long long>(steps_per_epoch));
  kv.set("batch_size", static_cast<long long>(batch_size));
  kv.set("lr", learning_rate);
  kv.set("beta1", beta1);
  kv.set("beta2", beta2);
  std::string ms;
  for (std::size_t i = 0; i < milestones.size(); ++i) ms += (i ? "," : "") + std::to_string(milestones[i]);
  kv.set("milestones", ms);
  kv.set("gamma", gamma);
  kv.set("lambda_per", weights.perceptual);
  kv.set("lambda_l1", weights.l1);
  kv.set("lambda_bg", weights.background);
  kv.set("seed", static_cast<long long>(seed));
  kv.set("log_interval", static_cast<long long>(log_interval));
  kv.set("checkpoint_interval", static_cast<long long>(checkpoint_interval));
  kv.set("feature_backend", feature_backend);
  kv.set("vgg19_weights", vgg19_weights);
  kv.set("matting", matting);
  kv.set("matting_threshold", matting_threshold);
  kv.set("matting_command", matting_command);
  kv.set("perceptual_scales", static_cast<long long>(perceptual_scales));
  return kv;
}

TrainConfig TrainConfig::from_key_values(const KeyValueMap& kv) {
  TrainConfig c;
  c.epochs = static_cast<int>(kv.get_int_or("epochs", c.epochs));
  c.steps_per_epoch = static_cast<int>(kv.get_int_or("steps_per_epoch", c.steps_per_epoch));
  c.batch_size = static_cast<int>(kv.get_int_or("batch_size", c.batch_size));
  c.learning_rate = kv.get_double_or("lr", c.learning_rate);
  c.beta1 = kv.get_double_or("beta1", c.beta1);
  c.beta2 = kv.get_double_or("beta2", c.beta2);
  c.milestones.clear();
  for (long long m : kv.get_int_list_or("milestones", {60, 90})) c.milestones.push_back(static_cast<int>(m));
  c.gamma = kv.get_double_or("gamma", c.gamma);
  c.weights.perceptual = kv.get_double_or("lambda_per", c.weights.perceptual);
  c.weights.l1 = kv.get_double_or("lambda_l1", c.weights.l1);
  c.weights.background = kv.get_double_or("lambda_bg", c.weights.background);
  c.seed = static_cast<std::uint64_t>(kv.get_int_or("seed", 0));
  c.log_interval = static_cast<int>(kv.get_int_or("log_interval", c.log_interval));
  c.checkpoint_interval = static_cast<int>(kv.get_int_or("checkpoint_interval", c.checkpoint_interval));
  c.feature_backend = kv.get_or("feature_backend", c.feature_backend);
  c.vgg19_weights = kv.get_or("vgg19_weights", c.vgg19_weights);
  c.matting = kv.get_or("matting", c.matting);
  c.matting_threshold = kv.get_double_or("matting_threshold", c.matting_threshold);
  c.matting_command = kv.get_or("matting_command", c.matting_command);
  c.perceptual_scales = static_cast<int>(kv.get_int_or("perceptual_scales", c.perceptual_scales));
  c.validate();
  return c;
}

double learning_rate_at(int epoch, const TrainConfig& config) {
  int decays = 0;
  for (int m : config.milestones) decays += epoch >= m ? 1 : 0;
  return config.learning_rate * std::pow(config.gamma, decays);
}

FramePairBatch sample_pairs(const std::vector<Clip>& clips, int batch_size, std::mt19937_64& rng) {
  if (clips.empty()) throw ConfigError(kModule, "training dataset is empty");
  std::uniform_int_distribution<std::size_t> pick_clip(0, clips.size() - 1);
  FramePairBatch batch;
  std::vector<torch::Tensor> keys, inters;
  for (int b = 0; b < batch_size; ++b) {
    const std::size_t c = pick_clip(rng);
    const int64_t frames = clips[c].size(0);
    std::uniform_int_distribution<int64_t> pick_frame(0, frames - 1);
    const int64_t k = pick_frame(rng);
    const int64_t t = pick_frame(rng);
    keys.push_back(clips[c][k]);
    inters.push_back(clips[c][t]);
    batch.ids.push_back("clip" + std::to_string(c) + ":frame" + std::to_string(t));
  }
  batch.key = torch::stack(keys);
  batch.inter = torch::stack(inters);
  return batch;
}

MultiResLoss multires_loss(MttfModel& model, const FramePairBatch& batch, FeatureBackend& backend,
                           MattingAdapter& matting, const LossWeights& weights, std::mt19937_64& rng,
                           const std::vector<double>& perceptual_scales) {
  weights.validate();
  const auto& f = model->config().factorizer;
  std::uniform_int_distribution<int> pick(0, f.num_resolutions - 1);
  MultiResLoss out;
  out.input_index = pick(rng);
  const int input_size = f.resolution_at(out.input_index);

  const FrameImage key(resize_to(batch.key, input_size));
  const FrameImage inter(resize_to(batch.inter, input_size));
  auto [key_latent, key_mv] = model->factorizer()->analyze(key);
  const auto inter_mv = model->factorizer()->analyze(inter).second;
  const auto routes = model->all_routes();
  const auto synthesis = model->synthesize(key, key_latent, key_mv, inter_mv, routes);

  std::string ids;
  for (const auto& id : batch.ids) ids += (ids.empty() ? "" : ",") + id;
  out.total = torch::zeros({}, batch.inter.options());
  for (std::size_t k = 0; k < routes.size(); ++k) {
    const auto& gen = synthesis.outputs[k];
    const auto target = resize_to(batch.inter, routes[k].resolution);
    LossComponents c;
    c.perceptual = perceptual_loss(gen.fused, target, backend, perceptual_scales);
    c.l1 = mttf::l1_loss(gen.fused, target);
    c.background = background_loss(gen.mask, target, matting, ids);
    out.total = out.total + total_loss(c, weights);
    out.terms.push_back(std::move(c));
  }
  return out;
}

std::string train_log_header() { return "step,epoch,L_per,L_L1,L_bg,total,lr"; }

std::string to_csv(const TrainLogRow& r) {
  return std::to_string(r.step) + "," + std::to_string(r.epoch) + "," + format_double(r.perceptual) + "," +
         format_double(r.l1) + "," + format_double(r.background) + "," + format_double(r.total) + "," +
         format_double(r.lr);
}

std::shared_ptr<FeatureBackend> make_feature_backend(const TrainConfig& config) {
  if (config.feature_backend == "random") return std::make_shared<RandomFeatureBackend>(config.seed);
  auto vgg = std::make_shared<Vgg19FeatureBackend>();
  if (config.vgg19_weights.empty()) {
    throw ConfigError(kModule, "feature_backend=vgg19 needs vgg19_weights (see tools/convert_vgg19.py)");
  }
  vgg->load_weights(config.vgg19_weights);
  return vgg;
}

std::unique_ptr<MattingAdapter> make_matting(const TrainConfig& config) {
  if (config.matting == "command") return std::make_unique<CommandMatting>(config.matting_command);
  return std::make_unique<LuminanceThresholdMatting>(config.matting_threshold);
}

Trainer::Trainer(MttfModel model, TrainConfig config, std::shared_ptr<FeatureBackend> backend,
                 std::unique_ptr<MattingAdapter> matting)
    : model_(std::move(model)),
      config_(std::move(config)),
      backend_(std::move(backend)),
      matting_(std::move(matting)),
      rng_(config_.seed) {
  config_.validate();
  if (!backend_ || !matting_) throw ConfigError(kModule, "trainer needs a feature backend and a matting adapter");
  optimizer_ = std::make_unique<torch::optim::Adam>(
      model_->parameters(),
      torch::optim::AdamOptions(config_.learning_rate).betas(std::make_tuple(config_.beta1, config_.beta2)));
  for (int j = 1; j <= config_.perceptual_scales; ++j) scales_.push_back(std::ldexp(1.0, -j));
  set_epoch(0);
}

void Trainer::set_epoch(int epoch) {
  epoch_ = epoch;
  const double lr = learning_rate_at(epoch, config_);
  for (auto& group : optimizer_->param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

TrainLogRow Trainer::step(const std::vector<Clip>& clips) {
  model_->train();
  const FramePairBatch batch = sample_pairs(clips, config_.batch_size, rng_);
  optimizer_->zero_grad();
  const MultiResLoss loss = multires_loss(model_, batch, *backend_, *matting_, config_.weights, rng_, scales_);
  const double total = loss.total.item<double>();
  if (!std::isfinite(total)) throw TrainingError(kModule, "loss became non-finite at step " + std::to_string(step_));
  loss.total.backward();
  optimizer_->step();

  TrainLogRow row;
  row.step = step_++;
  row.epoch = epoch_;
  for (const auto& t : loss.terms) {
    row.perceptual += t.perceptual.item<double>();
    row.l1 += t.l1.item<double>();
    row.background += t.background.item<double>();
  }
  row.total = total;
  row.lr = learning_rate_at(epoch_, config_);
  return row;
}

std::vector<TrainLogRow> Trainer::train(const std::vector<Clip>& clips, std::ostream* log,
                                        const std::string& checkpoint_dir) {
  if (clips.empty()) throw ConfigError(kModule, "training dataset is empty");
  const int r = model_->config().factorizer.resolution;
  for (const auto& clip : clips) {
    if (clip.dim() != 4 || clip.size(1) != 3 || clip.size(2) != r || clip.size(3) != r || clip.size(0) < 1) {
      throw ConfigError(kModule, "training clips must be T x 3 x " + std::to_string(r) + " x " + std::to_string(r) +
                                     ", got " + detail::shape_string(clip));
    }
  }
  if (!checkpoint_dir.empty()) std::filesystem::create_directories(checkpoint_dir);
  if (log) *log << train_log_header() << '\n';

  std::vector<TrainLogRow> rows;
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    set_epoch(epoch);
    for (int s = 0; s < config_.steps_per_epoch; ++s) {
      const TrainLogRow row = step(clips);
      rows.push_back(row);
      if (log && row.step % config_.log_interval == 0) *log << to_csv(row) << '\n' << std::flush;
    }
    if (!checkpoint_dir.empty() && config_.checkpoint_interval > 0 && (epoch + 1) % config_.checkpoint_interval == 0) {
      save_checkpoint(model_, (std::filesystem::path(checkpoint_dir) / ("epoch_" + std::to_string(epoch + 1) + ".ckpt")).string());
    }
  }
  if (!checkpoint_dir.empty()) save_checkpoint(model_, (std::filesystem::path(checkpoint_dir) / "final.ckpt").string());
  model_->eval();
  return rows;
}

}  // namespace mttf
