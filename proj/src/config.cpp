#include "mttf/config.hpp"

#include <algorithm>
#include <string>

#include "mttf/errors.hpp"

namespace mttf {

std::vector<int> FactorizerConfig::supported_resolutions() const {
  std::vector<int> out;
  for (int i = 0; i < num_resolutions; ++i) out.push_back(resolution_at(i));
  return out;
}

int FactorizerConfig::resolution_index(int size) const {
  for (int i = 0; i < num_resolutions; ++i) {
    if (resolution_at(i) == size) return i;
  }
  throw ConfigError("factorizer", "unsupported resolution " + std::to_string(size) + " (r=" +
                                      std::to_string(resolution) + ", N_s=" + std::to_string(num_resolutions) + ")");
}

void FactorizerConfig::validate() const {
  if (num_features < 1 || num_features > 255) throw ConfigError("factorizer", "N_F must lie in [1, 255]");
  if (num_blocks < 1 || num_blocks > 15) throw ConfigError("factorizer", "N_B must lie in [1, 15]");
  if (num_resolutions < 1 || num_resolutions > num_blocks) {
    throw ConfigError("factorizer", "N_s must lie in [1, N_B]");
  }
  if (resolution < 1 || resolution > 65535 || resolution % (1 << num_blocks) != 0) {
    throw ConfigError("factorizer", "r=" + std::to_string(resolution) + " must be divisible by 2^N_B");
  }
  const int g = grid_size();
  if (g < 2 || g % 2 != 0) {
    throw ConfigError("factorizer", "analysis grid G=" + std::to_string(g) + " must be even");
  }
}

int ModelConfig::generator_width(int level) const {
  return std::max(generator_min_channels, generator_channels >> level);
}

void ModelConfig::validate() const {
  factorizer.validate();
  for (int c : {extractor_channels, predictor_channels, flow_channels, weight_channels, background_channels,
                generator_channels, generator_min_channels}) {
    if (c < 1) throw ConfigError("model", "channel widths must be positive");
  }
  if (num_foreground < 1 || num_background < 1 || num_foreground + num_background != num_components()) {
    throw ConfigError("motion_estimator", "N_fg + N_bg must equal 2*N_F with both >= 1 (got " +
                                              std::to_string(num_foreground) + " + " +
                                              std::to_string(num_background) + ")");
  }
  if (!(flow_margin >= 0.0)) throw ConfigError("motion_estimator", "flow margin must be non-negative");
}

ModelConfig ModelConfig::with_features(int num_features) {
  ModelConfig cfg;
  cfg.factorizer.num_features = num_features;
  const int total = 2 * num_features;
  cfg.num_background = std::max(1, total / 8);
  cfg.num_foreground = total - cfg.num_background;
  return cfg;
}

KeyValueMap ModelConfig::to_key_values() const {
  KeyValueMap kv;
  kv.set("num_features", static_cast<long long>(factorizer.num_features));
  kv.set("resolution", static_cast<long long>(factorizer.resolution));
  kv.set("num_blocks", static_cast<long long>(factorizer.num_blocks));
  kv.set("num_resolutions", static_cast<long long>(factorizer.num_resolutions));
  kv.set("extractor_channels", static_cast<long long>(extractor_channels));
  kv.set("predictor_channels", static_cast<long long>(predictor_channels));
  kv.set("flow_channels", static_cast<long long>(flow_channels));
  kv.set("weight_channels", static_cast<long long>(weight_channels));
  kv.set("background_channels", static_cast<long long>(background_channels));
  kv.set("generator_channels", static_cast<long long>(generator_channels));
  kv.set("generator_min_channels", static_cast<long long>(generator_min_channels));
  kv.set("num_foreground", static_cast<long long>(num_foreground));
  kv.set("num_background", static_cast<long long>(num_background));
  kv.set("flow_margin", flow_margin);
  return kv;
}

ModelConfig ModelConfig::from_key_values(const KeyValueMap& kv) {
  const int nf = static_cast<int>(kv.get_int_or("num_features", 20));
  ModelConfig cfg = with_features(nf);
  cfg.factorizer.resolution = static_cast<int>(kv.get_int_or("resolution", cfg.factorizer.resolution));
  cfg.factorizer.num_blocks = static_cast<int>(kv.get_int_or("num_blocks", cfg.factorizer.num_blocks));
  cfg.factorizer.num_resolutions = static_cast<int>(kv.get_int_or("num_resolutions", cfg.factorizer.num_resolutions));
  cfg.extractor_channels = static_cast<int>(kv.get_int_or("extractor_channels", cfg.extractor_channels));
  cfg.predictor_channels = static_cast<int>(kv.get_int_or("predictor_channels", cfg.predictor_channels));
  cfg.flow_channels = static_cast<int>(kv.get_int_or("flow_channels", cfg.flow_channels));
  cfg.weight_channels = static_cast<int>(kv.get_int_or("weight_channels", cfg.weight_channels));
  cfg.background_channels = static_cast<int>(kv.get_int_or("background_channels", cfg.background_channels));
  cfg.generator_channels = static_cast<int>(kv.get_int_or("generator_channels", cfg.generator_channels));
  cfg.generator_min_channels =
      static_cast<int>(kv.get_int_or("generator_min_channels", cfg.generator_min_channels));
  cfg.num_foreground = static_cast<int>(kv.get_int_or("num_foreground", cfg.num_foreground));
  cfg.num_background = static_cast<int>(kv.get_int_or("num_background", cfg.num_background));
  cfg.flow_margin = kv.get_double_or("flow_margin", cfg.flow_margin);
  cfg.validate();
  return cfg;
}

}  // namespace mttf
