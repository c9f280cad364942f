#pragma once

#include <vector>

#include "mttf/key_value.hpp"

namespace mttf {

struct FactorizerConfig {
  int num_features = 20;     // N_F
  int resolution = 384;      // r, largest supported input resolution
  int num_blocks = 2;        // N_B, generator depth
  int num_resolutions = 1;   // N_s

  // Analysis grid G = r / 2^N_B shared by latents, flows and motions.
  int grid_size() const { return resolution >> num_blocks; }
  // r_i = r / 2^i for i in [0, N_s).
  int resolution_at(int index) const { return resolution >> index; }
  std::vector<int> supported_resolutions() const;
  // Index i with r_i == size; throws ConfigError for unsupported sizes.
  int resolution_index(int size) const;

  void validate() const;
};

struct ModelConfig {
  FactorizerConfig factorizer;

  int extractor_channels = 64;   // E_F base width
  int predictor_channels = 64;   // E_W / E_B width
  int flow_channels = 64;        // FL base width
  int weight_channels = 64;      // W base width
  int background_channels = 64;  // BG base width
  int generator_channels = 64;   // generator width at the analysis grid
  int generator_min_channels = 16;

  int num_foreground = 35;  // N_fg
  int num_background = 5;   // N_bg
  double flow_margin = 0.2;  // coarse flows live in [-1 - margin, 1 + margin]

  // Generator feature width at dyadic level `level` above the analysis grid.
  int generator_width(int level) const;
  int num_components() const { return 2 * factorizer.num_features; }

  void validate() const;

  // Default N_fg / N_bg split for a given N_F: one eighth of the 2*N_F
  // components (at least one) model the background, the rest the foreground.
  static ModelConfig with_features(int num_features);

  KeyValueMap to_key_values() const;
  static ModelConfig from_key_values(const KeyValueMap& kv);
};

}  // namespace mttf
