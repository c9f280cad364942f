#pragma once

// Feature bit-stream: closed-loop predictive quantization of compact motion
// vectors plus a context-adaptive binary arithmetic coder for the residuals.
//
// Bit-exact payload definition (shared by encoder and decoder):
//   * every frame carries 2*N_F integer symbols, N_F weight residuals followed
//     by N_F bias residuals;
//   * a symbol s is binarized as zero-flag (1 when s != 0), then for s != 0 a
//     sign bin (1 when negative) and |s|-1 as order-0 Exp-Golomb: k one-bins,
//     a terminating zero-bin, then k suffix bins MSB first;
//   * zero-flag, sign and the first eight prefix positions have their own
//     adaptive context per coefficient group (weight | bias), 20 contexts in
//     total; suffix bins are coded with a fixed probability of one half;
//   * a context holds Laplace-smoothed counts (c0, c1), initially (1, 1);
//     P(0) = floor(c0 * 2^16 / (c0 + c1)) clamped to [1, 65535]; after coding a
//     bin its count is incremented and both counts are halved (rounding up)
//     once their sum exceeds 2^15;
//   * the arithmetic coder is a 32-bit range coder with byte-wise carry
//     propagation: bound = (range >> 16) * P(0), renormalize while
//     range < 2^24, big-endian byte output, five flush shifts at the end.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mttf::codec {

struct CodecConfig {
  double delta = 1.0 / 50.0;
  int num_features = 20;

  static constexpr int kContextsPerGroup = 10;
  static constexpr int kContextCount = 2 * kContextsPerGroup;

  int symbols_per_frame() const { return 2 * num_features; }
  void validate() const;
};

// Codec-side view of a compact motion vector. The decoder reproduces these
// values bit-exactly, so they are kept in double precision.
struct MotionVectorValues {
  std::vector<double> weights;
  std::vector<double> biases;

  std::size_t size() const { return weights.size(); }
  bool operator==(const MotionVectorValues&) const = default;
};

struct QuantizedResidual {
  std::vector<std::int32_t> symbols;  // N_F weight residuals, then N_F bias residuals

  bool operator==(const QuantizedResidual&) const = default;
};

QuantizedResidual predict_and_quantize(const MotionVectorValues& current,
                                       const MotionVectorValues& reference, double delta);

MotionVectorValues reconstruct(const MotionVectorValues& reference, const QuantizedResidual& residual,
                               double delta);

class AdaptiveBitModel {
 public:
  static constexpr std::uint32_t kRescaleLimit = 1u << 15;

  std::uint32_t probability_of_zero() const;  // 16-bit fixed point
  void update(int bit);

  std::uint32_t zeros() const { return count0_; }
  std::uint32_t ones() const { return count1_; }
  bool operator==(const AdaptiveBitModel&) const = default;

 private:
  std::uint32_t count0_ = 1;
  std::uint32_t count1_ = 1;
};

enum class CoefficientGroup { kWeight = 0, kBias = 1 };

class ContextSet {
 public:
  AdaptiveBitModel& zero_flag(CoefficientGroup g) { return at(g, 0); }
  AdaptiveBitModel& sign(CoefficientGroup g) { return at(g, 1); }
  AdaptiveBitModel& prefix(CoefficientGroup g, int position) { return at(g, 2 + (position < 7 ? position : 7)); }

  bool operator==(const ContextSet&) const = default;

 private:
  AdaptiveBitModel& at(CoefficientGroup g, int role) {
    return models_[static_cast<int>(g) * CodecConfig::kContextsPerGroup + role];
  }
  std::array<AdaptiveBitModel, CodecConfig::kContextCount> models_{};
};

class ArithmeticEncoder {
 public:
  void encode(int bit, AdaptiveBitModel& model);
  void encode_bypass(int bit);
  std::vector<std::uint8_t> finish();

 private:
  void encode_with_probability(int bit, std::uint32_t p0);
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  std::vector<std::uint8_t> out_;
  bool finished_ = false;
};

class ArithmeticDecoder {
 public:
  explicit ArithmeticDecoder(std::span<const std::uint8_t> payload);

  int decode(AdaptiveBitModel& model);
  int decode_bypass();
  std::size_t bytes_consumed() const { return pos_; }

 private:
  std::uint8_t next_byte();
  void normalize();

  std::span<const std::uint8_t> payload_;
  std::size_t pos_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
};

// Stateful residual coder; one instance per stream.
class ResidualEncoder {
 public:
  explicit ResidualEncoder(CodecConfig config);

  void encode(const QuantizedResidual& residual);
  std::vector<std::uint8_t> finish() { return coder_.finish(); }
  const ContextSet& contexts() const { return contexts_; }

 private:
  void encode_symbol(std::int32_t symbol, CoefficientGroup group);

  CodecConfig config_;
  ContextSet contexts_;
  ArithmeticEncoder coder_;
};

class ResidualDecoder {
 public:
  ResidualDecoder(CodecConfig config, std::span<const std::uint8_t> payload);

  QuantizedResidual decode();
  const ContextSet& contexts() const { return contexts_; }

 private:
  std::int32_t decode_symbol(CoefficientGroup group);

  CodecConfig config_;
  ContextSet contexts_;
  ArithmeticDecoder coder_;
};

std::vector<std::uint8_t> entropy_encode(std::span<const QuantizedResidual> residuals, const CodecConfig& config);

std::vector<QuantizedResidual> entropy_decode(std::span<const std::uint8_t> payload, std::size_t frame_count,
                                              const CodecConfig& config);

struct SequenceCoding {
  std::vector<std::uint8_t> payload;
  std::vector<QuantizedResidual> residuals;
  std::vector<MotionVectorValues> reconstructions;  // exactly what the decoder will produce
};

// Closed-loop predictive coding: frame t is predicted from the reconstruction
// of frame t-1, the first inter frame from the key-frame vector.
SequenceCoding code_sequence(std::span<const MotionVectorValues> vectors, const MotionVectorValues& key_vector,
                             const CodecConfig& config);

std::vector<MotionVectorValues> decode_sequence(std::span<const std::uint8_t> payload, std::size_t frame_count,
                                                const MotionVectorValues& key_vector, const CodecConfig& config);

// 8 * bytes * fps / frames / 1000.
double kbps(std::size_t bytes, double fps, std::size_t frames);

}  // namespace mttf::codec
