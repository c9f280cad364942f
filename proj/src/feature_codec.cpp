#include "mttf/feature_codec.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mttf/errors.hpp"

namespace mttf::codec {

namespace {

constexpr std::uint32_t kTopValue = 1u << 24;
constexpr int kMaxPrefix = 31;

void check_size(const MotionVectorValues& v, std::size_t n, const char* what) {
  if (v.weights.size() != n || v.biases.size() != n) {
    throw InputError("feature_codec", std::string(what) + " has " + std::to_string(v.weights.size()) + "/" +
                                          std::to_string(v.biases.size()) + " entries, expected " +
                                          std::to_string(n));
  }
}

// Ratios within this distance of a half step count as ties.
constexpr double kTieSlack = 1e-12;

// Round half away from zero; 0.03 / 0.02 evaluates to 1.4999999999999998 and
// still quantizes to 2.
std::int32_t quantize_one(double current, double reference, double delta) {
  const double ratio = (current - reference) / delta;
  const double magnitude = std::abs(ratio);
  double q = std::round(ratio);
  if (std::abs(magnitude - std::floor(magnitude) - 0.5) <= kTieSlack) {
    q = std::copysign(std::floor(magnitude) + 1.0, ratio);
  }
  if (!std::isfinite(q) || q > std::numeric_limits<std::int32_t>::max() ||
      q < std::numeric_limits<std::int32_t>::min()) {
    throw InputError("feature_codec", "residual not representable as a 32-bit symbol");
  }
  return static_cast<std::int32_t>(q);
}

}  // namespace

void CodecConfig::validate() const {
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw ConfigError("feature_codec", "quantization step must be positive, got " + std::to_string(delta));
  }
  if (num_features < 1) throw ConfigError("feature_codec", "N_F must be >= 1");
}

QuantizedResidual predict_and_quantize(const MotionVectorValues& current, const MotionVectorValues& reference,
                                       double delta) {
  CodecConfig{delta, 1}.validate();
  const std::size_t n = reference.size();
  check_size(current, n, "current vector");
  check_size(reference, n, "reference vector");

  QuantizedResidual out;
  out.symbols.reserve(2 * n);
  for (std::size_t c = 0; c < n; ++c) out.symbols.push_back(quantize_one(current.weights[c], reference.weights[c], delta));
  for (std::size_t c = 0; c < n; ++c) out.symbols.push_back(quantize_one(current.biases[c], reference.biases[c], delta));
  return out;
}

MotionVectorValues reconstruct(const MotionVectorValues& reference, const QuantizedResidual& residual, double delta) {
  const std::size_t n = reference.size();
  check_size(reference, n, "reference vector");
  if (residual.symbols.size() != 2 * n) throw InputError("feature_codec", "residual length does not match 2*N_F");

  MotionVectorValues out;
  out.weights.resize(n);
  out.biases.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    out.weights[c] = reference.weights[c] + delta * static_cast<double>(residual.symbols[c]);
    out.biases[c] = reference.biases[c] + delta * static_cast<double>(residual.symbols[n + c]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adaptive probability model

std::uint32_t AdaptiveBitModel::probability_of_zero() const {
  const std::uint64_t p = (static_cast<std::uint64_t>(count0_) << 16) / (count0_ + count1_);
  if (p < 1) return 1;
  if (p > 0xFFFF) return 0xFFFF;
  return static_cast<std::uint32_t>(p);
}

void AdaptiveBitModel::update(int bit) {
  if (bit) {
    ++count1_;
  } else {
    ++count0_;
  }
  if (count0_ + count1_ > kRescaleLimit) {
    count0_ = (count0_ + 1) >> 1;
    count1_ = (count1_ + 1) >> 1;
  }
}

// ---------------------------------------------------------------------------
// Range coder

void ArithmeticEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t pending = cache_;
    do {
      out_.push_back(static_cast<std::uint8_t>(pending + carry));
      pending = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

void ArithmeticEncoder::encode_with_probability(int bit, std::uint32_t p0) {
  const std::uint32_t bound = (range_ >> 16) * p0;
  if (bit == 0) {
    range_ = bound;
  } else {
    low_ += bound;
    range_ -= bound;
  }
  while (range_ < kTopValue) {
    range_ <<= 8;
    shift_low();
  }
}

void ArithmeticEncoder::encode(int bit, AdaptiveBitModel& model) {
  encode_with_probability(bit, model.probability_of_zero());
  model.update(bit);
}

void ArithmeticEncoder::encode_bypass(int bit) { encode_with_probability(bit, 1u << 15); }

std::vector<std::uint8_t> ArithmeticEncoder::finish() {
  if (!finished_) {
    for (int i = 0; i < 5; ++i) shift_low();
    finished_ = true;
  }
  return out_;
}

ArithmeticDecoder::ArithmeticDecoder(std::span<const std::uint8_t> payload) : payload_(payload) {
  for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t ArithmeticDecoder::next_byte() {
  if (pos_ >= payload_.size()) throw DecodeError("feature_codec", "truncated feature payload");
  return payload_[pos_++];
}

void ArithmeticDecoder::normalize() {
  while (range_ < kTopValue) {
    range_ <<= 8;
    code_ = (code_ << 8) | next_byte();
  }
}

int ArithmeticDecoder::decode(AdaptiveBitModel& model) {
  const std::uint32_t bound = (range_ >> 16) * model.probability_of_zero();
  int bit;
  if (code_ < bound) {
    range_ = bound;
    bit = 0;
  } else {
    code_ -= bound;
    range_ -= bound;
    bit = 1;
  }
  model.update(bit);
  normalize();
  return bit;
}

int ArithmeticDecoder::decode_bypass() {
  const std::uint32_t bound = (range_ >> 16) * (1u << 15);
  int bit;
  if (code_ < bound) {
    range_ = bound;
    bit = 0;
  } else {
    code_ -= bound;
    range_ -= bound;
    bit = 1;
  }
  normalize();
  return bit;
}

// ---------------------------------------------------------------------------
// Residual binarization

ResidualEncoder::ResidualEncoder(CodecConfig config) : config_(config) { config_.validate(); }

void ResidualEncoder::encode(const QuantizedResidual& residual) {
  const int n = config_.num_features;
  if (static_cast<int>(residual.symbols.size()) != 2 * n) {
    throw InputError("feature_codec", "residual has " + std::to_string(residual.symbols.size()) +
                                          " symbols, expected " + std::to_string(2 * n));
  }
  for (int k = 0; k < 2 * n; ++k) {
    encode_symbol(residual.symbols[k], k < n ? CoefficientGroup::kWeight : CoefficientGroup::kBias);
  }
}

void ResidualEncoder::encode_symbol(std::int32_t symbol, CoefficientGroup group) {
  coder_.encode(symbol != 0, contexts_.zero_flag(group));
  if (symbol == 0) return;
  coder_.encode(symbol < 0, contexts_.sign(group));

  // |s| - 1 in order-0 Exp-Golomb: value = |s| = 2^k + suffix.
  const std::uint64_t value = symbol < 0 ? static_cast<std::uint64_t>(-static_cast<std::int64_t>(symbol))
                                         : static_cast<std::uint64_t>(symbol);
  int k = 0;
  while ((value >> (k + 1)) != 0) ++k;
  for (int j = 0; j < k; ++j) coder_.encode(1, contexts_.prefix(group, j));
  coder_.encode(0, contexts_.prefix(group, k));
  for (int j = k - 1; j >= 0; --j) coder_.encode_bypass(static_cast<int>((value >> j) & 1u));
}

ResidualDecoder::ResidualDecoder(CodecConfig config, std::span<const std::uint8_t> payload)
    : config_(config), coder_(payload) {
  config_.validate();
}

QuantizedResidual ResidualDecoder::decode() {
  const int n = config_.num_features;
  QuantizedResidual out;
  out.symbols.reserve(2 * n);
  for (int k = 0; k < 2 * n; ++k) {
    out.symbols.push_back(decode_symbol(k < n ? CoefficientGroup::kWeight : CoefficientGroup::kBias));
  }
  return out;
}

std::int32_t ResidualDecoder::decode_symbol(CoefficientGroup group) {
  if (!coder_.decode(contexts_.zero_flag(group))) return 0;
  const bool negative = coder_.decode(contexts_.sign(group)) != 0;
  int k = 0;
  while (coder_.decode(contexts_.prefix(group, k))) {
    if (++k > kMaxPrefix) throw DecodeError("feature_codec", "Exp-Golomb prefix exceeds 31 bins");
  }
  std::uint64_t value = 1;
  for (int j = 0; j < k; ++j) value = (value << 1) | static_cast<std::uint64_t>(coder_.decode_bypass());
  const std::uint64_t limit = negative ? (1ull << 31) : (1ull << 31) - 1;
  if (value > limit) throw DecodeError("feature_codec", "decoded magnitude exceeds 32-bit range");
  return negative ? static_cast<std::int32_t>(-static_cast<std::int64_t>(value)) : static_cast<std::int32_t>(value);
}

std::vector<std::uint8_t> entropy_encode(std::span<const QuantizedResidual> residuals, const CodecConfig& config) {
  ResidualEncoder encoder(config);
  for (const auto& r : residuals) encoder.encode(r);
  return encoder.finish();
}

std::vector<QuantizedResidual> entropy_decode(std::span<const std::uint8_t> payload, std::size_t frame_count,
                                              const CodecConfig& config) {
  std::vector<QuantizedResidual> out;
  if (frame_count == 0) {
    config.validate();
    return out;
  }
  ResidualDecoder decoder(config, payload);
  out.reserve(frame_count);
  for (std::size_t t = 0; t < frame_count; ++t) out.push_back(decoder.decode());
  return out;
}

// ---------------------------------------------------------------------------
// Sequence coding

SequenceCoding code_sequence(std::span<const MotionVectorValues> vectors, const MotionVectorValues& key_vector,
                             const CodecConfig& config) {
  config.validate();
  SequenceCoding out;
  if (vectors.empty()) return out;
  check_size(key_vector, static_cast<std::size_t>(config.num_features), "key vector");

  ResidualEncoder encoder(config);
  const MotionVectorValues* reference = &key_vector;
  out.residuals.reserve(vectors.size());
  out.reconstructions.reserve(vectors.size());
  for (const auto& v : vectors) {
    out.residuals.push_back(predict_and_quantize(v, *reference, config.delta));
    encoder.encode(out.residuals.back());
    out.reconstructions.push_back(reconstruct(*reference, out.residuals.back(), config.delta));
    reference = &out.reconstructions.back();
  }
  out.payload = encoder.finish();
  return out;
}

std::vector<MotionVectorValues> decode_sequence(std::span<const std::uint8_t> payload, std::size_t frame_count,
                                                const MotionVectorValues& key_vector, const CodecConfig& config) {
  config.validate();
  std::vector<MotionVectorValues> out;
  if (frame_count == 0) return out;
  check_size(key_vector, static_cast<std::size_t>(config.num_features), "key vector");

  ResidualDecoder decoder(config, payload);
  out.reserve(frame_count);
  for (std::size_t t = 0; t < frame_count; ++t) {
    const MotionVectorValues& reference = t == 0 ? key_vector : out.back();
    out.push_back(reconstruct(reference, decoder.decode(), config.delta));
  }
  return out;
}

double kbps(std::size_t bytes, double fps, std::size_t frames) {
  if (frames == 0) throw InputError("feature_codec", "cannot compute a rate over zero frames");
  return 8.0 * static_cast<double>(bytes) * fps / static_cast<double>(frames) / 1000.0;
}

}  // namespace mttf::codec
