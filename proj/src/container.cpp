#include "mttf/container.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "mttf/errors.hpp"

namespace mttf {

const char* to_string(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::kTruncated: return "truncated stream";
    case FormatErrorKind::kBadMagic: return "bad magic";
    case FormatErrorKind::kBadCrc: return "header crc mismatch";
    case FormatErrorKind::kUnsupportedVersion: return "unsupported version";
    case FormatErrorKind::kLengthMismatch: return "length mismatch";
    case FormatErrorKind::kInvalidField: return "invalid header field";
  }
  return "format error";
}

namespace {

class ByteWriter {
 public:
  explicit ByteWriter(std::span<std::uint8_t> out) : out_(out) {}
  void u8(std::uint8_t v) { out_[pos_++] = v; }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v >> 8));
    u8(static_cast<std::uint8_t>(v));
  }
  void u32(std::uint32_t v) {
    u16(static_cast<std::uint16_t>(v >> 16));
    u16(static_cast<std::uint16_t>(v));
  }

 private:
  std::span<std::uint8_t> out_;
  std::size_t pos_ = 0;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t u8() { return in_[pos_++]; }
  std::uint16_t u16() {
    const std::uint16_t hi = u8();
    return static_cast<std::uint16_t>((hi << 8) | u8());
  }
  std::uint32_t u32() {
    const std::uint32_t hi = u16();
    return (hi << 16) | u16();
  }
  void skip(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void check_fields(const StreamHeader& h) {
  auto fail = [](const std::string& what) { throw FormatError(FormatErrorKind::kInvalidField, what); };
  if (h.num_resolutions == 0 || h.resolution_index >= h.num_resolutions) fail("resolution index out of range");
  if (h.num_blocks == 0 || h.num_resolutions > h.num_blocks) fail("N_s must lie in [1, N_B]");
  if (h.num_features == 0) fail("N_F must be >= 1");
  if (h.frame_count == 0) fail("frame count must be >= 1");
  if (h.fps_den == 0 || h.fps_num == 0) fail("frame rate must be positive");
  if (h.delta_den == 0 || h.delta_num == 0) fail("quantization step must be positive");
  if (h.resolution == 0 || (h.resolution % (1u << h.num_blocks)) != 0) fail("r must be divisible by 2^N_B");
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size())));
}

std::array<std::uint8_t, kStreamHeaderSize> serialize_header(const StreamHeader& h) {
  std::array<std::uint8_t, kStreamHeaderSize> out{};
  ByteWriter w(out);
  for (auto b : kStreamMagic) w.u8(b);
  w.u8(h.version);
  w.u16(h.resolution);
  w.u8(h.resolution_index);
  w.u8(h.num_features);
  w.u8(h.num_blocks);
  w.u8(h.num_resolutions);
  w.u16(h.frame_count);
  w.u16(h.fps_num);
  w.u16(h.fps_den);
  w.u16(h.delta_num);
  w.u16(h.delta_den);
  w.u8(h.keyframe_codec_id);
  w.u32(h.keyframe_length);
  w.u32(h.feature_length);
  w.u32(crc32(std::span<const std::uint8_t>(out.data(), kStreamHeaderSize - 4)));
  return out;
}

StreamHeader parse_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kStreamHeaderSize) {
    throw FormatError(FormatErrorKind::kTruncated, "stream shorter than the " + std::to_string(kStreamHeaderSize) +
                                                       "-byte header");
  }
  if (!std::equal(kStreamMagic.begin(), kStreamMagic.end(), bytes.begin())) {
    throw FormatError(FormatErrorKind::kBadMagic, "expected \"MTTF\"");
  }
  ByteReader r(bytes);
  r.skip(4);
  StreamHeader h;
  h.version = r.u8();
  h.resolution = r.u16();
  h.resolution_index = r.u8();
  h.num_features = r.u8();
  h.num_blocks = r.u8();
  h.num_resolutions = r.u8();
  h.frame_count = r.u16();
  h.fps_num = r.u16();
  h.fps_den = r.u16();
  h.delta_num = r.u16();
  h.delta_den = r.u16();
  h.keyframe_codec_id = r.u8();
  h.keyframe_length = r.u32();
  h.feature_length = r.u32();
  const std::uint32_t stored_crc = r.u32();
  if (stored_crc != crc32(bytes.first(kStreamHeaderSize - 4))) {
    throw FormatError(FormatErrorKind::kBadCrc, "header checksum does not verify");
  }
  if (h.version != kStreamVersion) {
    throw FormatError(FormatErrorKind::kUnsupportedVersion, "version " + std::to_string(h.version));
  }
  check_fields(h);
  return h;
}

std::vector<std::uint8_t> mux(const StreamHeader& header, std::span<const std::uint8_t> keyframe_payload,
                              std::span<const std::uint8_t> feature_payload) {
  if (header.keyframe_length != keyframe_payload.size() || header.feature_length != feature_payload.size()) {
    throw FormatError(FormatErrorKind::kLengthMismatch, "header payload lengths disagree with the payloads");
  }
  check_fields(header);
  const auto head = serialize_header(header);
  std::vector<std::uint8_t> out;
  out.reserve(head.size() + keyframe_payload.size() + feature_payload.size());
  out.insert(out.end(), head.begin(), head.end());
  out.insert(out.end(), keyframe_payload.begin(), keyframe_payload.end());
  out.insert(out.end(), feature_payload.begin(), feature_payload.end());
  return out;
}

DemuxedStream demux(std::span<const std::uint8_t> stream) {
  DemuxedStream out;
  out.header = parse_header(stream);
  const std::size_t need =
      kStreamHeaderSize + std::size_t{out.header.keyframe_length} + std::size_t{out.header.feature_length};
  if (stream.size() < need) {
    throw FormatError(FormatErrorKind::kTruncated,
                      "stream has " + std::to_string(stream.size()) + " bytes, header announces " + std::to_string(need));
  }
  if (stream.size() > need) {
    throw FormatError(FormatErrorKind::kLengthMismatch,
                      std::to_string(stream.size() - need) + " unexpected bytes after the feature payload");
  }
  auto key = stream.subspan(kStreamHeaderSize, out.header.keyframe_length);
  auto feat = stream.subspan(kStreamHeaderSize + out.header.keyframe_length, out.header.feature_length);
  out.keyframe_payload.assign(key.begin(), key.end());
  out.feature_payload.assign(feat.begin(), feat.end());
  return out;
}

std::pair<std::uint16_t, std::uint16_t> to_rational16(double value) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ConfigError("bitstream", "cannot encode non-positive value " + std::to_string(value) + " as a rational");
  }
  // Exhaustive search over denominators; both terms must fit in 16 bits.
  std::uint64_t best_num = 1, best_den = 1;
  double best_err = std::abs(value - 1.0);
  for (std::uint64_t den = 1; den <= 65535; ++den) {
    const double num_f = std::round(value * static_cast<double>(den));
    if (num_f < 1 || num_f > 65535) continue;
    const double err = std::abs(value - num_f / static_cast<double>(den));
    if (err < best_err) {
      best_err = err;
      best_num = static_cast<std::uint64_t>(num_f);
      best_den = den;
      if (err == 0.0) break;
    }
  }
  return {static_cast<std::uint16_t>(best_num), static_cast<std::uint16_t>(best_den)};
}

}  // namespace mttf
