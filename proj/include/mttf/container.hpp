#pragma once

// .mttf container: a fixed 34-byte big-endian header followed by the key-frame
// payload and the feature payload.
//
//   offset size field
//        0    4 magic "MTTF"
//        4    1 version (1)
//        5    2 r, largest supported resolution
//        7    1 resolution index i (coded frames are r / 2^i square)
//        8    1 N_F
//        9    1 N_B
//       10    1 N_s
//       11    2 frame_count (key frame included)
//       13    2 fps numerator
//       15    2 fps denominator
//       17    2 quantization step numerator
//       19    2 quantization step denominator
//       21    1 key-frame codec id
//       22    4 key-frame payload length
//       26    4 feature payload length
//       30    4 CRC-32 (zlib polynomial) over bytes [0, 30)

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace mttf {

inline constexpr std::array<std::uint8_t, 4> kStreamMagic{'M', 'T', 'T', 'F'};
inline constexpr std::uint8_t kStreamVersion = 1;
inline constexpr std::size_t kStreamHeaderSize = 34;

struct StreamHeader {
  std::uint8_t version = kStreamVersion;
  std::uint16_t resolution = 0;
  std::uint8_t resolution_index = 0;
  std::uint8_t num_features = 0;
  std::uint8_t num_blocks = 0;
  std::uint8_t num_resolutions = 0;
  std::uint16_t frame_count = 0;
  std::uint16_t fps_num = 25;
  std::uint16_t fps_den = 1;
  std::uint16_t delta_num = 1;
  std::uint16_t delta_den = 50;
  std::uint8_t keyframe_codec_id = 0;
  std::uint32_t keyframe_length = 0;
  std::uint32_t feature_length = 0;

  double fps() const { return static_cast<double>(fps_num) / fps_den; }
  double delta() const { return static_cast<double>(delta_num) / delta_den; }
  int coded_resolution() const { return resolution >> resolution_index; }

  bool operator==(const StreamHeader&) const = default;
};

// Serialized header including the trailing CRC.
std::array<std::uint8_t, kStreamHeaderSize> serialize_header(const StreamHeader& header);

// Validates truncation, magic, CRC, version and field consistency in that
// order; throws FormatError with the matching kind.
StreamHeader parse_header(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> mux(const StreamHeader& header, std::span<const std::uint8_t> keyframe_payload,
                              std::span<const std::uint8_t> feature_payload);

struct DemuxedStream {
  StreamHeader header;
  std::vector<std::uint8_t> keyframe_payload;
  std::vector<std::uint8_t> feature_payload;
};

DemuxedStream demux(std::span<const std::uint8_t> stream);

// Best rational approximation with 16-bit numerator and denominator.
std::pair<std::uint16_t, std::uint16_t> to_rational16(double value);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

}  // namespace mttf
