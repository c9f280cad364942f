#pragma once

// Key-frame codec adapters. The codec id is stored in the stream header.
//
// Builtin lossless payload (id 0):
//   u8 mode (0 = 8-bit samples, 1 = float32 samples), u16 width, u16 height
//   (big-endian), then zlib-deflated planar RGB samples. Mode 0 is chosen
//   whenever every sample is exactly k / 255; float32 samples are stored
//   little-endian.
//
// External adapter (id 1): two shell command templates. The encoder template
// receives {input} (a binary PPM of the frame), {output} (the payload file to
// write), {qp}, {width} and {height}; the decoder template receives {input}
// (the payload file) and {output} (a binary PPM to write).

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mttf/types.hpp"

namespace mttf {

inline constexpr std::uint8_t kLosslessKeyframeCodecId = 0;
inline constexpr std::uint8_t kExternalKeyframeCodecId = 1;

class KeyframeCodec {
 public:
  virtual ~KeyframeCodec() = default;

  virtual std::uint8_t id() const = 0;
  virtual std::string name() const = 0;

  // frame has batch 1.
  virtual std::vector<std::uint8_t> encode(const FrameImage& frame, int qp) = 0;
  virtual FrameImage decode(std::span<const std::uint8_t> payload) = 0;
};

class LosslessKeyframeCodec final : public KeyframeCodec {
 public:
  std::uint8_t id() const override { return kLosslessKeyframeCodecId; }
  std::string name() const override { return "lossless"; }
  std::vector<std::uint8_t> encode(const FrameImage& frame, int qp) override;
  FrameImage decode(std::span<const std::uint8_t> payload) override;
};

class CommandKeyframeCodec final : public KeyframeCodec {
 public:
  CommandKeyframeCodec(std::string encode_template, std::string decode_template);

  std::uint8_t id() const override { return kExternalKeyframeCodecId; }
  std::string name() const override { return "external"; }
  std::vector<std::uint8_t> encode(const FrameImage& frame, int qp) override;
  FrameImage decode(std::span<const std::uint8_t> payload) override;

  static constexpr int kMinQp = 0;
  static constexpr int kMaxQp = 63;

 private:
  std::string encode_template_;
  std::string decode_template_;
};

struct KeyframeCoding {
  std::vector<std::uint8_t> payload;
  FrameImage reconstruction;  // what the decoder will see
};

// Encodes and immediately decodes; checks the reconstruction keeps the
// frame's dimensions.
KeyframeCoding encode_keyframe(const FrameImage& frame, int qp, KeyframeCodec& codec);

}  // namespace mttf
