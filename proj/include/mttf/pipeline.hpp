#pragma once

// Sequence-level encoder and decoder.
//
// Encoding codes frame 0 with the key-frame codec, analyzes the
// reconstructed key frame (never the original) and every inter frame, and
// predictively codes the inter-frame vectors. Decoding mirrors the encoder
// and synthesizes every inter frame at the coded resolution.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mttf/container.hpp"
#include "mttf/keyframe_codec.hpp"
#include "mttf/model.hpp"
#include "mttf/video_io.hpp"

namespace mttf {

struct EncodeOptions {
  int qp = 32;
  double delta = 1.0 / 50.0;
  int resolution_index = 0;
  int batch_size = 8;  // inter frames analyzed per forward pass
};

struct StreamStats {
  int frames = 0;
  double fps = 0.0;
  int resolution = 0;
  std::size_t header_bytes = 0;
  std::size_t keyframe_bytes = 0;
  std::size_t feature_bytes = 0;
  std::size_t total_bytes = 0;
  std::vector<int> symbols_per_frame;          // 2 N_F for every inter frame
  std::vector<int> nonzero_symbols_per_frame;  // non-zero residual symbols per inter frame

  std::uint64_t header_bits() const { return 8 * header_bytes; }
  std::uint64_t keyframe_bits() const { return 8 * keyframe_bytes; }
  std::uint64_t feature_bits() const { return 8 * feature_bytes; }
  std::uint64_t total_bits() const { return 8 * total_bytes; }
  double total_kbps() const;
  double keyframe_kbps() const;
  double feature_kbps() const;

  std::string to_json() const;
};

struct EncodedSequence {
  std::vector<std::uint8_t> stream;
  StreamStats stats;
};

struct DecodedSequence {
  Video video;
  StreamStats stats;
};

EncodedSequence encode_sequence(MttfModel& model, const Video& video, KeyframeCodec& codec,
                                const EncodeOptions& options);

DecodedSequence decode_sequence(MttfModel& model, std::span<const std::uint8_t> stream, KeyframeCodec& codec,
                                int batch_size = 8);

// Stats of an existing stream without decoding it.
StreamStats stream_stats(std::span<const std::uint8_t> stream);

}  // namespace mttf
