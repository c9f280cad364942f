#include "mttf/pipeline.hpp"

#include <json.hpp>

#include <algorithm>

#include "mttf/errors.hpp"
#include "mttf/feature_codec.hpp"

namespace mttf {

namespace {

constexpr const char* kModule = "pipeline";

codec::CodecConfig codec_config(const StreamHeader& header) {
  codec::CodecConfig cfg;
  cfg.delta = header.delta();
  cfg.num_features = header.num_features;
  cfg.validate();
  return cfg;
}

void fill_symbol_counts(StreamStats& stats, std::span<const codec::QuantizedResidual> residuals) {
  stats.symbols_per_frame.clear();
  stats.nonzero_symbols_per_frame.clear();
  for (const auto& r : residuals) {
    stats.symbols_per_frame.push_back(static_cast<int>(r.symbols.size()));
    stats.nonzero_symbols_per_frame.push_back(
        static_cast<int>(std::count_if(r.symbols.begin(), r.symbols.end(), [](int s) { return s != 0; })));
  }
}

StreamStats base_stats(const StreamHeader& header) {
  StreamStats stats;
  stats.frames = header.frame_count;
  stats.fps = header.fps();
  stats.resolution = header.coded_resolution();
  stats.header_bytes = kStreamHeaderSize;
  stats.keyframe_bytes = header.keyframe_length;
  stats.feature_bytes = header.feature_length;
  stats.total_bytes = kStreamHeaderSize + header.keyframe_length + header.feature_length;
  return stats;
}

void check_model_matches(const ModelConfig& config, const StreamHeader& header) {
  const auto& f = config.factorizer;
  if (header.resolution != f.resolution || header.num_features != f.num_features ||
      header.num_blocks != f.num_blocks || header.num_resolutions != f.num_resolutions) {
    throw DecodeError(kModule, "stream was coded for r=" + std::to_string(header.resolution) +
                                   " N_F=" + std::to_string(header.num_features) +
                                   " N_B=" + std::to_string(header.num_blocks) +
                                   " N_s=" + std::to_string(header.num_resolutions) +
                                   ", which does not match the checkpoint");
  }
}

}  // namespace

double StreamStats::total_kbps() const { return codec::kbps(total_bytes, fps, static_cast<std::size_t>(frames)); }
double StreamStats::keyframe_kbps() const {
  return codec::kbps(keyframe_bytes, fps, static_cast<std::size_t>(frames));
}
double StreamStats::feature_kbps() const { return codec::kbps(feature_bytes, fps, static_cast<std::size_t>(frames)); }

std::string StreamStats::to_json() const {
  nlohmann::json j{
      {"frames", frames},
      {"fps", fps},
      {"resolution", resolution},
      {"header_bits", header_bits()},
      {"keyframe_bits", keyframe_bits()},
      {"feature_bits", feature_bits()},
      {"total_bits", total_bits()},
      {"total_kbps", total_kbps()},
      {"keyframe_kbps", keyframe_kbps()},
      {"feature_kbps", feature_kbps()},
      {"symbols_per_frame", symbols_per_frame},
      {"nonzero_symbols_per_frame", nonzero_symbols_per_frame},
  };
  return j.dump(2);
}

EncodedSequence encode_sequence(MttfModel& model, const Video& video, KeyframeCodec& codec,
                                const EncodeOptions& options) {
  torch::NoGradGuard no_grad;
  model->eval();
  const auto& f = model->config().factorizer;
  if (options.resolution_index < 0 || options.resolution_index >= f.num_resolutions) {
    throw ConfigError(kModule, "resolution index " + std::to_string(options.resolution_index) + " outside [0, " +
                                   std::to_string(f.num_resolutions) + ")");
  }
  const int coded = f.resolution_at(options.resolution_index);
  const int64_t frames = video.frame_count();
  if (frames < 1 || frames > 65535) throw InputError(kModule, "frame count must be in [1, 65535]");
  if (video.width() != coded || video.height() != coded) {
    throw InputError(kModule, "frames are " + std::to_string(video.width()) + "x" + std::to_string(video.height()) +
                                  " but resolution index " + std::to_string(options.resolution_index) +
                                  " codes " + std::to_string(coded) + "x" + std::to_string(coded));
  }
  if (options.batch_size < 1) throw ConfigError(kModule, "batch size must be positive");

  StreamHeader header;
  header.resolution = static_cast<std::uint16_t>(f.resolution);
  header.resolution_index = static_cast<std::uint8_t>(options.resolution_index);
  header.num_features = static_cast<std::uint8_t>(f.num_features);
  header.num_blocks = static_cast<std::uint8_t>(f.num_blocks);
  header.num_resolutions = static_cast<std::uint8_t>(f.num_resolutions);
  header.frame_count = static_cast<std::uint16_t>(frames);
  header.fps_num = static_cast<std::uint16_t>(video.fps_num);
  header.fps_den = static_cast<std::uint16_t>(video.fps_den);
  if (video.fps_num < 1 || video.fps_num > 65535 || video.fps_den < 1 || video.fps_den > 65535) {
    throw InputError(kModule, "frame rate must be a ratio of 16-bit integers");
  }
  if (!(options.delta > 0.0)) throw ConfigError(kModule, "quantization step must be positive");
  std::tie(header.delta_num, header.delta_den) = to_rational16(options.delta);
  header.keyframe_codec_id = codec.id();

  // Only the reconstruction is analyzed from here on.
  const KeyframeCoding key = encode_keyframe(FrameImage(video.frames.slice(0, 0, 1)), options.qp, codec);
  auto [key_latent, key_mv] = model->factorizer()->analyze(key.reconstruction);
  const codec::MotionVectorValues key_vector = to_values(key_mv);

  std::vector<codec::MotionVectorValues> vectors;
  for (int64_t start = 1; start < frames; start += options.batch_size) {
    const int64_t end = std::min<int64_t>(frames, start + options.batch_size);
    const auto mv = model->factorizer()->analyze(FrameImage(video.frames.slice(0, start, end))).second;
    for (int64_t b = 0; b < end - start; ++b) vectors.push_back(to_values(mv, b));
  }

  const codec::SequenceCoding coded_features = codec::code_sequence(vectors, key_vector, codec_config(header));
  header.keyframe_length = static_cast<std::uint32_t>(key.payload.size());
  header.feature_length = static_cast<std::uint32_t>(coded_features.payload.size());

  EncodedSequence out;
  out.stream = mux(header, key.payload, coded_features.payload);
  out.stats = base_stats(header);
  fill_symbol_counts(out.stats, coded_features.residuals);
  return out;
}

DecodedSequence decode_sequence(MttfModel& model, std::span<const std::uint8_t> stream, KeyframeCodec& codec,
                                int batch_size) {
  torch::NoGradGuard no_grad;
  model->eval();
  if (batch_size < 1) throw ConfigError(kModule, "batch size must be positive");
  const DemuxedStream demuxed = demux(stream);
  const StreamHeader& header = demuxed.header;
  check_model_matches(model->config(), header);
  if (header.keyframe_codec_id != codec.id()) {
    throw DecodeError(kModule, "stream uses key-frame codec id " + std::to_string(header.keyframe_codec_id) +
                                   " but the " + codec.name() + " codec has id " + std::to_string(codec.id()));
  }
  const int coded = header.coded_resolution();
  const FrameImage key = codec.decode(demuxed.keyframe_payload);
  if (key.batch() != 1 || key.size() != coded) {
    throw DecodeError(kModule, "key frame decodes to " + detail::shape_string(key.pixels()) + ", expected " +
                                   std::to_string(coded) + "x" + std::to_string(coded));
  }

  const codec::CodecConfig cfg = codec_config(header);
  const std::size_t inter_count = header.frame_count - 1u;
  const auto residuals = codec::entropy_decode(demuxed.feature_payload, inter_count, cfg);

  auto [key_latent, key_mv] = model->factorizer()->analyze(key);
  const codec::MotionVectorValues key_vector = to_values(key_mv);
  std::vector<codec::MotionVectorValues> vectors;
  vectors.reserve(inter_count);
  codec::MotionVectorValues reference = key_vector;
  for (const auto& r : residuals) {
    reference = codec::reconstruct(reference, r, cfg.delta);
    vectors.push_back(reference);
  }

  const RoutePlan plan = model->route_for(coded);
  std::vector<torch::Tensor> frames{key.pixels()};
  for (std::size_t start = 0; start < inter_count; start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(inter_count, start + static_cast<std::size_t>(batch_size));
    const auto inter_mv = from_values(std::span(vectors).subspan(start, end - start));
    auto synthesis = model->synthesize(key, key_latent, key_mv, inter_mv, {plan});
    frames.push_back(synthesis.outputs.front().fused.clamp(0, 1));
  }

  DecodedSequence out;
  out.video.frames = torch::cat(frames, 0);
  out.video.fps_num = header.fps_num;
  out.video.fps_den = header.fps_den;
  out.stats = base_stats(header);
  fill_symbol_counts(out.stats, residuals);
  return out;
}

StreamStats stream_stats(std::span<const std::uint8_t> stream) {
  const DemuxedStream demuxed = demux(stream);
  StreamStats stats = base_stats(demuxed.header);
  const auto residuals =
      codec::entropy_decode(demuxed.feature_payload, demuxed.header.frame_count - 1u, codec_config(demuxed.header));
  fill_symbol_counts(stats, residuals);
  return stats;
}

}  // namespace mttf
