#include "mttf/keyframe_codec.hpp"

#include <zlib.h>

#include <bit>
#include <filesystem>
#include <fstream>

#include "mttf/command.hpp"
#include "mttf/errors.hpp"
#include "mttf/files.hpp"
#include "mttf/video_io.hpp"

namespace mttf {

static_assert(std::endian::native == std::endian::little, "float32 key-frame payloads assume a little-endian host");

namespace {

constexpr const char* kModule = "keyframe_codec";

std::vector<std::uint8_t> deflate_bytes(const std::uint8_t* data, std::size_t size) {
  uLongf bound = compressBound(static_cast<uLong>(size));
  std::vector<std::uint8_t> out(bound);
  if (compress2(out.data(), &bound, data, static_cast<uLong>(size), 9) != Z_OK) {
    throw AdapterError(kModule, "deflate failed");
  }
  out.resize(bound);
  return out;
}

void inflate_exact(std::span<const std::uint8_t> in, std::uint8_t* out, std::size_t size) {
  uLongf produced = static_cast<uLongf>(size);
  const int rc = uncompress(out, &produced, in.data(), static_cast<uLong>(in.size()));
  if (rc != Z_OK || produced != size) throw DecodeError(kModule, "corrupt lossless key-frame payload");
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw AdapterError(kModule, "cannot write " + path);
}

}  // namespace

std::vector<std::uint8_t> LosslessKeyframeCodec::encode(const FrameImage& frame, int /*qp*/) {
  if (frame.batch() != 1) throw InputError(kModule, "key frame must have batch 1");
  auto pixels = frame.pixels()[0].detach().to(torch::kCPU, torch::kFloat32).contiguous();
  const auto h = pixels.size(1);
  const auto w = pixels.size(2);
  if (h > 65535 || w > 65535) throw InputError(kModule, "key frame too large");

  const bool byte_exact = torch::equal(quantize_to_bytes(pixels), pixels);
  std::vector<std::uint8_t> out{static_cast<std::uint8_t>(byte_exact ? 0 : 1),
                                static_cast<std::uint8_t>(w >> 8), static_cast<std::uint8_t>(w),
                                static_cast<std::uint8_t>(h >> 8), static_cast<std::uint8_t>(h)};
  std::vector<std::uint8_t> body;
  if (byte_exact) {
    auto bytes = (pixels * 255.0f).round().to(torch::kUInt8).contiguous();
    body = deflate_bytes(bytes.data_ptr<std::uint8_t>(), static_cast<std::size_t>(bytes.numel()));
  } else {
    body = deflate_bytes(static_cast<const std::uint8_t*>(pixels.data_ptr()), pixels.nbytes());
  }
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

FrameImage LosslessKeyframeCodec::decode(std::span<const std::uint8_t> payload) {
  if (payload.size() < 5) throw DecodeError(kModule, "truncated lossless key-frame payload");
  const int mode = payload[0];
  const int64_t w = (int64_t{payload[1]} << 8) | payload[2];
  const int64_t h = (int64_t{payload[3]} << 8) | payload[4];
  if (mode > 1 || w == 0 || h == 0) throw DecodeError(kModule, "invalid lossless key-frame header");
  const auto body = payload.subspan(5);
  torch::Tensor pixels;
  if (mode == 0) {
    auto bytes = torch::empty({1, 3, h, w}, torch::kUInt8);
    inflate_exact(body, bytes.data_ptr<std::uint8_t>(), static_cast<std::size_t>(bytes.numel()));
    pixels = bytes.to(torch::kFloat32) / 255.0f;
  } else {
    pixels = torch::empty({1, 3, h, w}, torch::kFloat32);
    inflate_exact(body, static_cast<std::uint8_t*>(pixels.data_ptr()), pixels.nbytes());
  }
  return FrameImage(pixels);
}

CommandKeyframeCodec::CommandKeyframeCodec(std::string encode_template, std::string decode_template)
    : encode_template_(std::move(encode_template)), decode_template_(std::move(decode_template)) {
  if (encode_template_.empty() || decode_template_.empty()) {
    throw ConfigError(kModule, "external key-frame codec needs both encode and decode command templates");
  }
}

std::vector<std::uint8_t> CommandKeyframeCodec::encode(const FrameImage& frame, int qp) {
  if (qp < kMinQp || qp > kMaxQp) {
    throw ConfigError(kModule, "qp " + std::to_string(qp) + " outside [0, 63]");
  }
  if (frame.batch() != 1) throw InputError(kModule, "key frame must have batch 1");
  ScratchDir scratch("mttf-kf");
  const std::string input = scratch.file("key.ppm");
  const std::string output = scratch.file("key.bin");
  write_ppm(input, frame.pixels()[0]);
  const std::string command = expand_template(
      encode_template_, {{"input", shell_quote(input)},
                         {"output", shell_quote(output)},
                         {"qp", std::to_string(qp)},
                         {"width", std::to_string(frame.pixels().size(3))},
                         {"height", std::to_string(frame.pixels().size(2))}});
  const CommandResult result = run_command(command);
  if (result.exit_code != 0) {
    throw AdapterError(kModule, "key-frame encoder exited with status " + std::to_string(result.exit_code),
                       "command: " + command + "\n" + result.output);
  }
  if (!std::filesystem::exists(output)) {
    throw AdapterError(kModule, "key-frame encoder produced no output", "command: " + command + "\n" + result.output);
  }
  return read_bytes(output);
}

FrameImage CommandKeyframeCodec::decode(std::span<const std::uint8_t> payload) {
  ScratchDir scratch("mttf-kf");
  const std::string input = scratch.file("key.bin");
  const std::string output = scratch.file("key.ppm");
  write_file(input, payload);
  const std::string command =
      expand_template(decode_template_, {{"input", shell_quote(input)}, {"output", shell_quote(output)}});
  const CommandResult result = run_command(command);
  if (result.exit_code != 0) {
    throw AdapterError(kModule, "key-frame decoder exited with status " + std::to_string(result.exit_code),
                       "command: " + command + "\n" + result.output);
  }
  try {
    return FrameImage::from_tensor(read_ppm(output));
  } catch (const Error& e) {
    throw AdapterError(kModule, "key-frame decoder output unreadable", e.what() + std::string("\n") + result.output);
  }
}

KeyframeCoding encode_keyframe(const FrameImage& frame, int qp, KeyframeCodec& codec) {
  KeyframeCoding out;
  out.payload = codec.encode(frame, qp);
  out.reconstruction = codec.decode(out.payload);
  if (out.reconstruction.pixels().sizes() != frame.pixels().sizes()) {
    throw AdapterError(kModule, codec.name() + " codec changed the key-frame dimensions: " +
                                    detail::shape_string(frame.pixels()) + " -> " +
                                    detail::shape_string(out.reconstruction.pixels()));
  }
  return out;
}

}  // namespace mttf
