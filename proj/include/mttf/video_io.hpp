#pragma once

// Raw video I/O. A raw video is a file of 8-bit RGB planar frames (R plane,
// G plane, B plane per frame) plus a JSON sidecar "<file>.json":
//   {"width": W, "height": H, "fps_num": 25, "fps_den": 1, "frames": T}
// Y4M input (4:2:0, 4:2:2, 4:4:4, mono; 8-bit) is converted to RGB with
// BT.601 coefficients, limited range unless the stream says XCOLORRANGE=FULL.

#include <torch/torch.h>

#include <cstdint>
#include <string>

namespace mttf {

struct Video {
  torch::Tensor frames;  // T x 3 x H x W, float32 in [0, 1]
  int fps_num = 25;
  int fps_den = 1;

  int64_t frame_count() const { return frames.size(0); }
  int64_t height() const { return frames.size(2); }
  int64_t width() const { return frames.size(3); }
  double fps() const { return static_cast<double>(fps_num) / fps_den; }
};

struct VideoDescriptor {
  int width = 0;
  int height = 0;
  int fps_num = 25;
  int fps_den = 1;
  int frames = 0;
};

// k / 255, the single conversion used everywhere 8-bit samples enter.
float unit_from_byte(std::uint8_t value);
std::uint8_t byte_from_unit(float value);

// Quantizes to the 8-bit grid (what a round trip through a raw file does).
torch::Tensor quantize_to_bytes(const torch::Tensor& frames);

std::string sidecar_path(const std::string& raw_path);
VideoDescriptor read_descriptor(const std::string& sidecar);

Video read_raw_video(const std::string& path);
// Writes the raw file and its sidecar; frames are rounded to 8 bits.
void write_raw_video(const std::string& path, const Video& video);

Video read_y4m(const std::string& path);

// Dispatches on extension: ".y4m" or raw with sidecar.
Video read_video(const std::string& path);

// Binary PPM (P6, maxval 255) for a single 3 x H x W frame.
void write_ppm(const std::string& path, const torch::Tensor& frame);
torch::Tensor read_ppm(const std::string& path);

}  // namespace mttf
