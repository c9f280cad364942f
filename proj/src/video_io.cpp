#include "mttf/video_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "mttf/errors.hpp"

namespace mttf {

float unit_from_byte(std::uint8_t value) { return static_cast<float>(value) / 255.0f; }

std::uint8_t byte_from_unit(float value) {
  const float scaled = std::round(std::clamp(value, 0.0f, 1.0f) * 255.0f);
  return static_cast<std::uint8_t>(scaled);
}

torch::Tensor quantize_to_bytes(const torch::Tensor& frames) {
  return (frames.clamp(0, 1) * 255.0f).round().to(torch::kUInt8).to(torch::kFloat32) / 255.0f;
}

std::string sidecar_path(const std::string& raw_path) { return raw_path + ".json"; }

VideoDescriptor read_descriptor(const std::string& sidecar) {
  std::ifstream in(sidecar);
  if (!in) throw InputError("video_io", "missing sidecar descriptor " + sidecar);
  try {
    const auto j = nlohmann::json::parse(in);
    VideoDescriptor d;
    d.width = j.at("width").get<int>();
    d.height = j.at("height").get<int>();
    d.fps_num = j.value("fps_num", 25);
    d.fps_den = j.value("fps_den", 1);
    d.frames = j.at("frames").get<int>();
    if (d.width <= 0 || d.height <= 0 || d.frames <= 0 || d.fps_num <= 0 || d.fps_den <= 0) {
      throw InputError("video_io", "descriptor values must be positive in " + sidecar);
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("video_io", "malformed descriptor " + sidecar + ": " + e.what());
  }
}

Video read_raw_video(const std::string& path) {
  const VideoDescriptor d = read_descriptor(sidecar_path(path));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("video_io", "cannot open " + path);
  const int64_t frame_bytes = int64_t{3} * d.width * d.height;
  std::vector<std::uint8_t> buffer(static_cast<std::size_t>(frame_bytes * d.frames));
  if (!in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()))) {
    throw InputError("video_io", path + " holds fewer than the " + std::to_string(d.frames) + " frames its sidecar announces");
  }
  auto bytes = torch::from_blob(buffer.data(), {d.frames, 3, d.height, d.width}, torch::kUInt8);
  Video v;
  v.frames = bytes.to(torch::kFloat32) / 255.0f;
  v.fps_num = d.fps_num;
  v.fps_den = d.fps_den;
  return v;
}

void write_raw_video(const std::string& path, const Video& video) {
  auto bytes = (video.frames.detach().to(torch::kCPU, torch::kFloat32).clamp(0, 1) * 255.0f)
                   .round()
                   .to(torch::kUInt8)
                   .contiguous();
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("video_io", "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data_ptr<std::uint8_t>()), static_cast<std::streamsize>(bytes.numel()));
  }
  nlohmann::json j{{"width", video.width()},     {"height", video.height()},
                   {"fps_num", video.fps_num},   {"fps_den", video.fps_den},
                   {"frames", video.frame_count()}};
  std::ofstream side(sidecar_path(path));
  side << j.dump(2) << '\n';
}

namespace {

struct Y4mHeader {
  int width = 0;
  int height = 0;
  int fps_num = 25;
  int fps_den = 1;
  std::string chroma = "420jpeg";
  bool full_range = false;
};

Y4mHeader parse_y4m_header(const std::string& line) {
  std::istringstream ss(line);
  std::string token;
  ss >> token;
  if (token != "YUV4MPEG2") throw InputError("video_io", "not a Y4M stream");
  Y4mHeader h;
  while (ss >> token) {
    const char tag = token[0];
    const std::string value = token.substr(1);
    switch (tag) {
      case 'W': h.width = std::stoi(value); break;
      case 'H': h.height = std::stoi(value); break;
      case 'F': {
        const auto colon = value.find(':');
        h.fps_num = std::stoi(value.substr(0, colon));
        h.fps_den = colon == std::string::npos ? 1 : std::stoi(value.substr(colon + 1));
        break;
      }
      case 'C': h.chroma = value; break;
      case 'X':
        if (value == "COLORRANGE=FULL") h.full_range = true;
        break;
      default: break;
    }
  }
  if (h.width <= 0 || h.height <= 0) throw InputError("video_io", "Y4M header lacks dimensions");
  return h;
}

}  // namespace

Video read_y4m(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("video_io", "cannot open " + path);
  std::string line;
  std::getline(in, line);
  const Y4mHeader h = parse_y4m_header(line);

  int cw = h.width, ch = h.height;
  bool mono = false;
  if (h.chroma.rfind("420", 0) == 0) {
    cw = (h.width + 1) / 2;
    ch = (h.height + 1) / 2;
  } else if (h.chroma.rfind("422", 0) == 0) {
    cw = (h.width + 1) / 2;
  } else if (h.chroma.rfind("mono", 0) == 0) {
    mono = true;
  } else if (h.chroma.rfind("444", 0) != 0) {
    throw InputError("video_io", "unsupported Y4M chroma format " + h.chroma);
  }

  const std::size_t luma = static_cast<std::size_t>(h.width) * h.height;
  const std::size_t chroma = mono ? 0 : static_cast<std::size_t>(cw) * ch;
  std::vector<torch::Tensor> frames;
  std::vector<std::uint8_t> buf(luma + 2 * chroma);
  while (std::getline(in, line)) {
    if (line.rfind("FRAME", 0) != 0) throw InputError("video_io", "corrupt Y4M frame marker");
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
      throw InputError("video_io", "truncated Y4M frame");
    }
    auto y = torch::from_blob(buf.data(), {1, 1, h.height, h.width}, torch::kUInt8).to(torch::kFloat32);
    torch::Tensor u, v;
    if (mono) {
      u = torch::full_like(y, 128.0f);
      v = torch::full_like(y, 128.0f);
    } else {
      u = torch::from_blob(buf.data() + luma, {1, 1, ch, cw}, torch::kUInt8).to(torch::kFloat32);
      v = torch::from_blob(buf.data() + luma + chroma, {1, 1, ch, cw}, torch::kUInt8).to(torch::kFloat32);
      if (ch != h.height || cw != h.width) {
        namespace F = torch::nn::functional;
        auto opts = F::InterpolateFuncOptions()
                        .size(std::vector<int64_t>{h.height, h.width})
                        .mode(torch::kBilinear)
                        .align_corners(false);
        u = F::interpolate(u, opts);
        v = F::interpolate(v, opts);
      }
    }
    torch::Tensor yf, uf, vf;
    if (h.full_range) {
      yf = y / 255.0f;
      uf = (u - 128.0f) / 255.0f;
      vf = (v - 128.0f) / 255.0f;
    } else {
      yf = (y - 16.0f) / 219.0f;
      uf = (u - 128.0f) / 224.0f;
      vf = (v - 128.0f) / 224.0f;
    }
    auto r = yf + 1.402f * vf;
    auto g = yf - 0.344136f * uf - 0.714136f * vf;
    auto b = yf + 1.772f * uf;
    // Snap to the 8-bit grid so Y4M and raw inputs behave identically downstream.
    frames.push_back(quantize_to_bytes(torch::cat({r, g, b}, 1)));
  }
  if (frames.empty()) throw InputError("video_io", path + " contains no frames");
  Video out;
  out.frames = torch::cat(frames, 0);
  out.fps_num = h.fps_num;
  out.fps_den = h.fps_den;
  return out;
}

Video read_video(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".y4m") == 0) return read_y4m(path);
  return read_raw_video(path);
}

void write_ppm(const std::string& path, const torch::Tensor& frame) {
  if (frame.dim() != 3 || frame.size(0) != 3) throw InputError("video_io", "PPM output needs a 3 x H x W frame");
  auto hwc = (frame.detach().to(torch::kCPU, torch::kFloat32).clamp(0, 1) * 255.0f)
                 .round()
                 .to(torch::kUInt8)
                 .permute({1, 2, 0})
                 .contiguous();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("video_io", "cannot write " + path);
  out << "P6\n" << frame.size(2) << ' ' << frame.size(1) << "\n255\n";
  out.write(reinterpret_cast<const char*>(hwc.data_ptr<std::uint8_t>()), static_cast<std::streamsize>(hwc.numel()));
}

torch::Tensor read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("video_io", "cannot open " + path);
  std::string magic;
  in >> magic;
  auto next_int = [&in]() {
    int value = 0;
    while (true) {
      in >> std::ws;
      if (in.peek() == '#') {
        std::string comment;
        std::getline(in, comment);
        continue;
      }
      in >> value;
      return value;
    }
  };
  const int width = next_int();
  const int height = next_int();
  const int maxval = next_int();
  in.get();
  if (magic != "P6" || width <= 0 || height <= 0 || maxval != 255) {
    throw InputError("video_io", path + " is not an 8-bit binary PPM");
  }
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(width) * height * 3);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
    throw InputError("video_io", "truncated PPM " + path);
  }
  return torch::from_blob(buf.data(), {height, width, 3}, torch::kUInt8)
             .permute({2, 0, 1})
             .to(torch::kFloat32)
             .contiguous() /
         255.0f;
}

}  // namespace mttf
