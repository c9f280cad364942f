#include "mttf/model.hpp"

#include <bit>
#include <fstream>
#include <map>
#include <sstream>

#include "mttf/errors.hpp"
#include "mttf/warp.hpp"

namespace mttf {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

MttfModelImpl::MttfModelImpl(const ModelConfig& config) : config_(config) {
  config_.validate();
  factorizer_ = register_module("factorizer", Factorizer(config_));
  motion_ = register_module("motion", MotionEstimator(config_));
  foreground_ = register_module("foreground", ForegroundGenerator(config_));
  background_ = register_module("background", BackgroundGenerator(config_));
}

RoutePlan MttfModelImpl::route_for(int resolution) const {
  const auto& f = config_.factorizer;
  return plan_route(f.resolution, resolution, f.num_blocks, f.num_resolutions);
}

std::vector<RoutePlan> MttfModelImpl::all_routes() const {
  std::vector<RoutePlan> out;
  for (int r : config_.factorizer.supported_resolutions()) out.push_back(route_for(r));
  return out;
}

Synthesis MttfModelImpl::synthesize(const FrameImage& key, const Latent& key_latent,
                                    const CompactMotionVector& key_vectors, const CompactMotionVector& inter_vectors,
                                    const std::vector<RoutePlan>& routes) {
  const int64_t b = inter_vectors.weights.size(0);
  auto key_field = motion_transform(key_latent, key_vectors);
  auto inter_field = motion_transform(key_latent, inter_vectors);
  if (key_field.data.size(0) != b) key_field.data = key_field.data.expand({b, -1, -1, -1});
  if (inter_field.data.size(0) != b) inter_field.data = inter_field.data.expand({b, -1, -1, -1});

  Synthesis out;
  auto key_small = resize_bilinear(key.pixels(), config_.factorizer.grid_size());
  out.motion = motion_->estimate(key_field, inter_field, key_small);
  for (const auto& plan : routes) {
    auto key_at_route = resize_bilinear(key.pixels(), plan.resolution);
    GenerationOutput gen;
    gen.background = background_->forward(key_small, out.motion.background, plan);
    std::tie(gen.foreground, gen.mask) =
        foreground_->forward(key_at_route, out.motion.foreground, out.motion.occlusion, plan);
    gen.fused = fuse(gen.foreground, gen.background, gen.mask);
    out.outputs.push_back(std::move(gen));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                         static_cast<char>(v)};
  out.write(bytes, 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  write_u32(out, static_cast<std::uint32_t>(v >> 32));
  write_u32(out, static_cast<std::uint32_t>(v));
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw InputError("checkpoint", "truncated checkpoint");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

std::uint64_t read_u64(std::istream& in) {
  const std::uint64_t hi = read_u32(in);
  return (hi << 32) | read_u32(in);
}

std::map<std::string, torch::Tensor> named_tensors(torch::nn::Module& module) {
  std::map<std::string, torch::Tensor> out;
  for (auto& p : module.named_parameters(true)) out[p.key()] = p.value();
  for (auto& b : module.named_buffers(true)) out[b.key()] = b.value();
  return out;
}

}  // namespace

void save_parameters(torch::nn::Module& module, const KeyValueMap& header, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InputError("checkpoint", "cannot write " + path);
    header.write_block(out);
    for (auto& [name, tensor] : named_tensors(module)) {
      auto t = tensor.detach().to(torch::kCPU).contiguous();
      std::uint8_t dtype;
      if (t.scalar_type() == torch::kFloat32) {
        dtype = 0;
      } else if (t.scalar_type() == torch::kFloat64) {
        dtype = 1;
      } else {
        throw InputError("checkpoint", "unsupported dtype for " + name);
      }
      write_u32(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      out.put(static_cast<char>(dtype));
      out.put(static_cast<char>(t.dim()));
      for (int64_t d = 0; d < t.dim(); ++d) write_u64(out, static_cast<std::uint64_t>(t.size(d)));
      out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
    }
    if (!out) throw InputError("checkpoint", "write failed for " + path);
  }
  std::rename(tmp.c_str(), path.c_str());
}

KeyValueMap read_checkpoint_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("checkpoint", "cannot open " + path);
  return KeyValueMap::read_block(in);
}

void load_parameters(torch::nn::Module& module, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("checkpoint", "cannot open " + path);
  KeyValueMap::read_block(in);

  auto targets = named_tensors(module);
  std::map<std::string, bool> seen;
  torch::NoGradGuard no_grad;
  while (in.peek() != std::char_traits<char>::eof()) {
    const std::uint32_t name_len = read_u32(in);
    if (name_len > 4096) throw InputError("checkpoint", "corrupt record name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const int dtype = in.get();
    const int rank = in.get();
    if (!in || rank < 0 || rank > 8 || (dtype != 0 && dtype != 1)) {
      throw InputError("checkpoint", "corrupt record header for " + name);
    }
    std::vector<int64_t> sizes(rank);
    for (auto& s : sizes) s = static_cast<int64_t>(read_u64(in));
    auto blob = torch::empty(sizes, dtype == 0 ? torch::kFloat32 : torch::kFloat64);
    if (!in.read(static_cast<char*>(blob.data_ptr()), static_cast<std::streamsize>(blob.nbytes()))) {
      throw InputError("checkpoint", "truncated data for " + name);
    }
    auto it = targets.find(name);
    if (it == targets.end()) throw InputError("checkpoint", "unexpected parameter '" + name + "'");
    if (it->second.sizes() != blob.sizes()) {
      throw InputError("checkpoint", "shape mismatch for '" + name + "': file " + detail::shape_string(blob) +
                                         ", model " + detail::shape_string(it->second));
    }
    it->second.copy_(blob);
    seen[name] = true;
  }
  for (const auto& [name, _] : targets) {
    if (!seen.count(name)) throw InputError("checkpoint", "missing parameter '" + name + "'");
  }
}

void save_checkpoint(MttfModel& model, const std::string& path) {
  KeyValueMap header = model->config().to_key_values();
  header.set("format", std::string("mttf-checkpoint-1"));
  save_parameters(*model, header, path);
}

MttfModel load_checkpoint(const std::string& path) {
  const KeyValueMap header = read_checkpoint_header(path);
  if (header.get_or("format", "") != "mttf-checkpoint-1") {
    throw InputError("checkpoint", path + " is not an MTTF checkpoint");
  }
  MttfModel model(ModelConfig::from_key_values(header));
  load_parameters(*model, path);
  model->eval();
  return model;
}

}  // namespace mttf
