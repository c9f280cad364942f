#include "mttf/types.hpp"

#include <sstream>

#include "mttf/errors.hpp"

namespace mttf {

namespace detail {

std::string shape_string(const torch::Tensor& t) {
  if (!t.defined()) return "<undefined>";
  std::ostringstream os;
  os << t.sizes();
  return os.str();
}

void expect_shape(const torch::Tensor& t, std::initializer_list<int64_t> expected, const std::string& module,
                  const std::string& what) {
  bool ok = t.defined() && t.dim() == static_cast<int64_t>(expected.size());
  if (ok) {
    int64_t k = 0;
    for (int64_t e : expected) {
      if (e >= 0 && t.size(k) != e) ok = false;
      ++k;
    }
  }
  if (!ok) {
    std::ostringstream os;
    os << what << " has shape " << shape_string(t) << ", expected [";
    int64_t k = 0;
    for (int64_t e : expected) os << (k++ ? ", " : "") << (e >= 0 ? std::to_string(e) : std::string("*"));
    os << "]";
    throw InputError(module, os.str());
  }
}

}  // namespace detail

FrameImage::FrameImage(torch::Tensor pixels) : pixels_(std::move(pixels)) {
  detail::expect_shape(pixels_, {-1, 3, -1, -1}, "factorizer", "frame");
  if (pixels_.size(2) != pixels_.size(3)) {
    throw InputError("factorizer", "frames must be square, got " + detail::shape_string(pixels_));
  }
  if (!pixels_.is_floating_point()) throw InputError("factorizer", "frame pixels must be floating point");
  torch::NoGradGuard no_grad;
  if (!torch::isfinite(pixels_).all().item<bool>()) throw InputError("factorizer", "frame contains non-finite pixels");
  if (pixels_.numel() > 0 && (pixels_.min().item<double>() < 0.0 || pixels_.max().item<double>() > 1.0)) {
    throw InputError("factorizer", "frame pixels must lie in [0, 1]");
  }
}

FrameImage FrameImage::from_tensor(torch::Tensor pixels) {
  if (pixels.defined() && pixels.dim() == 3) pixels = pixels.unsqueeze(0);
  return FrameImage(std::move(pixels));
}

}  // namespace mttf
