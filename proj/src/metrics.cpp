#include "mttf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <regex>

#include "mttf/command.hpp"
#include "mttf/errors.hpp"
#include "mttf/types.hpp"

namespace mttf {

namespace {

constexpr const char* kModule = "metrics";

int sign(double v) { return (v > 0) - (v < 0); }

struct Curve {
  std::vector<double> q;
  std::vector<double> log_rate;
};

Curve prepare(const std::vector<RDPoint>& points, const char* which) {
  if (points.size() < 4) {
    throw EvaluationError(kModule, std::string(which) + " curve has " + std::to_string(points.size()) +
                                       " points; BD-rate needs at least 4");
  }
  std::vector<RDPoint> sorted = points;
  for (const auto& p : sorted) {
    if (!(p.rate_kbps > 0.0) || !std::isfinite(p.rate_kbps) || !std::isfinite(p.quality)) {
      throw EvaluationError(kModule, std::string(which) + " curve has a non-positive or non-finite point");
    }
  }
  std::sort(sorted.begin(), sorted.end(), [](const RDPoint& a, const RDPoint& b) { return a.quality < b.quality; });
  Curve c;
  for (const auto& p : sorted) {
    if (!c.q.empty() && p.quality == c.q.back()) {
      throw EvaluationError(kModule, std::string(which) + " curve repeats a quality value");
    }
    c.q.push_back(p.quality);
    c.log_rate.push_back(std::log(p.rate_kbps));
  }
  return c;
}

// Integral over [a, b] of the least-squares cubic through (q, y).
double cubic_fit_integral(const Curve& c, double a, double b) {
  // Centered and scaled abscissa keeps the Vandermonde system well conditioned.
  const double center = 0.5 * (c.q.front() + c.q.back());
  const double scale = 0.5 * (c.q.back() - c.q.front());
  const auto n = static_cast<int64_t>(c.q.size());
  auto A = torch::empty({n, 4}, torch::kFloat64);
  auto y = torch::empty({n, 1}, torch::kFloat64);
  for (int64_t i = 0; i < n; ++i) {
    const double u = (c.q[i] - center) / scale;
    for (int64_t k = 0; k < 4; ++k) A[i][k] = std::pow(u, static_cast<double>(k));
    y[i][0] = c.log_rate[i];
  }
  const auto coeffs = std::get<0>(torch::linalg_lstsq(A, y));
  auto antiderivative = [&](double q) {
    const double u = (q - center) / scale;
    double sum = 0.0;
    for (int k = 0; k < 4; ++k) sum += coeffs[k][0].item<double>() * std::pow(u, k + 1) / (k + 1);
    return sum * scale;
  };
  return antiderivative(b) - antiderivative(a);
}

}  // namespace

double psnr(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) {
    throw InputError(kModule, "psnr shape mismatch: " + detail::shape_string(a) + " vs " + detail::shape_string(b));
  }
  if (a.dim() != 4 || a.size(0) < 1) throw InputError(kModule, "psnr expects T x C x H x W videos");
  const auto diff = a.to(torch::kFloat64) - b.to(torch::kFloat64);
  const auto mse = diff.pow(2).flatten(1).mean(1);
  if (mse.max().item<double>() == 0.0) return std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (int64_t t = 0; t < mse.size(0); ++t) {
    const double m = mse[t].item<double>();
    total += m == 0.0 ? kPsnrCeilingDb : 10.0 * std::log10(1.0 / m);
  }
  return total / static_cast<double>(mse.size(0));
}

Pchip::Pchip(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  if (n < 2 || y_.size() != n) throw EvaluationError(kModule, "pchip needs at least two matching samples");
  for (std::size_t k = 1; k < n; ++k) {
    if (!(x_[k] > x_[k - 1])) throw EvaluationError(kModule, "pchip abscissae must be strictly increasing");
  }
  std::vector<double> h(n - 1), m(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    h[k] = x_[k + 1] - x_[k];
    m[k] = (y_[k + 1] - y_[k]) / h[k];
  }
  d_.assign(n, 0.0);
  if (n == 2) {
    d_[0] = d_[1] = m[0];
    return;
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (sign(m[k - 1]) * sign(m[k]) <= 0) continue;
    const double w1 = 2 * h[k] + h[k - 1];
    const double w2 = h[k] + 2 * h[k - 1];
    d_[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
  }
  auto edge = [](double h0, double h1, double m0, double m1) {
    double d = ((2 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if (sign(d) != sign(m0)) {
      d = 0.0;
    } else if (sign(m0) != sign(m1) && std::abs(d) > 3 * std::abs(m0)) {
      d = 3 * m0;
    }
    return d;
  };
  d_[0] = edge(h[0], h[1], m[0], m[1]);
  d_[n - 1] = edge(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
}

std::size_t Pchip::segment(double t) const {
  const auto it = std::upper_bound(x_.begin(), x_.end(), t);
  const auto idx = static_cast<std::size_t>(std::distance(x_.begin(), it));
  return std::clamp<std::size_t>(idx == 0 ? 0 : idx - 1, 0, x_.size() - 2);
}

double Pchip::operator()(double t) const {
  const std::size_t k = segment(t);
  const double h = x_[k + 1] - x_[k];
  const double s = (t - x_[k]) / h;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * y_[k] + (s3 - 2 * s2 + s) * h * d_[k] + (-2 * s3 + 3 * s2) * y_[k + 1] +
         (s3 - s2) * h * d_[k + 1];
}

double Pchip::segment_integral(std::size_t k, double a, double b) const {
  const double h = x_[k + 1] - x_[k];
  auto antiderivative = [&](double t) {
    const double s = (t - x_[k]) / h;
    const double s2 = s * s, s3 = s2 * s, s4 = s3 * s;
    return h * ((s4 / 2 - s3 + s) * y_[k] + (s4 / 4 - 2 * s3 / 3 + s2 / 2) * h * d_[k] + (-s4 / 2 + s3) * y_[k + 1] +
                (s4 / 4 - s3 / 3) * h * d_[k + 1]);
  };
  return antiderivative(b) - antiderivative(a);
}

double Pchip::integrate(double a, double b) const {
  if (b < a) return -integrate(b, a);
  double total = 0.0;
  for (std::size_t k = segment(a); k + 1 < x_.size(); ++k) {
    const double lo = std::max(a, x_[k]);
    const double hi = k + 2 == x_.size() ? b : std::min(b, x_[k + 1]);
    total += segment_integral(k, lo, hi);
    if (hi >= b) break;
  }
  return total;
}

double bd_rate(const std::vector<RDPoint>& anchor, const std::vector<RDPoint>& test, BdInterpolation method) {
  const Curve ca = prepare(anchor, "anchor");
  const Curve ct = prepare(test, "test");
  const double lo = std::max(ca.q.front(), ct.q.front());
  const double hi = std::min(ca.q.back(), ct.q.back());
  if (!(hi > lo)) throw EvaluationError(kModule, "anchor and test curves have no overlapping quality range");

  double ia, it;
  if (method == BdInterpolation::kPchip) {
    ia = Pchip(ca.q, ca.log_rate).integrate(lo, hi);
    it = Pchip(ct.q, ct.log_rate).integrate(lo, hi);
  } else {
    ia = cubic_fit_integral(ca, lo, hi);
    it = cubic_fit_integral(ct, lo, hi);
  }
  return std::expm1((it - ia) / (hi - lo)) * 100.0;
}

double MetricAdapter::evaluate(const Video& reference, const Video& distorted) const {
  if (id == "psnr") return psnr(reference.frames, distorted.frames);
  if (command_template.empty()) throw AdapterError(kModule, id + " adapter has no command configured");
  ScratchDir scratch("mttf-metric");
  const std::string ref_path = scratch.file("reference.rgb");
  const std::string dist_path = scratch.file("distorted.rgb");
  write_raw_video(ref_path, reference);
  write_raw_video(dist_path, distorted);
  const std::string command =
      expand_template(command_template, {{"reference", shell_quote(ref_path)}, {"distorted", shell_quote(dist_path)}});
  const CommandResult result = run_command(command);
  if (result.exit_code != 0) {
    throw AdapterError(kModule, id + " adapter exited with status " + std::to_string(result.exit_code),
                       "command: " + command + "\n" + result.output);
  }
  static const std::regex number(R"([-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?)");
  std::optional<double> last;
  for (auto it = std::sregex_iterator(result.output.begin(), result.output.end(), number);
       it != std::sregex_iterator(); ++it) {
    last = std::stod(it->str());
  }
  if (!last) throw AdapterError(kModule, id + " adapter printed no score", result.output);
  return *last;
}

double MetricAdapter::display(double raw) const {
  if (id == "dists" || id == "lpips") return 1.0 - raw;
  if (id == "fvd") return 5000.0 - raw;
  return raw;
}

MetricAdapter make_metric(const std::string& id, const std::string& command_template) {
  MetricAdapter m;
  m.id = id;
  m.command_template = command_template;
  if (id == "psnr") {
    m.axis_label = "PSNR (dB)";
  } else if (id == "dists") {
    m.higher_is_better = false;
    m.axis_label = "1-DISTS";
  } else if (id == "lpips") {
    m.higher_is_better = false;
    m.axis_label = "1-LPIPS";
  } else if (id == "fvd") {
    m.higher_is_better = false;
    m.axis_label = "5000-FVD";
  } else {
    throw ConfigError(kModule, "unknown metric '" + id + "' (expected psnr, dists, lpips or fvd)");
  }
  return m;
}

}  // namespace mttf
