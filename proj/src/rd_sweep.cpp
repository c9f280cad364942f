#include "mttf/rd_sweep.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "mttf/errors.hpp"
#include "mttf/files.hpp"

namespace mttf {

namespace {

constexpr const char* kModule = "rd_sweep";

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// 1, 2 or 5 times a power of ten, giving about five ticks over the span.
double nice_step(double span) {
  const double raw = span / 5.0;
  const double base = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0}) {
    if (m * base >= raw) return m * base;
  }
  return 10.0 * base;
}

}  // namespace

std::vector<SweepRow> rd_sweep(MttfModel& model, KeyframeCodec& codec, const std::vector<SweepSequence>& sequences,
                               const SweepOptions& options) {
  if (sequences.empty()) throw ConfigError(kModule, "sequence list is empty");
  if (options.qps.empty() || options.deltas.empty() || options.qps.size() * options.deltas.size() < 2) {
    throw ConfigError(kModule, "a sweep needs at least two operating points");
  }
  if (options.metrics.empty()) throw ConfigError(kModule, "no metrics selected");

  std::vector<SweepRow> rows;
  for (const auto& seq : sequences) {
    for (double delta : options.deltas) {
      for (int qp : options.qps) {
        EncodeOptions enc;
        enc.qp = qp;
        enc.delta = delta;
        enc.resolution_index = options.resolution_index;
        const auto encoded = encode_sequence(model, seq.video, codec, enc);
        const auto decoded = decode_sequence(model, encoded.stream, codec);
        for (const auto& metric : options.metrics) {
          SweepRow row;
          row.sequence = seq.name;
          row.qp = qp;
          row.delta = delta;
          row.stats = encoded.stats;
          row.metric = metric.id;
          if (metric.available()) {
            try {
              row.value = metric.evaluate(seq.video, decoded.video);
              row.display_value = metric.display(*row.value);
            } catch (const AdapterError&) {
              row.value.reset();
              row.display_value.reset();
            }
          }
          rows.push_back(std::move(row));
        }
      }
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "sequence,qp,delta,frames,fps,header_bytes,keyframe_bytes,feature_bytes,total_bytes,kbps,metric,value,"
         "display_value,status\n";
  for (const auto& r : rows) {
    out << r.sequence << ',' << r.qp << ',' << fmt(r.delta) << ',' << r.stats.frames << ',' << fmt(r.stats.fps)
        << ',' << r.stats.header_bytes << ',' << r.stats.keyframe_bytes << ',' << r.stats.feature_bytes << ','
        << r.stats.total_bytes << ',' << fmt(r.stats.total_kbps()) << ',' << r.metric << ','
        << (r.value ? fmt(*r.value) : "") << ',' << (r.display_value ? fmt(*r.display_value) : "") << ','
        << (r.value ? "ok" : "missing") << '\n';
  }
  return out.str();
}

std::vector<PlotSeries> plot_series(const std::vector<SweepRow>& rows, const std::string& metric) {
  std::map<std::string, PlotSeries> by_name;
  for (const auto& r : rows) {
    if (r.metric != metric || !r.display_value || !std::isfinite(*r.display_value)) continue;
    const std::string name = r.sequence + " delta=" + fmt(r.delta);
    auto& s = by_name[name];
    s.name = name;
    s.points.push_back({r.stats.total_kbps(), *r.display_value});
  }
  std::vector<PlotSeries> out;
  for (auto& [_, s] : by_name) {
    std::sort(s.points.begin(), s.points.end(),
              [](const RDPoint& a, const RDPoint& b) { return a.rate_kbps < b.rate_kbps; });
    out.push_back(std::move(s));
  }
  return out;
}

std::string render_rd_svg(const std::vector<PlotSeries>& series, const std::string& y_label,
                          const std::string& title) {
  constexpr double kWidth = 640, kHeight = 480, kLeft = 80, kRight = 180, kTop = 40, kBottom = 60;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      x0 = std::min(x0, p.rate_kbps);
      x1 = std::max(x1, p.rate_kbps);
      y0 = std::min(y0, p.quality);
      y1 = std::max(y1, p.quality);
    }
  }
  if (!std::isfinite(x0)) {
    x0 = 0;
    x1 = 1;
    y0 = 0;
    y1 = 1;
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad_x = 0.05 * (x1 - x0), pad_y = 0.05 * (y1 - y0);
  x0 -= pad_x;
  x1 += pad_x;
  y0 -= pad_y;
  y1 += pad_y;

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << xml_escape(title) << "</text>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  const double sx = nice_step(x1 - x0), sy = nice_step(y1 - y0);
  for (double t = std::ceil(x0 / sx) * sx; t <= x1; t += sx) {
    svg << "<line x1=\"" << px(t) << "\" y1=\"" << kTop + ph << "\" x2=\"" << px(t) << "\" y2=\"" << kTop + ph + 5
        << "\" stroke=\"black\"/><text x=\"" << px(t) << "\" y=\"" << kTop + ph + 18
        << "\" text-anchor=\"middle\">" << fmt(t) << "</text>\n";
  }
  for (double t = std::ceil(y0 / sy) * sy; t <= y1; t += sy) {
    svg << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << py(t) << "\" x2=\"" << kLeft << "\" y2=\"" << py(t)
        << "\" stroke=\"black\"/><text x=\"" << kLeft - 8 << "\" y=\"" << py(t) + 4 << "\" text-anchor=\"end\">"
        << fmt(t) << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 15
      << "\" text-anchor=\"middle\">Rate (kbps)</text>\n";
  svg << "<text transform=\"translate(20," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << xml_escape(y_label) << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % std::size(kColors)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : series[i].points) svg << px(p.rate_kbps) << ',' << py(p.quality) << ' ';
    svg << "\"/>\n";
    for (const auto& p : series[i].points) {
      svg << "<circle cx=\"" << px(p.rate_kbps) << "\" cy=\"" << py(p.quality) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    }
    const double ly = kTop + 10 + 18.0 * static_cast<double>(i);
    svg << "<line x1=\"" << kLeft + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + pw + 30 << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/><text x=\"" << kLeft + pw + 35 << "\" y=\"" << ly + 4
        << "\">" << xml_escape(series[i].name) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_sweep_outputs(const std::string& directory, const std::vector<SweepRow>& rows,
                         const std::vector<MetricAdapter>& metrics) {
  if (rows.empty()) throw ConfigError(kModule, "no sweep rows to write");
  std::filesystem::create_directories(directory);
  const std::filesystem::path dir(directory);
  write_text_atomic((dir / "rd.csv").string(), sweep_csv(rows));
  for (const auto& m : metrics) {
    write_text_atomic((dir / ("rd_" + m.id + ".svg")).string(),
                      render_rd_svg(plot_series(rows, m.id), m.axis_label, "Rate-" + m.axis_label));
  }
}

std::vector<RDPoint> read_rd_points(const std::string& path, const std::string& metric, const std::string& sequence) {
  std::ifstream in(path);
  if (!in) throw InputError(kModule, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(kModule, path + " is empty");
  const auto header = split_csv_line(line);
  auto column = [&](const std::string& name) -> int {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  int rate_col = column("rate_kbps"), quality_col = column("quality");
  const int metric_col = column("metric"), sequence_col = column("sequence"), status_col = column("status");
  if (rate_col < 0 || quality_col < 0) {
    rate_col = column("kbps");
    quality_col = column("display_value");
  }
  if (rate_col < 0 || quality_col < 0) {
    throw InputError(kModule, path + " needs rate_kbps,quality or kbps,display_value columns");
  }
  std::vector<RDPoint> points;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    auto cell = [&](int col) { return col >= 0 && col < static_cast<int>(cells.size()) ? cells[col] : std::string(); };
    if (!metric.empty() && metric_col >= 0 && cell(metric_col) != metric) continue;
    if (!sequence.empty() && sequence_col >= 0 && cell(sequence_col) != sequence) continue;
    if (status_col >= 0 && cell(status_col) == "missing") continue;
    try {
      points.push_back({std::stod(cell(rate_col)), std::stod(cell(quality_col))});
    } catch (const std::exception&) {
      throw InputError(kModule, "malformed row in " + path + ": " + line);
    }
  }
  return points;
}

}  // namespace mttf
