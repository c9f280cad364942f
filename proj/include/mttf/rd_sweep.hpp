#pragma once

// Rate-distortion sweeps over (sequence, qp, delta) operating points.
//
// CSV schema (one row per operating point per metric):
//   sequence,qp,delta,frames,fps,header_bytes,keyframe_bytes,feature_bytes,
//   total_bytes,kbps,metric,value,display_value,status
// status is "ok" or "missing"; value and display_value are empty when missing.

#include <optional>
#include <string>
#include <vector>

#include "mttf/keyframe_codec.hpp"
#include "mttf/metrics.hpp"
#include "mttf/model.hpp"
#include "mttf/pipeline.hpp"

namespace mttf {

struct SweepSequence {
  std::string name;
  Video video;
};

struct SweepOptions {
  std::vector<int> qps;
  std::vector<double> deltas;
  int resolution_index = 0;
  std::vector<MetricAdapter> metrics;
};

struct SweepRow {
  std::string sequence;
  int qp = 0;
  double delta = 0.0;
  StreamStats stats;
  std::string metric;
  std::optional<double> value;
  std::optional<double> display_value;
};

// Throws ConfigError on an empty sequence list, fewer than two operating
// points or no metrics. An unavailable or failing metric marks the row
// missing and the sweep continues.
std::vector<SweepRow> rd_sweep(MttfModel& model, KeyframeCodec& codec, const std::vector<SweepSequence>& sequences,
                               const SweepOptions& options);

std::string sweep_csv(const std::vector<SweepRow>& rows);

struct PlotSeries {
  std::string name;
  std::vector<RDPoint> points;
};

// Static SVG of quality over rate (kbps).
std::string render_rd_svg(const std::vector<PlotSeries>& series, const std::string& y_label,
                          const std::string& title);

// One series per (sequence, delta) from the rows of one metric.
std::vector<PlotSeries> plot_series(const std::vector<SweepRow>& rows, const std::string& metric);

// Writes "<dir>/rd.csv" and "<dir>/rd_<metric>.svg" atomically.
void write_sweep_outputs(const std::string& directory, const std::vector<SweepRow>& rows,
                         const std::vector<MetricAdapter>& metrics);

// Reads RD points from a CSV with columns rate_kbps,quality, or from a sweep
// CSV (kbps, display_value) filtered by metric and optionally sequence.
std::vector<RDPoint> read_rd_points(const std::string& path, const std::string& metric = {},
                                    const std::string& sequence = {});

}  // namespace mttf
