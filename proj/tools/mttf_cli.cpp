// mttf: command-line front end for encoding, decoding, training and
// rate-distortion evaluation.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "mttf/errors.hpp"
#include "mttf/files.hpp"
#include "mttf/keyframe_codec.hpp"
#include "mttf/metrics.hpp"
#include "mttf/model.hpp"
#include "mttf/pipeline.hpp"
#include "mttf/rd_sweep.hpp"
#include "mttf/synthetic.hpp"
#include "mttf/training.hpp"
#include "mttf/video_io.hpp"

namespace {

struct KeyframeOptions {
  std::string codec = "lossless";
  std::string encode_cmd;
  std::string decode_cmd;

  void add_to(CLI::App* app) {
    app->add_option("--keyframe-codec", codec, "Key-frame codec: lossless or external")
        ->check(CLI::IsMember({"lossless", "external"}));
    app->add_option("--kf-encode-cmd", encode_cmd,
                    "External key-frame encoder template ({input} PPM, {output}, {qp}, {width}, {height})");
    app->add_option("--kf-decode-cmd", decode_cmd, "External key-frame decoder template ({input}, {output} PPM)");
  }

  std::unique_ptr<mttf::KeyframeCodec> make() const {
    if (codec == "external") return std::make_unique<mttf::CommandKeyframeCodec>(encode_cmd, decode_cmd);
    return std::make_unique<mttf::LosslessKeyframeCodec>();
  }
};

struct MetricOptions {
  std::vector<std::string> ids{"psnr"};
  std::string dists_cmd, lpips_cmd, fvd_cmd;

  void add_to(CLI::App* app) {
    app->add_option("--metric", ids, "Metrics: psnr, dists, lpips, fvd")
        ->check(CLI::IsMember({"psnr", "dists", "lpips", "fvd"}));
    app->add_option("--dists-cmd", dists_cmd, "DISTS adapter template ({reference}, {distorted} raw videos)");
    app->add_option("--lpips-cmd", lpips_cmd, "LPIPS adapter template");
    app->add_option("--fvd-cmd", fvd_cmd, "FVD adapter template");
  }

  std::vector<mttf::MetricAdapter> make() const {
    std::vector<mttf::MetricAdapter> out;
    for (const auto& id : ids) {
      const std::string& cmd = id == "dists" ? dists_cmd : id == "lpips" ? lpips_cmd : id == "fvd" ? fvd_cmd : "";
      out.push_back(mttf::make_metric(id, cmd));
    }
    return out;
  }
};

std::string format_value(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

mttf::ModelConfig load_model_config(const std::string& path) {
  if (path.empty()) return mttf::ModelConfig{};
  return mttf::ModelConfig::from_key_values(mttf::KeyValueMap::load_file(path));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generative human video codec with factorized motion trajectories"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for weight initialization and sampling")->capture_default_str();

  // init
  auto* init = app.add_subcommand("init", "Write a randomly initialized checkpoint");
  std::string init_config, init_out;
  init->add_option("--config", init_config, "Model configuration (key=value)");
  init->add_option("-o,--output", init_out, "Checkpoint path")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic moving-disc clip as raw video");
  mttf::DiscClipOptions disc;
  std::string synth_out;
  synth->add_option("-o,--output", synth_out, "Raw video path (a .json sidecar is written next to it)")->required();
  synth->add_option("--frames", disc.frames)->capture_default_str();
  synth->add_option("--size", disc.size)->capture_default_str();
  synth->add_option("--speed", disc.speed, "Disc speed in frame widths per frame")->capture_default_str();

  // encode
  auto* encode = app.add_subcommand("encode", "Encode a video into an .mttf stream");
  std::string enc_in, enc_out, enc_ckpt, enc_stats;
  mttf::EncodeOptions enc_opts;
  KeyframeOptions enc_kf;
  encode->add_option("-i,--input", enc_in, "Raw video (with sidecar) or .y4m")->required();
  encode->add_option("-o,--output", enc_out, ".mttf stream")->required();
  encode->add_option("--checkpoint", enc_ckpt)->required();
  encode->add_option("--qp", enc_opts.qp, "Key-frame QP")->capture_default_str();
  encode->add_option("--delta", enc_opts.delta, "Quantization step of the motion vectors")->capture_default_str();
  encode->add_option("--resolution-index", enc_opts.resolution_index)->capture_default_str();
  encode->add_option("--stats", enc_stats, "Write stats JSON here");
  enc_kf.add_to(encode);

  // decode
  auto* decode = app.add_subcommand("decode", "Decode an .mttf stream into raw video");
  std::string dec_in, dec_out, dec_ckpt, dec_stats;
  KeyframeOptions dec_kf;
  decode->add_option("-i,--input", dec_in, ".mttf stream")->required();
  decode->add_option("-o,--output", dec_out, "Raw video path")->required();
  decode->add_option("--checkpoint", dec_ckpt)->required();
  decode->add_option("--stats", dec_stats, "Write stats JSON here");
  dec_kf.add_to(decode);

  // train
  auto* train = app.add_subcommand("train", "Train a model on raw video clips");
  std::string train_config, train_init, train_dir, train_log;
  std::vector<std::string> train_data;
  train->add_option("--config", train_config, "Model and training configuration (key=value)")->required();
  train->add_option("--data", train_data, "Training clips at the model's largest resolution")->required();
  train->add_option("--checkpoint", train_init, "Start from this checkpoint");
  train->add_option("--out-dir", train_dir, "Directory for checkpoints")->required();
  train->add_option("--log", train_log, "CSV loss log (default <out-dir>/train_log.csv)");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Compare two videos");
  std::string met_ref, met_dist;
  MetricOptions met_opts;
  metrics->add_option("--reference", met_ref)->required();
  metrics->add_option("--distorted", met_dist)->required();
  met_opts.add_to(metrics);

  // bdrate
  auto* bdrate = app.add_subcommand("bdrate", "BD-rate of a test RD curve against an anchor");
  std::string bd_anchor, bd_test, bd_metric, bd_anchor_seq, bd_test_seq;
  bool bd_cubic = false;
  bdrate->add_option("--anchor", bd_anchor, "CSV with rate_kbps,quality (or a sweep CSV)")->required();
  bdrate->add_option("--test", bd_test, "CSV with rate_kbps,quality (or a sweep CSV)")->required();
  bdrate->add_option("--metric", bd_metric, "Metric filter for sweep CSVs");
  bdrate->add_option("--anchor-sequence", bd_anchor_seq, "Sequence filter for the anchor sweep CSV");
  bdrate->add_option("--test-sequence", bd_test_seq, "Sequence filter for the test sweep CSV");
  bdrate->add_flag("--cubic", bd_cubic, "Least-squares cubic fit instead of PCHIP");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Rate-distortion sweep over QPs and quantization steps");
  std::string sw_ckpt, sw_dir;
  std::vector<std::string> sw_inputs;
  mttf::SweepOptions sw_opts;
  MetricOptions sw_metrics;
  KeyframeOptions sw_kf;
  sweep->add_option("--checkpoint", sw_ckpt)->required();
  sweep->add_option("-i,--input", sw_inputs, "Sequences (raw with sidecar or .y4m)")->required();
  sweep->add_option("--qp", sw_opts.qps, "Key-frame QPs")->delimiter(',')->required();
  sweep->add_option("--delta", sw_opts.deltas, "Quantization steps")->delimiter(',');
  sweep->add_option("--resolution-index", sw_opts.resolution_index)->capture_default_str();
  sweep->add_option("--out-dir", sw_dir, "Directory for rd.csv and rd_<metric>.svg")->required();
  sw_metrics.add_to(sweep);
  sw_kf.add_to(sweep);

  CLI11_PARSE(app, argc, argv);
  torch::manual_seed(seed);

  try {
    if (*init) {
      mttf::MttfModel model(load_model_config(init_config));
      mttf::save_checkpoint(model, init_out);
      std::cout << "wrote " << init_out << '\n';
    } else if (*synth) {
      disc.seed = seed;
      mttf::Video video;
      video.frames = mttf::moving_disc_clip(disc);
      mttf::write_raw_video(synth_out, video);
      std::cout << "wrote " << synth_out << " and " << mttf::sidecar_path(synth_out) << '\n';
    } else if (*encode) {
      auto model = mttf::load_checkpoint(enc_ckpt);
      auto codec = enc_kf.make();
      const auto video = mttf::read_video(enc_in);
      const auto encoded = mttf::encode_sequence(model, video, *codec, enc_opts);
      mttf::write_bytes_atomic(enc_out, encoded.stream);
      const std::string json = encoded.stats.to_json();
      if (!enc_stats.empty()) mttf::write_text_atomic(enc_stats, json + "\n");
      std::cout << json << '\n';
    } else if (*decode) {
      auto model = mttf::load_checkpoint(dec_ckpt);
      auto codec = dec_kf.make();
      const auto stream = mttf::read_bytes(dec_in);
      const auto decoded = mttf::decode_sequence(model, stream, *codec);
      mttf::write_raw_video(dec_out, decoded.video);
      const std::string json = decoded.stats.to_json();
      if (!dec_stats.empty()) mttf::write_text_atomic(dec_stats, json + "\n");
      std::cout << json << '\n';
    } else if (*train) {
      const auto kv = mttf::KeyValueMap::load_file(train_config);
      auto tcfg = mttf::TrainConfig::from_key_values(kv);
      if (!kv.contains("seed")) tcfg.seed = seed;
      mttf::MttfModel model = train_init.empty() ? mttf::MttfModel(mttf::ModelConfig::from_key_values(kv))
                                                 : mttf::load_checkpoint(train_init);
      std::vector<mttf::Clip> clips;
      for (const auto& path : train_data) clips.push_back(mttf::read_video(path).frames);
      std::filesystem::create_directories(train_dir);
      const std::string log_path = train_log.empty() ? (std::filesystem::path(train_dir) / "train_log.csv").string()
                                                     : train_log;
      std::ofstream log(log_path);
      if (!log) throw mttf::InputError("cli", "cannot write " + log_path);
      mttf::Trainer trainer(model, tcfg, mttf::make_feature_backend(tcfg), mttf::make_matting(tcfg));
      const auto rows = trainer.train(clips, &log, train_dir);
      std::cout << "trained " << rows.size() << " steps; final total loss " << format_value(rows.back().total)
                << "; checkpoints in " << train_dir << '\n';
    } else if (*metrics) {
      const auto ref = mttf::read_video(met_ref);
      const auto dist = mttf::read_video(met_dist);
      for (const auto& m : met_opts.make()) {
        const double raw = m.evaluate(ref, dist);
        std::cout << m.id << ' ' << format_value(raw) << ' ' << m.axis_label << ' ' << format_value(m.display(raw))
                  << '\n';
      }
    } else if (*bdrate) {
      const auto anchor = mttf::read_rd_points(bd_anchor, bd_metric, bd_anchor_seq);
      const auto test = mttf::read_rd_points(bd_test, bd_metric, bd_test_seq);
      const double pct =
          mttf::bd_rate(anchor, test, bd_cubic ? mttf::BdInterpolation::kCubicFit : mttf::BdInterpolation::kPchip);
      std::cout << "BD-rate " << format_value(pct) << " %\n";
    } else if (*sweep) {
      if (sw_opts.deltas.empty()) sw_opts.deltas = {1.0 / 50.0};
      if (sw_inputs.empty()) throw mttf::ConfigError("cli", "sequence list is empty");
      sw_opts.metrics = sw_metrics.make();
      auto model = mttf::load_checkpoint(sw_ckpt);
      auto codec = sw_kf.make();
      std::vector<mttf::SweepSequence> sequences;
      for (const auto& path : sw_inputs) {
        sequences.push_back({std::filesystem::path(path).stem().string(), mttf::read_video(path)});
      }
      const auto rows = mttf::rd_sweep(model, *codec, sequences, sw_opts);
      mttf::write_sweep_outputs(sw_dir, rows, sw_opts.metrics);
      std::cout << mttf::sweep_csv(rows);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
