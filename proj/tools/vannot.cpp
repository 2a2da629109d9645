#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>

#include "vannot/calibrate.hpp"
#include "vannot/errors.hpp"
#include "vannot/external_encoder.hpp"
#include "vannot/metrics.hpp"
#include "vannot/mock_codec.hpp"
#include "vannot/qp_map.hpp"
#include "vannot/service/http.hpp"
#include "vannot/service/service.hpp"
#include "vannot/vimp.hpp"
#include "vannot/y4m.hpp"

using namespace vannot;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json real(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

service::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

struct CodecOptions {
  std::string codec = "mock";
  std::string adapter;
  std::string adapter_dir;

  void add(CLI::App* app) {
    app->add_option("--codec", codec, "mock or external")
        ->check(CLI::IsMember({"mock", "external"}))
        ->capture_default_str();
    app->add_option("--adapter", adapter,
                    "external encoder command template ({input.y4m} {dqp.vdqp} {bitrate} "
                    "{pass} {statsfile} {out})");
    app->add_option("--adapter-dir", adapter_dir, "working directory for adapter runs");
  }

  std::optional<ExternalAdapter> external() const {
    if (adapter.empty()) return std::nullopt;
    return ExternalAdapter{adapter, adapter_dir};
  }
};

EncodeResult run_encode(const CodecOptions& co, const fs::path& y4m, const FrameSequence& seq,
                        const DeltaQpMap& dqp, double bitrate) {
  EncoderConfig cfg;
  cfg.target_bitrate = bitrate;
  if (co.codec == "external") return external_encode(y4m, dqp, cfg, co.external());
  return MockCodec(seq).encode_two_pass(&dqp, cfg);
}

Calibration calibrate(const CodecOptions& co, const fs::path& y4m, const FrameSequence& seq,
                      double target, double lo, double hi, double tolerance) {
  if (co.codec == "mock") return calibrate_mock_bitrate(MockCodec(seq), target, {}, tolerance);
  const auto zero = DeltaQpMap::zero(seq.mb_cols(), seq.mb_rows(), static_cast<int>(seq.frames.size()));
  return calibrate_bitrate(
      [&](double bitrate) {
        const EncodeResult r = run_encode(co, y4m, seq, zero, bitrate);
        return psnr(seq, r.reconstruction);
      },
      target, lo, hi, tolerance);
}

json calibration_json(const Calibration& c, double target) {
  return {{"bitrate", c.bitrate},
          {"psnr", real(c.psnr)},
          {"target_psnr", target},
          {"iterations", c.iterations},
          {"converged", c.converged}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perceptual video-compression annotation tool"};
  app.require_subcommand(1);
  std::string data_dir = "data";
  app.add_option("--data-dir", data_dir, "service data directory")->capture_default_str();

  // serve
  auto* serve = app.add_subcommand("serve", "run the HTTP annotation service");
  std::string host = "127.0.0.1";
  int port = 8080;
  int min_seconds = service::kDefaultMinSeconds;
  int horizon = kDefaultHorizon;
  CodecOptions serve_codec;
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->check(CLI::Range(0, 65535))->capture_default_str();
  serve->add_option("--min-seconds", min_seconds, "minimum annotation time per session")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  serve->add_option("--horizon", horizon, "propagation horizon in frames")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  serve_codec.add(serve);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "add a Y4M video to the store");
  std::string ingest_y4m, ingest_id;
  double ingest_bitrate = 0, ingest_psnr = 0;
  CodecOptions ingest_codec;
  ingest->add_option("--y4m", ingest_y4m)->required()->check(CLI::ExistingFile);
  ingest->add_option("--id", ingest_id)->required();
  auto* br = ingest->add_option("--bitrate", ingest_bitrate, "bits per second")->check(CLI::PositiveNumber);
  auto* tp = ingest->add_option("--target-psnr", ingest_psnr, "calibrate the bitrate to this PSNR (dB)");
  br->excludes(tp);
  ingest_codec.add(ingest);

  // flow
  auto* flow = app.add_subcommand("flow", "precompute, import or export optical flow");
  std::string flow_id, flow_import, flow_export;
  FlowParams flow_params;
  flow->add_option("--id", flow_id)->required();
  flow->add_option("--step", flow_params.step, "search stride")->check(CLI::PositiveNumber)->capture_default_str();
  flow->add_option("--block", flow_params.block)->check(CLI::PositiveNumber)->capture_default_str();
  flow->add_option("--range", flow_params.search_range)->check(CLI::NonNegativeNumber)->capture_default_str();
  auto* fi = flow->add_option("--import", flow_import, "VFLO file to store instead of estimating")
                 ->check(CLI::ExistingFile);
  auto* fe = flow->add_option("--export", flow_export, "write the stored flow as one VFLO file");
  fi->excludes(fe);

  // encode
  auto* encode = app.add_subcommand("encode", "encode a stored video with an importance map");
  std::string enc_id, enc_map, enc_out, enc_recon;
  double enc_range = kMaxDeltaQp;
  double enc_bitrate = 0;
  CodecOptions enc_codec;
  encode->add_option("--id", enc_id)->required();
  encode->add_option("--map", enc_map, "VIMP importance map (omit for a map-free encode)")
      ->check(CLI::ExistingFile);
  encode->add_option("--out", enc_out, "bitstream output")->required();
  encode->add_option("--recon", enc_recon, "reconstruction output (Y4M)");
  encode->add_option("--range", enc_range, "delta-QP range")->check(CLI::PositiveNumber)->capture_default_str();
  encode->add_option("--bitrate", enc_bitrate, "override the stored bitrate")->check(CLI::PositiveNumber);
  enc_codec.add(encode);

  // metrics
  auto* metrics = app.add_subcommand("metrics", "PSNR overall and inside/outside the important region");
  std::string m_ref, m_rec, m_map;
  int m_threshold = kDefaultRegionThreshold;
  metrics->add_option("--ref", m_ref)->required()->check(CLI::ExistingFile);
  metrics->add_option("--rec", m_rec)->required()->check(CLI::ExistingFile);
  metrics->add_option("--map", m_map, "VIMP importance map")->check(CLI::ExistingFile);
  metrics->add_option("--threshold", m_threshold)->check(CLI::Range(0, 255))->capture_default_str();

  // average
  auto* average = app.add_subcommand("average", "per-pixel mean of several importance maps");
  std::vector<std::string> avg_maps;
  std::string avg_out;
  average->add_option("--maps", avg_maps)->required()->check(CLI::ExistingFile);
  average->add_option("--out", avg_out)->required();

  // calibrate-bitrate
  auto* calib = app.add_subcommand("calibrate-bitrate", "find the bitrate reaching a target PSNR");
  std::string cal_id;
  double cal_psnr = 25.0, cal_tol = 0.1, cal_lo = 1e4, cal_hi = 5e7;
  bool cal_apply = false;
  CodecOptions cal_codec;
  calib->add_option("--id", cal_id)->required();
  calib->add_option("--psnr", cal_psnr)->capture_default_str();
  calib->add_option("--tolerance", cal_tol, "dB")->check(CLI::PositiveNumber)->capture_default_str();
  calib->add_option("--min-bitrate", cal_lo, "search bound for external encoders")->capture_default_str();
  calib->add_option("--max-bitrate", cal_hi, "search bound for external encoders")->capture_default_str();
  calib->add_flag("--apply", cal_apply, "store the result as the video's bitrate");
  cal_codec.add(calib);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) {
      service::ServiceConfig cfg;
      cfg.data_dir = data_dir;
      cfg.codec = serve_codec.codec;
      cfg.adapter = serve_codec.external();
      cfg.min_seconds = min_seconds;
      cfg.decay.horizon = horizon;
      service::Service svc(cfg);
      service::HttpServer server(svc);
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on http://" << host << ":" << bound << "\n";
      server.listen();
      g_server = nullptr;
      return 0;
    }

    service::VideoStore store(fs::path(data_dir) / "videos");

    if (*ingest) {
      const FrameSequence seq = load_y4m_file(ingest_y4m);
      double bitrate = ingest_bitrate;
      json out;
      if (*tp) {
        const Calibration c = calibrate(ingest_codec, ingest_y4m, seq, ingest_psnr, cal_lo, cal_hi, cal_tol);
        if (!c.converged) std::cerr << "warning: calibration did not reach the target PSNR\n";
        out["calibration"] = calibration_json(c, ingest_psnr);
        bitrate = c.bitrate;
      } else if (!*br) {
        throw ArgumentError("one of --bitrate or --target-psnr is required");
      }
      const auto info = store.ingest(ingest_id, seq, bitrate);
      out["id"] = info.id;
      out["width"] = info.width;
      out["height"] = info.height;
      out["frames"] = info.frames;
      out["bitrate"] = info.bitrate;
      std::cout << out.dump(2) << "\n";
    } else if (*flow) {
      const auto info = store.info(flow_id);
      if (!flow_import.empty()) {
        std::ifstream in(flow_import, std::ios::binary);
        if (!in) throw IoError("cannot open " + flow_import);
        const int n = store.import_flow(flow_id, in);
        std::cout << json{{"id", flow_id}, {"imported", n}}.dump(2) << "\n";
      } else if (!flow_export.empty()) {
        auto fields = store.flows(flow_id);
        std::vector<FlowField> all;
        for (int t = 0; t + 1 < info.frames; ++t) {
          auto f = fields->get(t);
          if (!f) throw PreconditionError("flow field " + std::to_string(t) + " is missing");
          all.push_back(*f);
        }
        std::ofstream out(flow_export, std::ios::binary);
        export_flow(all, out);
        if (!out) throw IoError("cannot write " + flow_export);
        std::cout << json{{"id", flow_id}, {"exported", all.size()}}.dump(2) << "\n";
      } else {
        const int before = store.flows(flow_id)->writes();
        const int present = store.precompute_flow(flow_id, flow_params);
        const int computed = store.flows(flow_id)->writes() - before;
        std::cout << json{{"id", flow_id}, {"computed", computed}, {"fields", present}}.dump(2) << "\n";
      }
    } else if (*encode) {
      const auto info = store.info(enc_id);
      const auto seq = store.sequence(enc_id);
      DeltaQpMap dqp = DeltaQpMap::zero(seq->mb_cols(), seq->mb_rows(), info.frames);
      if (!enc_map.empty()) {
        const ImportanceVolume vol = read_vimp_file(enc_map);
        if (vol.width != info.width || vol.height != info.height || vol.frame_count() != info.frames) {
          throw ArgumentError("map shape does not match video '" + enc_id + "'");
        }
        dqp = importance_to_delta_qp(vol, enc_range);
      }
      const double bitrate = enc_bitrate > 0 ? enc_bitrate : info.bitrate;
      const EncodeResult r = run_encode(enc_codec, store.source_path(enc_id), *seq, dqp, bitrate);
      if (r.codec == "mock") {
        std::ofstream(enc_out, std::ios::binary) << r.bitstream;
      } else {
        fs::copy_file(r.bitstream_path, enc_out, fs::copy_options::overwrite_existing);
      }
      if (!enc_recon.empty()) write_y4m_file(r.reconstruction, enc_recon);
      std::cout << json{{"codec", r.codec},
                        {"target_bits", r.target_bits},
                        {"total_bits", r.total_bits()},
                        {"base_qp", real(r.base_qp)},
                        {"rate_converged", r.rate_converged},
                        {"psnr", real(r.psnr_overall)}}
                       .dump(2)
                << "\n";
    } else if (*metrics) {
      const FrameSequence ref = load_y4m_file(m_ref);
      const FrameSequence rec = load_y4m_file(m_rec);
      json out = {{"psnr", real(psnr(ref, rec))}};
      if (!m_map.empty()) {
        const ImportanceVolume vol = read_vimp_file(m_map);
        try {
          const auto rm = region_metrics(ref, rec, vol, static_cast<std::uint8_t>(m_threshold));
          out["psnr_in"] = real(rm.psnr_in);
          out["psnr_out"] = real(rm.psnr_out);
          out["weighted_psnr"] = real(rm.weighted_psnr);
          out["pixels_in"] = rm.pixels_in;
          out["pixels_out"] = rm.pixels_out;
        } catch (const DegenerateRegionError& e) {
          out["region_error"] = e.what();
        }
      }
      std::cout << out.dump(2) << "\n";
    } else if (*average) {
      std::vector<ImportanceVolume> vols;
      for (const auto& p : avg_maps) vols.push_back(read_vimp_file(p));
      write_vimp_file(average_volumes(vols), avg_out);
      std::cout << json{{"maps", vols.size()}, {"out", avg_out}}.dump(2) << "\n";
    } else if (*calib) {
      const auto seq = store.sequence(cal_id);
      const Calibration c =
          calibrate(cal_codec, store.source_path(cal_id), *seq, cal_psnr, cal_lo, cal_hi, cal_tol);
      const bool apply = cal_apply && c.converged;
      if (apply) store.set_bitrate(cal_id, c.bitrate);
      json out = calibration_json(c, cal_psnr);
      out["id"] = cal_id;
      out["applied"] = apply;
      std::cout << out.dump(2) << "\n";
      return c.converged ? 0 : 3;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (const auto* a = dynamic_cast<const AdapterError*>(&e)) std::cerr << a->diagnostics() << "\n";
    return 2;
  }
  return 0;
}
