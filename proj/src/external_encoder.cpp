#include "vannot/external_encoder.hpp"

#include <sys/wait.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vannot/errors.hpp"
#include "vannot/metrics.hpp"
#include "vannot/y4m.hpp"

namespace vannot {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  out += '\'';
  return out;
}

std::string render_command(const std::string& tpl, const std::map<std::string, std::string>& values,
                           bool include_dqp) {
  std::string out;
  out.reserve(tpl.size() * 2);
  int depth = 0;
  for (std::size_t i = 0; i < tpl.size(); ++i) {
    const char c = tpl[i];
    if (c == '[') {
      ++depth;
      continue;
    }
    if (c == ']' && depth > 0) {
      --depth;
      continue;
    }
    if (depth > 0 && !include_dqp) continue;
    if (c == '{') {
      const std::size_t close = tpl.find('}', i);
      if (close == std::string::npos) throw ArgumentError("adapter template: unclosed '{'");
      const std::string key = tpl.substr(i + 1, close - i - 1);
      const auto it = values.find(key);
      if (it == values.end()) throw ArgumentError("adapter template: unknown placeholder {" + key + "}");
      out += it->second;
      i = close;
      continue;
    }
    out += c;
  }
  if (depth != 0) throw ArgumentError("adapter template: unbalanced '['");
  return out;
}

std::vector<std::uint64_t> parse_stats(const std::string& text) {
  std::vector<std::uint64_t> bits;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string kw_frame, kw_bits, extra;
    long long n = -1;
    long long b = -1;
    if (!(ls >> kw_frame >> n >> kw_bits >> b) || kw_frame != "frame" || kw_bits != "bits" ||
        (ls >> extra) || n < 0 || b < 0) {
      throw AdapterError("adapter stats: malformed line " + std::to_string(lineno), line);
    }
    if (n != static_cast<long long>(bits.size())) {
      throw AdapterError("adapter stats: expected frame " + std::to_string(bits.size()) +
                             " at line " + std::to_string(lineno),
                         line);
    }
    bits.push_back(static_cast<std::uint64_t>(b));
  }
  if (bits.empty()) throw AdapterError("adapter stats: no frames reported", text);
  return bits;
}

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path fresh_work_dir() {
  static std::atomic<unsigned> counter{0};
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  auto dir = std::filesystem::temp_directory_path() /
             ("vannot-adapter-" + std::to_string(stamp) + "-" + std::to_string(counter++));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

EncodeResult external_encode(const std::filesystem::path& input_y4m, const DeltaQpMap& dqp,
                             const EncoderConfig& cfg, const std::optional<ExternalAdapter>& adapter) {
  if (!adapter || adapter->command_template.empty()) {
    throw CapabilityError("no external encoder adapter is configured; use the mock codec");
  }
  validate(cfg);
  const FrameSequence source = load_y4m_file(input_y4m);

  const auto dir = adapter->work_dir.empty() ? fresh_work_dir() : adapter->work_dir;
  std::filesystem::create_directories(dir);
  const auto dqp_path = dir / "dqp.vdqp";
  const auto stats_path = dir / "stats.txt";
  const auto out_path = dir / "out.bin";
  const auto log_path = dir / "adapter.log";
  write_qpmap_file(dqp, dqp_path);
  for (const auto& stale : {stats_path, out_path, std::filesystem::path(out_path.string() + ".y4m")}) {
    std::filesystem::remove(stale);
  }

  const bool include_dqp = !dqp.all_zero();
  const auto kbps = static_cast<long long>(std::llround(cfg.target_bitrate / 1000.0));
  EncodeResult r;
  r.codec = "external";
  r.base_qp = std::nan("");
  r.target_bits = cfg.target_bitrate * source.duration_seconds();

  for (int pass = 1; pass <= 2; ++pass) {
    const std::map<std::string, std::string> values{
        {"input.y4m", shell_quote(input_y4m.string())},
        {"dqp.vdqp", shell_quote(dqp_path.string())},
        {"bitrate", std::to_string(kbps)},
        {"pass", std::to_string(pass)},
        {"statsfile", shell_quote(stats_path.string())},
        {"out", shell_quote(out_path.string())},
    };
    const std::string cmd = render_command(adapter->command_template, values, include_dqp);
    const std::string full = cmd + " > " + shell_quote(log_path.string()) + " 2>&1";
    const int status = std::system(full.c_str());
    if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      throw AdapterError("adapter pass " + std::to_string(pass) + " failed (status " +
                             std::to_string(status) + ")",
                         "command: " + cmd + "\n" + slurp(log_path));
    }
    if (!std::filesystem::exists(stats_path)) {
      throw AdapterError("adapter pass " + std::to_string(pass) + " wrote no stats file",
                         slurp(log_path));
    }
    auto bits = parse_stats(slurp(stats_path));
    if (pass == 1) {
      r.pass1_bits = std::move(bits);
    } else {
      r.per_frame_bits = std::move(bits);
    }
  }

  const auto recon_path = std::filesystem::path(out_path.string() + ".y4m");
  if (!std::filesystem::exists(out_path) || !std::filesystem::exists(recon_path)) {
    throw AdapterError("adapter did not produce both the bitstream and its reconstruction",
                       slurp(log_path));
  }
  try {
    r.reconstruction = load_y4m_file(recon_path);
  } catch (const Error& e) {
    throw AdapterError(std::string("adapter reconstruction unreadable: ") + e.what(), slurp(log_path));
  }
  if (r.per_frame_bits.size() != source.frames.size()) {
    throw AdapterError("adapter reported " + std::to_string(r.per_frame_bits.size()) +
                           " frames for a " + std::to_string(source.frames.size()) + "-frame input",
                       slurp(stats_path));
  }
  r.bitstream_path = out_path;
  r.psnr_overall = psnr(source, r.reconstruction);
  r.rate_converged = true;
  return r;
}

}  // namespace vannot
