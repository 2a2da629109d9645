#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vannot/codec.hpp"
#include "vannot/qp_map.hpp"

namespace vannot {

// Command-line contract for a real encoder that accepts per-macroblock quant
// offsets and runs in two-pass bitrate mode. The template is run once per pass
// through /bin/sh with these placeholders substituted (shell-quoted):
//
//   {input.y4m}  source video       {dqp.vdqp}  delta-QP map (VDQP)
//   {bitrate}    target in kbit/s   {pass}      1 or 2
//   {statsfile}  two-pass stats     {out}       bitstream output path
//
// Text inside [...] is emitted only when the delta-QP map is non-zero, so an
// all-zero map yields a plain two-pass command line, e.g.
//   "x264 --pass {pass} --bitrate {bitrate} [--dqp-file {dqp.vdqp}] -o {out} {input.y4m}"
//
// After each pass the stats file must hold lines "frame <n> bits <b>". After
// pass 2 the adapter must also leave a decoded reconstruction at "{out}.y4m".
struct ExternalAdapter {
  std::string command_template;
  std::filesystem::path work_dir;  // empty: a fresh directory under the temp dir
};

// Expands the template. Values are inserted verbatim; callers quote them.
std::string render_command(const std::string& command_template,
                           const std::map<std::string, std::string>& values, bool include_dqp);

std::string shell_quote(const std::string& s);

// Parses "frame <n> bits <b>" lines; frames must run 0..N-1 in order.
std::vector<std::uint64_t> parse_stats(const std::string& text);

// Runs both passes of the adapter. Throws CapabilityError when no adapter is
// configured and AdapterError (with the captured output) when the process
// fails or produces malformed output.
EncodeResult external_encode(const std::filesystem::path& input_y4m, const DeltaQpMap& dqp,
                             const EncoderConfig& cfg, const std::optional<ExternalAdapter>& adapter);

}  // namespace vannot
