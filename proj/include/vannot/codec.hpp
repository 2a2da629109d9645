#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vannot/grid.hpp"
#include "vannot/video.hpp"

namespace vannot {

inline constexpr int kMinQp = 0;
inline constexpr int kMaxQp = 51;

struct EncoderConfig {
  double target_bitrate = 0.0;  // bits per second
  double qp_min = kMinQp;       // base QP search range
  double qp_max = kMaxQp;
  bool all_intra = true;
  double rate_tolerance = 0.02;
  double pass1_qp = 26.0;
  double qcomp = 0.6;           // per-frame budget ~ complexity^qcomp
  int max_iterations = 24;
};

void validate(const EncoderConfig& cfg);

struct EncodeResult {
  std::string codec;                   // "mock" or "external"
  std::string bitstream;               // VMCK container (mock)
  std::filesystem::path bitstream_path;  // adapter output (external)
  FrameSequence reconstruction;
  std::vector<std::uint64_t> per_frame_bits;
  std::vector<std::uint64_t> pass1_bits;  // per-frame complexity at pass1_qp
  std::vector<double> frame_qp_offsets;
  std::vector<Grid<std::uint8_t>> mb_qp;  // final per-macroblock QP, per frame
  double base_qp = 0.0;
  double target_bits = 0.0;
  int iterations = 0;
  bool rate_converged = true;
  double psnr_overall = 0.0;

  std::uint64_t total_bits() const {
    std::uint64_t s = 0;
    for (auto b : per_frame_bits) s += b;
    return s;
  }
};

// Quantizer step: 2^((qp - 4) / 6), doubling every 6 QP.
double qstep(int qp);

// Signed Exp-Golomb code length of a quantized level; zero costs one bit.
int exp_golomb_bits(int level);

// Public 32-bit hash behind the deterministic QP dither.
std::uint32_t dither_hash(int frame, int mb_x, int mb_y);

// Integer QP for a real-valued target q: floor(q) + 1 when
// fract(q) > dither_hash / 2^32, then clamped to [0, 51].
int dithered_qp(double q, int frame, int mb_x, int mb_y);

}  // namespace vannot
