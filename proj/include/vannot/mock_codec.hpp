#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vannot/codec.hpp"
#include "vannot/qp_map.hpp"
#include "vannot/video.hpp"

namespace vannot {

// All-intra 8x8 DCT reference codec with two-pass rate control.
//
// Each macroblock codes four 8x8 luma blocks plus one 8x8 block per chroma
// plane, all at the macroblock QP. Rate is the summed signed Exp-Golomb length
// of the quantized coefficients.
//
// QP assignment: rate control searches a rate QP b and each macroblock targets
//   q = b + frame_offset[f] + dqp[mb] - mean(dqp)
// before dithering to an integer. The reported base QP is b - mean(dqp), so a
// constant shift of the whole map is absorbed by rate control and the base QP
// moves by the opposite amount.
class MockCodec {
 public:
  // The sequence must outlive the codec when passed by reference.
  explicit MockCodec(const FrameSequence& seq);
  explicit MockCodec(std::shared_ptr<const FrameSequence> seq);

  const FrameSequence& sequence() const { return *seq_; }

  // Two-pass ABR encode. A null map is the plain (map-free) path. Throws
  // RateControlError when the target lies outside what the QP range can reach.
  EncodeResult encode_two_pass(const DeltaQpMap* dqp, const EncoderConfig& cfg) const;

  // Single pass at a fixed rate QP (the mean-centered search variable b above)
  // with optional per-frame offsets.
  EncodeResult encode_at(double rate_qp, const DeltaQpMap* dqp,
                         std::span<const double> frame_offsets = {}) const;

  // Total coefficient bits at the given rate QP, from the cached rate tables.
  std::uint64_t bits_at(double rate_qp, const DeltaQpMap* dqp,
                        std::span<const double> frame_offsets = {}) const;

  // Per-frame bits at the given rate QP.
  std::vector<std::uint64_t> frame_bits_at(double rate_qp, const DeltaQpMap* dqp,
                                           std::span<const double> frame_offsets = {}) const;

 private:
  using RateTable = std::array<std::uint32_t, kMaxQp + 1>;

  struct Plan;
  Plan make_plan(const DeltaQpMap* dqp) const;
  int mb_qp(const Plan& plan, double rate_qp, std::span<const double> frame_offsets, int f,
            int mbx, int mby) const;
  void build_rate_tables();

  std::shared_ptr<const FrameSequence> seq_;
  int mb_cols_ = 0;
  int mb_rows_ = 0;
  std::vector<RateTable> rates_;  // frame-major, raster macroblocks
};

EncodeResult mock_encode_two_pass(const FrameSequence& seq, const DeltaQpMap& dqp,
                                  const EncoderConfig& cfg);
EncodeResult mock_encode_two_pass(const FrameSequence& seq, const EncoderConfig& cfg);

// VMCK container:
//   "VMCK" u32 version(=1) u32 width u32 height u32 orig_width u32 orig_height
//   u32 fps_num u32 fps_den u32 chroma(0 mono, 1 4:2:0) u32 base_qp(f32 bits)
//   u32 frame_count
//   per frame, per macroblock in raster order: u8 qp, then i16 levels of the
//   four luma blocks (TL, TR, BL, BR) and, for 4:2:0, the U and V blocks;
//   64 row-major levels per block.
inline constexpr std::uint32_t kMockVersion = 1;

struct MockBitstream {
  int width = 0;
  int height = 0;
  int orig_width = 0;
  int orig_height = 0;
  Rational frame_rate;
  ChromaMode chroma = ChromaMode::k420;
  float base_qp = 0.f;
  // Per frame, per macroblock: qp followed by its levels.
  std::vector<std::vector<std::uint8_t>> qps;
  std::vector<std::vector<std::int16_t>> levels;

  int blocks_per_mb() const { return chroma == ChromaMode::k420 ? 6 : 4; }
};

std::string write_mock_bitstream(const MockBitstream& bs);
MockBitstream parse_mock_bitstream(const std::string& bytes);
FrameSequence decode_mock(const MockBitstream& bs);
FrameSequence decode_mock_bitstream(const std::string& bytes);

}  // namespace vannot
