#include "vannot/mock_codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <string>

#include "binio.hpp"
#include "vannot/dct.hpp"
#include "vannot/errors.hpp"
#include "vannot/metrics.hpp"

namespace vannot {

// ---------------------------------------------------------------------------
// Shared primitives

void validate(const EncoderConfig& cfg) {
  if (!(cfg.target_bitrate > 0.0)) throw ArgumentError("encoder: target bitrate must be > 0");
  if (!(cfg.qp_min >= kMinQp && cfg.qp_max <= kMaxQp && cfg.qp_min < cfg.qp_max)) {
    throw ArgumentError("encoder: base QP range must lie within [0, 51]");
  }
  if (!(cfg.rate_tolerance > 0.0)) throw ArgumentError("encoder: rate tolerance must be > 0");
  if (cfg.max_iterations < 1) throw ArgumentError("encoder: need at least one iteration");
}

namespace {

const std::array<double, kMaxQp + 1>& qstep_table() {
  static const auto table = [] {
    std::array<double, kMaxQp + 1> t{};
    for (int qp = 0; qp <= kMaxQp; ++qp) t[qp] = std::pow(2.0, (qp - 4) / 6.0);
    return t;
  }();
  return table;
}

std::uint32_t fmix32(std::uint32_t h) {
  h ^= h >> 16;
  h *= 0x85EBCA6Bu;
  h ^= h >> 13;
  h *= 0xC2B2AE35u;
  h ^= h >> 16;
  return h;
}

}  // namespace

double qstep(int qp) { return qstep_table()[static_cast<std::size_t>(std::clamp(qp, 0, kMaxQp))]; }

int exp_golomb_bits(int level) {
  if (level == 0) return 1;
  const auto mag = static_cast<std::uint32_t>(level < 0 ? -level : level);
  const std::uint32_t u = 2 * mag - (level > 0 ? 1u : 0u);
  return 2 * (std::bit_width(u + 1) - 1) + 1;
}

std::uint32_t dither_hash(int frame, int mb_x, int mb_y) {
  return fmix32(static_cast<std::uint32_t>(frame) * 0x9E3779B1u +
                static_cast<std::uint32_t>(mb_x) * 0x85EBCA77u +
                static_cast<std::uint32_t>(mb_y) * 0xC2B2AE3Du + 0x27D4EB2Fu);
}

int dithered_qp(double q, int frame, int mb_x, int mb_y) {
  q = std::clamp(q, -1000.0, 1000.0);
  const double fl = std::floor(q);
  const double frac = q - fl;
  const double u = static_cast<double>(dither_hash(frame, mb_x, mb_y)) / 4294967296.0;
  const int qp = static_cast<int>(fl) + (frac > u ? 1 : 0);
  return std::clamp(qp, kMinQp, kMaxQp);
}

// ---------------------------------------------------------------------------
// Block coding

namespace {

inline int quantize(double c, double step) { return static_cast<int>(std::round(c / step)); }

dct::Block load_block(const Plane& p, int x0, int y0) {
  dct::Block b{};
  for (int y = 0; y < 8; ++y) {
    const auto row = p.row(y0 + y);
    for (int x = 0; x < 8; ++x) b[y * 8 + x] = row[x0 + x];
  }
  return b;
}

void reconstruct_block(const std::int16_t* levels, double step, Plane& out, int x0, int y0) {
  dct::Block co{};
  for (int i = 0; i < 64; ++i) co[i] = levels[i] * step;
  const dct::Block px = dct::inverse(co);
  for (int y = 0; y < 8; ++y) {
    auto row = out.row(y0 + y);
    for (int x = 0; x < 8; ++x) {
      row[x0 + x] = static_cast<std::uint8_t>(std::clamp(std::round(px[y * 8 + x]), 0.0, 255.0));
    }
  }
}

// Block origins of one macroblock: (plane, x0, y0) with plane 0 luma, 1 U, 2 V.
struct BlockSite {
  int plane;
  int x0;
  int y0;
};

int block_sites(int mbx, int mby, bool chroma, std::array<BlockSite, 6>& sites) {
  const int lx = mbx * kMacroblockSize;
  const int ly = mby * kMacroblockSize;
  sites[0] = {0, lx, ly};
  sites[1] = {0, lx + 8, ly};
  sites[2] = {0, lx, ly + 8};
  sites[3] = {0, lx + 8, ly + 8};
  if (!chroma) return 4;
  sites[4] = {1, mbx * 8, mby * 8};
  sites[5] = {2, mbx * 8, mby * 8};
  return 6;
}

const Plane& plane_of(const FrameBuffer& f, int plane) {
  return plane == 0 ? f.luma : plane == 1 ? *f.chroma_u : *f.chroma_v;
}

Plane& plane_of(FrameBuffer& f, int plane) {
  return plane == 0 ? f.luma : plane == 1 ? *f.chroma_u : *f.chroma_v;
}

}  // namespace

// ---------------------------------------------------------------------------
// MockCodec

struct MockCodec::Plan {
  std::vector<double> centered;  // dqp - mean(dqp) per frame-major macroblock; empty: no map
  double mean = 0.0;
};

MockCodec::MockCodec(const FrameSequence& seq)
    : MockCodec(std::shared_ptr<const FrameSequence>(std::shared_ptr<void>(), &seq)) {}

MockCodec::MockCodec(std::shared_ptr<const FrameSequence> seq) : seq_(std::move(seq)) {
  if (!seq_ || seq_->frames.empty()) throw ArgumentError("mock codec: empty sequence");
  if (seq_->width % kMacroblockSize != 0 || seq_->height % kMacroblockSize != 0) {
    throw ArgumentError("mock codec: sequence is not padded to whole macroblocks");
  }
  mb_cols_ = seq_->mb_cols();
  mb_rows_ = seq_->mb_rows();
  build_rate_tables();
}

// Rate as a function of integer QP for every macroblock. A coefficient costs
// the Exp-Golomb length of its level until the level reaches zero, and one bit
// from there on, so each coefficient walks the QP ladder only until it dies.
void MockCodec::build_rate_tables() {
  const auto& steps = qstep_table();
  const bool chroma = seq_->chroma == ChromaMode::k420;
  const std::size_t per_frame = static_cast<std::size_t>(mb_cols_) * mb_rows_;
  rates_.assign(per_frame * seq_->frames.size(), RateTable{});
  std::array<BlockSite, 6> sites{};
  for (std::size_t f = 0; f < seq_->frames.size(); ++f) {
    const FrameBuffer& frame = seq_->frames[f];
    for (int mby = 0; mby < mb_rows_; ++mby) {
      for (int mbx = 0; mbx < mb_cols_; ++mbx) {
        RateTable& table = rates_[f * per_frame + static_cast<std::size_t>(mby) * mb_cols_ + mbx];
        std::array<std::uint32_t, kMaxQp + 2> zero_from{};
        const int n = block_sites(mbx, mby, chroma, sites);
        for (int b = 0; b < n; ++b) {
          const dct::Block co =
              dct::forward(load_block(plane_of(frame, sites[b].plane), sites[b].x0, sites[b].y0));
          for (double c : co) {
            int qp = 0;
            for (; qp <= kMaxQp; ++qp) {
              const int level = quantize(c, steps[static_cast<std::size_t>(qp)]);
              if (level == 0) break;
              table[static_cast<std::size_t>(qp)] += static_cast<std::uint32_t>(exp_golomb_bits(level));
            }
            ++zero_from[static_cast<std::size_t>(qp)];
          }
        }
        std::uint32_t zeros = 0;
        for (int qp = 0; qp <= kMaxQp; ++qp) {
          zeros += zero_from[static_cast<std::size_t>(qp)];
          table[static_cast<std::size_t>(qp)] += zeros;
        }
      }
    }
  }
}

MockCodec::Plan MockCodec::make_plan(const DeltaQpMap* dqp) const {
  Plan plan;
  if (!dqp) return plan;
  if (dqp->mb_cols != mb_cols_ || dqp->mb_rows != mb_rows_ ||
      static_cast<std::size_t>(dqp->frame_count()) != seq_->frames.size()) {
    throw ArgumentError("mock codec: delta-QP map is " + std::to_string(dqp->mb_cols) + "x" +
                        std::to_string(dqp->mb_rows) + "x" + std::to_string(dqp->frame_count()) +
                        " but the sequence has " + std::to_string(mb_cols_) + "x" +
                        std::to_string(mb_rows_) + "x" + std::to_string(seq_->frames.size()) +
                        " macroblocks");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& g : dqp->frames) {
    for (float v : g.values()) {
      sum += static_cast<double>(v);
      ++n;
    }
  }
  plan.mean = sum / static_cast<double>(n);
  plan.centered.reserve(n);
  for (const auto& g : dqp->frames) {
    for (float v : g.values()) plan.centered.push_back(static_cast<double>(v) - plan.mean);
  }
  return plan;
}

int MockCodec::mb_qp(const Plan& plan, double rate_qp, std::span<const double> frame_offsets,
                     int f, int mbx, int mby) const {
  double q = rate_qp;
  if (!frame_offsets.empty()) q += frame_offsets[static_cast<std::size_t>(f)];
  if (!plan.centered.empty()) {
    q += plan.centered[static_cast<std::size_t>(f) * mb_cols_ * mb_rows_ +
                       static_cast<std::size_t>(mby) * mb_cols_ + mbx];
  }
  return dithered_qp(q, f, mbx, mby);
}

std::vector<std::uint64_t> MockCodec::frame_bits_at(double rate_qp, const DeltaQpMap* dqp,
                                                    std::span<const double> frame_offsets) const {
  const Plan plan = make_plan(dqp);
  const std::size_t per_frame = static_cast<std::size_t>(mb_cols_) * mb_rows_;
  std::vector<std::uint64_t> bits(seq_->frames.size(), 0);
  for (std::size_t f = 0; f < seq_->frames.size(); ++f) {
    std::uint64_t sum = 0;
    for (int mby = 0; mby < mb_rows_; ++mby) {
      for (int mbx = 0; mbx < mb_cols_; ++mbx) {
        const int qp = mb_qp(plan, rate_qp, frame_offsets, static_cast<int>(f), mbx, mby);
        sum += rates_[f * per_frame + static_cast<std::size_t>(mby) * mb_cols_ + mbx]
                     [static_cast<std::size_t>(qp)];
      }
    }
    bits[f] = sum;
  }
  return bits;
}

std::uint64_t MockCodec::bits_at(double rate_qp, const DeltaQpMap* dqp,
                                 std::span<const double> frame_offsets) const {
  std::uint64_t total = 0;
  for (auto b : frame_bits_at(rate_qp, dqp, frame_offsets)) total += b;
  return total;
}

EncodeResult MockCodec::encode_at(double rate_qp, const DeltaQpMap* dqp,
                                  std::span<const double> frame_offsets) const {
  const Plan plan = make_plan(dqp);
  const auto& steps = qstep_table();
  const bool chroma = seq_->chroma == ChromaMode::k420;

  MockBitstream bs;
  bs.width = seq_->width;
  bs.height = seq_->height;
  bs.orig_width = seq_->orig_width;
  bs.orig_height = seq_->orig_height;
  bs.frame_rate = seq_->frame_rate;
  bs.chroma = seq_->chroma;
  bs.base_qp = static_cast<float>(rate_qp - plan.mean);

  EncodeResult r;
  r.codec = "mock";
  r.base_qp = rate_qp - plan.mean;
  r.frame_qp_offsets.assign(frame_offsets.begin(), frame_offsets.end());
  r.reconstruction = *seq_;

  std::array<BlockSite, 6> sites{};
  const int nblocks = chroma ? 6 : 4;
  for (std::size_t f = 0; f < seq_->frames.size(); ++f) {
    const FrameBuffer& src = seq_->frames[f];
    FrameBuffer& rec = r.reconstruction.frames[f];
    std::vector<std::uint8_t> qps;
    std::vector<std::int16_t> levels;
    qps.reserve(static_cast<std::size_t>(mb_cols_) * mb_rows_);
    levels.reserve(static_cast<std::size_t>(mb_cols_) * mb_rows_ * nblocks * 64);
    Grid<std::uint8_t> qp_grid(mb_cols_, mb_rows_);
    std::uint64_t frame_bits = 0;
    for (int mby = 0; mby < mb_rows_; ++mby) {
      for (int mbx = 0; mbx < mb_cols_; ++mbx) {
        const int qp = mb_qp(plan, rate_qp, frame_offsets, static_cast<int>(f), mbx, mby);
        const double step = steps[static_cast<std::size_t>(qp)];
        qps.push_back(static_cast<std::uint8_t>(qp));
        qp_grid.at(mbx, mby) = static_cast<std::uint8_t>(qp);
        block_sites(mbx, mby, chroma, sites);
        for (int b = 0; b < nblocks; ++b) {
          const dct::Block co =
              dct::forward(load_block(plane_of(src, sites[b].plane), sites[b].x0, sites[b].y0));
          const std::size_t base = levels.size();
          for (double c : co) {
            const int level = quantize(c, step);
            frame_bits += static_cast<std::uint64_t>(exp_golomb_bits(level));
            levels.push_back(static_cast<std::int16_t>(level));
          }
          reconstruct_block(levels.data() + base, step, plane_of(rec, sites[b].plane),
                            sites[b].x0, sites[b].y0);
        }
      }
    }
    r.per_frame_bits.push_back(frame_bits);
    r.mb_qp.push_back(std::move(qp_grid));
    bs.qps.push_back(std::move(qps));
    bs.levels.push_back(std::move(levels));
  }
  r.bitstream = write_mock_bitstream(bs);
  r.psnr_overall = psnr(*seq_, r.reconstruction);
  return r;
}

EncodeResult MockCodec::encode_two_pass(const DeltaQpMap* dqp, const EncoderConfig& cfg) const {
  validate(cfg);
  const double target = cfg.target_bitrate * seq_->duration_seconds();

  // Pass 1: per-frame complexity at a fixed QP with the map applied.
  const std::vector<std::uint64_t> pass1 = frame_bits_at(cfg.pass1_qp, dqp);
  double log_mean = 0.0;
  for (auto b : pass1) log_mean += std::log2(static_cast<double>(b));
  log_mean /= static_cast<double>(pass1.size());
  // Qstep ~ complexity^(1 - qcomp) spends bits ~ complexity^qcomp per frame.
  std::vector<double> offsets(pass1.size());
  for (std::size_t f = 0; f < pass1.size(); ++f) {
    offsets[f] = 6.0 * (1.0 - cfg.qcomp) * (std::log2(static_cast<double>(pass1[f])) - log_mean);
  }

  // Pass 2: bisection on the global rate QP.
  const auto lo_bits = static_cast<double>(bits_at(cfg.qp_max, dqp, offsets));
  const auto hi_bits = static_cast<double>(bits_at(cfg.qp_min, dqp, offsets));
  const double tol = cfg.rate_tolerance * target;
  if (lo_bits > target + tol) {
    throw RateControlError("rate control: target " + std::to_string(target) +
                               " bits is below the minimum achievable " +
                               std::to_string(lo_bits) + " bits",
                           lo_bits, hi_bits);
  }
  if (hi_bits < target - tol) {
    throw RateControlError("rate control: target " + std::to_string(target) +
                               " bits exceeds the maximum achievable " +
                               std::to_string(hi_bits) + " bits",
                           lo_bits, hi_bits);
  }

  double lo = cfg.qp_min;
  double hi = cfg.qp_max;
  double best_qp = cfg.qp_max;
  double best_err = std::abs(lo_bits - target);
  if (std::abs(hi_bits - target) < best_err) {
    best_err = std::abs(hi_bits - target);
    best_qp = cfg.qp_min;
  }
  int iterations = 0;
  bool converged = best_err <= tol;
  while (!converged && iterations < cfg.max_iterations) {
    ++iterations;
    const double mid = 0.5 * (lo + hi);
    const auto bits = static_cast<double>(bits_at(mid, dqp, offsets));
    const double err = std::abs(bits - target);
    if (err < best_err) {
      best_err = err;
      best_qp = mid;
    }
    if (err <= tol) {
      converged = true;
      best_qp = mid;
    } else if (bits > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }

  EncodeResult r = encode_at(best_qp, dqp, offsets);
  r.pass1_bits = pass1;
  r.target_bits = target;
  r.iterations = iterations;
  r.rate_converged = converged;
  return r;
}

EncodeResult mock_encode_two_pass(const FrameSequence& seq, const DeltaQpMap& dqp,
                                  const EncoderConfig& cfg) {
  return MockCodec(seq).encode_two_pass(&dqp, cfg);
}

EncodeResult mock_encode_two_pass(const FrameSequence& seq, const EncoderConfig& cfg) {
  return MockCodec(seq).encode_two_pass(nullptr, cfg);
}

// ---------------------------------------------------------------------------
// Container

std::string write_mock_bitstream(const MockBitstream& bs) {
  std::ostringstream out(std::ios::binary);
  binio::put_magic(out, "VMCK");
  binio::put_u32(out, kMockVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(bs.width));
  binio::put_u32(out, static_cast<std::uint32_t>(bs.height));
  binio::put_u32(out, static_cast<std::uint32_t>(bs.orig_width));
  binio::put_u32(out, static_cast<std::uint32_t>(bs.orig_height));
  binio::put_u32(out, bs.frame_rate.num);
  binio::put_u32(out, bs.frame_rate.den);
  binio::put_u32(out, static_cast<std::uint32_t>(bs.chroma));
  binio::put_f32(out, bs.base_qp);
  binio::put_u32(out, static_cast<std::uint32_t>(bs.qps.size()));
  const std::size_t per_mb = static_cast<std::size_t>(bs.blocks_per_mb()) * 64;
  for (std::size_t f = 0; f < bs.qps.size(); ++f) {
    const auto& qps = bs.qps[f];
    const auto& levels = bs.levels[f];
    if (levels.size() != qps.size() * per_mb) {
      throw ArgumentError("vmck: frame " + std::to_string(f) + " level count mismatch");
    }
    for (std::size_t m = 0; m < qps.size(); ++m) {
      out.put(static_cast<char>(qps[m]));
      for (std::size_t i = 0; i < per_mb; ++i) {
        binio::put_u16(out, static_cast<std::uint16_t>(levels[m * per_mb + i]));
      }
    }
  }
  return std::move(out).str();
}

MockBitstream parse_mock_bitstream(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  binio::Reader r(in, "vmck");
  r.expect_magic("VMCK");
  r.expect_version(kMockVersion);
  MockBitstream bs;
  bs.width = static_cast<int>(r.u32());
  bs.height = static_cast<int>(r.u32());
  bs.orig_width = static_cast<int>(r.u32());
  bs.orig_height = static_cast<int>(r.u32());
  bs.frame_rate.num = r.u32();
  bs.frame_rate.den = r.u32();
  const std::uint32_t chroma = r.u32();
  bs.base_qp = r.f32();
  const std::uint32_t frames = r.u32();
  if (bs.width <= 0 || bs.height <= 0 || bs.width % kMacroblockSize != 0 ||
      bs.height % kMacroblockSize != 0 || bs.width > (1 << 16) || bs.height > (1 << 16) ||
      bs.orig_width <= 0 || bs.orig_width > bs.width || bs.orig_height <= 0 ||
      bs.orig_height > bs.height) {
    throw FormatError("vmck: invalid dimensions");
  }
  if (chroma > 1) throw FormatError("vmck: invalid chroma mode " + std::to_string(chroma));
  if (bs.frame_rate.num == 0 || bs.frame_rate.den == 0) throw FormatError("vmck: invalid frame rate");
  bs.chroma = static_cast<ChromaMode>(chroma);
  const std::size_t mbs = static_cast<std::size_t>(bs.width / kMacroblockSize) *
                          static_cast<std::size_t>(bs.height / kMacroblockSize);
  const std::size_t per_mb = static_cast<std::size_t>(bs.blocks_per_mb()) * 64;
  for (std::uint32_t f = 0; f < frames; ++f) {
    std::vector<std::uint8_t> qps(mbs);
    std::vector<std::int16_t> levels(mbs * per_mb);
    for (std::size_t m = 0; m < mbs; ++m) {
      std::uint8_t qp = 0;
      r.bytes(&qp, 1, static_cast<long>(f));
      if (qp > kMaxQp) throw FormatError("vmck: macroblock QP " + std::to_string(qp) + " out of range");
      qps[m] = qp;
      for (std::size_t i = 0; i < per_mb; ++i) {
        levels[m * per_mb + i] = static_cast<std::int16_t>(r.u16(static_cast<long>(f)));
      }
    }
    bs.qps.push_back(std::move(qps));
    bs.levels.push_back(std::move(levels));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("vmck: trailing bytes");
  return bs;
}

FrameSequence decode_mock(const MockBitstream& bs) {
  FrameSequence seq;
  seq.width = bs.width;
  seq.height = bs.height;
  seq.orig_width = bs.orig_width;
  seq.orig_height = bs.orig_height;
  seq.frame_rate = bs.frame_rate;
  seq.chroma = bs.chroma;
  const bool chroma = bs.chroma == ChromaMode::k420;
  const int cols = bs.width / kMacroblockSize;
  const int rows = bs.height / kMacroblockSize;
  const std::size_t per_mb = static_cast<std::size_t>(bs.blocks_per_mb()) * 64;
  std::array<BlockSite, 6> sites{};
  for (std::size_t f = 0; f < bs.qps.size(); ++f) {
    FrameBuffer fb;
    fb.index = static_cast<int>(f);
    fb.luma = Plane(bs.width, bs.height);
    if (chroma) {
      fb.chroma_u = Plane(bs.width / 2, bs.height / 2);
      fb.chroma_v = Plane(bs.width / 2, bs.height / 2);
    }
    for (int mby = 0; mby < rows; ++mby) {
      for (int mbx = 0; mbx < cols; ++mbx) {
        const std::size_t m = static_cast<std::size_t>(mby) * cols + mbx;
        const double step = qstep(bs.qps[f][m]);
        const int n = block_sites(mbx, mby, chroma, sites);
        for (int b = 0; b < n; ++b) {
          reconstruct_block(bs.levels[f].data() + m * per_mb + static_cast<std::size_t>(b) * 64,
                            step, plane_of(fb, sites[b].plane), sites[b].x0, sites[b].y0);
        }
      }
    }
    seq.frames.push_back(std::move(fb));
  }
  return seq;
}

FrameSequence decode_mock_bitstream(const std::string& bytes) {
  return decode_mock(parse_mock_bitstream(bytes));
}

}  // namespace vannot
