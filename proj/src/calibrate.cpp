#include "vannot/calibrate.hpp"

#include <cmath>

#include "vannot/errors.hpp"

namespace vannot {

Calibration calibrate_bitrate(const std::function<double(double)>& psnr_at, double target_psnr,
                              double lo, double hi, double tolerance_db, int max_iterations) {
  if (!(lo > 0) || !(hi > lo)) throw ArgumentError("calibration needs 0 < lo < hi");
  if (!(tolerance_db > 0)) throw ArgumentError("calibration tolerance must be positive");

  Calibration c;
  const double p_lo = psnr_at(lo);
  const double p_hi = psnr_at(hi);
  c.iterations = 2;
  if (target_psnr <= p_lo) return {lo, p_lo, c.iterations, std::abs(p_lo - target_psnr) <= tolerance_db};
  if (target_psnr >= p_hi) return {hi, p_hi, c.iterations, std::abs(p_hi - target_psnr) <= tolerance_db};

  double a = std::log(lo);
  double b = std::log(hi);
  c.bitrate = hi;
  c.psnr = p_hi;
  while (c.iterations < max_iterations) {
    const double mid = std::exp(0.5 * (a + b));
    const double p = psnr_at(mid);
    ++c.iterations;
    if (std::abs(p - target_psnr) < std::abs(c.psnr - target_psnr)) {
      c.bitrate = mid;
      c.psnr = p;
    }
    if (std::abs(p - target_psnr) <= tolerance_db) break;
    (p < target_psnr ? a : b) = std::log(mid);
  }
  c.converged = std::abs(c.psnr - target_psnr) <= tolerance_db;
  return c;
}

Calibration calibrate_mock_bitrate(const MockCodec& codec, double target_psnr,
                                   const EncoderConfig& base, double tolerance_db) {
  const auto& seq = codec.sequence();
  const double per_second = seq.frame_rate.value() / static_cast<double>(seq.frames.size());
  // Pull the bounds in slightly: per-frame offsets shift the reachable range.
  const double lo = static_cast<double>(codec.bits_at(kMaxQp, nullptr)) * per_second * 1.05;
  const double hi = static_cast<double>(codec.bits_at(kMinQp, nullptr)) * per_second * 0.95;
  return calibrate_bitrate(
      [&](double bitrate) {
        EncoderConfig cfg = base;
        cfg.target_bitrate = bitrate;
        return codec.encode_two_pass(nullptr, cfg).psnr_overall;
      },
      target_psnr, lo, hi, tolerance_db);
}

}  // namespace vannot
