#pragma once

#include <functional>

#include "vannot/codec.hpp"
#include "vannot/mock_codec.hpp"

namespace vannot {

struct Calibration {
  double bitrate = 0.0;  // bits per second
  double psnr = 0.0;     // achieved by the returned bitrate
  int iterations = 0;
  bool converged = false;
};

// Bisection on log(bitrate) in [lo, hi] for the bitrate whose encode reaches
// target_psnr within tolerance_db. PSNR is assumed to grow with bitrate; when
// the target lies outside what the bounds reach, the nearer bound is returned
// with converged = false.
Calibration calibrate_bitrate(const std::function<double(double bitrate)>& psnr_at,
                              double target_psnr, double lo, double hi,
                              double tolerance_db = 0.1, int max_iterations = 24);

// Map-free two-pass mock encodes, searched between the rates the codec
// reaches at QP 51 and QP 0.
Calibration calibrate_mock_bitrate(const MockCodec& codec, double target_psnr,
                                   const EncoderConfig& base = {}, double tolerance_db = 0.1);

}  // namespace vannot
