#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "vannot/importance.hpp"
#include "vannot/video.hpp"

namespace vannot {

// PSNR of identical inputs.
inline constexpr double kLossless = std::numeric_limits<double>::infinity();
inline bool is_lossless(double db) { return std::isinf(db) && db > 0; }

inline constexpr std::uint8_t kDefaultRegionThreshold = 160;

double psnr_from_mse(double mse);

// Luma PSNR over the unpadded area of every frame. Throws ArgumentError on a
// shape mismatch.
double psnr(const FrameSequence& ref, const FrameSequence& rec);

struct RegionMetrics {
  double psnr_in = 0.0;        // pixels with importance >= threshold
  double psnr_out = 0.0;       // the rest
  double weighted_psnr = 0.0;  // MSE weighted by importance / 255
  std::uint8_t threshold = kDefaultRegionThreshold;
  std::uint64_t pixels_in = 0;
  std::uint64_t pixels_out = 0;
};

// Throws DegenerateRegionError when either side of the threshold is empty.
RegionMetrics region_metrics(const FrameSequence& ref, const FrameSequence& rec,
                             const ImportanceVolume& vol,
                             std::uint8_t threshold = kDefaultRegionThreshold);

}  // namespace vannot
