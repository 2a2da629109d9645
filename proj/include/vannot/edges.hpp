#pragma once

#include <cstdint>

#include "vannot/video.hpp"

namespace vannot {

struct EdgeMask {
  Plane magnitude;
  std::uint8_t threshold = 0;

  bool is_edge(int x, int y) const { return magnitude.at(x, y) >= threshold; }
};

// 3x3 Sobel gradient magnitude of the luma plane, clamp(round(hypot(gx, gy))).
// Border taps replicate the nearest edge pixel.
EdgeMask sobel_edges(const Plane& luma, std::uint8_t threshold);
inline EdgeMask sobel_edges(const FrameBuffer& frame, std::uint8_t threshold) {
  return sobel_edges(frame.luma, threshold);
}

}  // namespace vannot
