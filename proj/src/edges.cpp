#include "vannot/edges.hpp"

#include <algorithm>
#include <cmath>

namespace vannot {

EdgeMask sobel_edges(const Plane& luma, std::uint8_t threshold) {
  const int w = luma.width();
  const int h = luma.height();
  EdgeMask mask{Plane(w, h), threshold};
  auto px = [&](int x, int y) {
    return static_cast<int>(luma.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)));
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int gx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                     (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      const int gy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                     (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
      const double m = std::round(std::sqrt(static_cast<double>(gx * gx + gy * gy)));
      mask.magnitude.at(x, y) = static_cast<std::uint8_t>(std::min(m, 255.0));
    }
  }
  return mask;
}

}  // namespace vannot
