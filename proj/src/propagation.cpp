#include "vannot/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vannot/errors.hpp"

namespace vannot {

Grid<double> warp_delta(const Grid<double>& delta, const FlowField& field) {
  const int w = delta.width();
  const int h = delta.height();
  if (field.width() != w || field.height() != h) {
    throw ArgumentError("warp: delta is " + std::to_string(w) + "x" + std::to_string(h) +
                        " but flow is " + std::to_string(field.width()) + "x" +
                        std::to_string(field.height()));
  }
  Grid<double> out(w, h, 0.0);
  auto splat = [&](int x, int y, double v) {
    if (out.contains(x, y)) out.at(x, y) += v;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = delta.at(x, y);
      if (v == 0.0) continue;
      const double tx = x + static_cast<double>(field.dx.at(x, y));
      const double ty = y + static_cast<double>(field.dy.at(x, y));
      const double fx0 = std::floor(tx);
      const double fy0 = std::floor(ty);
      const double ax = tx - fx0;
      const double ay = ty - fy0;
      const int x0 = static_cast<int>(fx0);
      const int y0 = static_cast<int>(fy0);
      if (ax == 0.0 && ay == 0.0) {
        splat(x0, y0, v);
        continue;
      }
      splat(x0, y0, v * (1 - ax) * (1 - ay));
      splat(x0 + 1, y0, v * ax * (1 - ay));
      splat(x0, y0 + 1, v * (1 - ax) * ay);
      splat(x0 + 1, y0 + 1, v * ax * ay);
    }
  }
  return out;
}

PropagationReport propagate_stroke(ImportanceVolume& vol, const StrokeDelta& delta,
                                   const FlowStore& flows, const DecayPolicy& policy) {
  if (delta.frame < 0 || delta.frame >= vol.frame_count()) {
    throw ArgumentError("propagation: frame " + std::to_string(delta.frame) + " out of range");
  }
  apply_delta(vol, delta);
  PropagationReport report{delta.frame, 1};

  const int t = delta.frame;
  const int last = std::min(vol.frame_count() - 1, t + policy.horizon);
  Grid<double> running = delta.dense(vol.width, vol.height);
  for (int k = 1; t + k <= last; ++k) {
    const auto field = flows.get(t + k - 1);
    if (!field) break;
    running = warp_delta(running, *field);
    report.last_frame = t + k;
    ++report.frames_touched;
    const double wk = policy.weight(k);
    if (wk == 0.0) continue;
    Plane& map = vol.maps[static_cast<std::size_t>(t + k)];
    auto dst = map.values();
    auto src = running.values();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (src[i] == 0.0) continue;
      const double add = std::round(wk * src[i]);
      dst[i] = static_cast<std::uint8_t>(std::clamp(dst[i] + add, 0.0, 255.0));
    }
  }
  return report;
}

}  // namespace vannot
