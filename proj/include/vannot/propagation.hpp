#pragma once

#include "vannot/flow.hpp"
#include "vannot/grid.hpp"
#include "vannot/importance.hpp"

namespace vannot {

inline constexpr int kDefaultHorizon = 40;

// Linear temporal decay: weight(k) = max(0, 1 - k / horizon).
struct DecayPolicy {
  int horizon = kDefaultHorizon;

  double weight(int k) const {
    if (k <= 0) return 1.0;
    if (k >= horizon) return 0.0;
    return 1.0 - static_cast<double>(k) / horizon;
  }
};

// Forward bilinear splat of each pixel's value to (x + dx, y + dy). Mass that
// lands outside the frame is dropped.
Grid<double> warp_delta(const Grid<double>& delta, const FlowField& field);

struct PropagationReport {
  int last_frame = 0;  // last frame that received a (possibly zero) update
  int frames_touched = 0;
};

// Applies the delta to its own frame, then carries it forward through the
// stored flows, adding round(weight(k) * warped) to frame t + k. Stops early at
// the last frame or the first missing flow field.
PropagationReport propagate_stroke(ImportanceVolume& vol, const StrokeDelta& delta,
                                   const FlowStore& flows, const DecayPolicy& policy = {});

}  // namespace vannot
