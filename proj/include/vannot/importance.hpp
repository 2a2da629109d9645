#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vannot/grid.hpp"

namespace vannot {

inline constexpr std::uint8_t kNeutralImportance = 127;
inline constexpr std::uint8_t kDefaultBrushStrength = 64;

// Per-frame importance grids over the unpadded video area. 127 is neutral.
struct ImportanceVolume {
  int width = 0;
  int height = 0;
  std::vector<Plane> maps;

  int frame_count() const { return static_cast<int>(maps.size()); }
  std::size_t pixel_count() const {
    return maps.size() * static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  friend bool operator==(const ImportanceVolume&, const ImportanceVolume&) = default;
};

enum class Polarity : std::uint8_t { kPaint, kErase };

struct Stroke {
  int frame = 0;
  int cx = 0;
  int cy = 0;
  double radius = 1.0;
  std::uint8_t strength = kDefaultBrushStrength;
  Polarity polarity = Polarity::kPaint;

  friend bool operator==(const Stroke&, const Stroke&) = default;
};

// Signed additive kernel stored over its bounding box. Pixels outside the box
// carry zero.
struct StrokeDelta {
  int frame = 0;
  int x0 = 0;
  int y0 = 0;
  Grid<std::int16_t> values;

  int value_at(int x, int y) const {
    const int lx = x - x0;
    const int ly = y - y0;
    return values.contains(lx, ly) ? values.at(lx, ly) : 0;
  }

  // Full-frame real-valued copy, clipped to the frame.
  Grid<double> dense(int width, int height) const;
};

// Throws ArgumentError for zero dimensions or frame count.
ImportanceVolume new_volume(int width, int height, int frames);

// Throws ArgumentError when the stroke does not fit the volume.
void validate_stroke(const Stroke& stroke, const ImportanceVolume& vol);

// Linear cone: +-strength * max(0, 1 - dist/radius), rounded half away from
// zero.
StrokeDelta stroke_kernel(const Stroke& stroke);

// Adds the delta to its frame with clamping to [0, 255].
void apply_delta(ImportanceVolume& vol, const StrokeDelta& delta);

double mean_value(const ImportanceVolume& vol);

struct NormalizeResult {
  ImportanceVolume volume;
  double scale = 1.0;
  double mean = 0.0;        // mean of the returned volume
  int iterations = 0;
  bool degenerate = false;  // input mean < 1: returned volume is uniform 127
  bool converged = true;    // |mean - 127| <= 0.5 reached
};

inline constexpr double kNormalizeTarget = 127.0;
inline constexpr double kNormalizeTolerance = 0.5;
inline constexpr int kNormalizeMaxIterations = 8;

// Rescales the whole volume multiplicatively (v' = clamp(round(v * s))) so its
// global mean lands within 127 +- 0.5. The scale is refined after each
// clamped pass.
NormalizeResult normalize(const ImportanceVolume& vol);

// Per-pixel mean rounded half up. Throws ArgumentError on an empty list or
// mismatched shapes.
ImportanceVolume average_volumes(std::span<const ImportanceVolume> volumes);

}  // namespace vannot
