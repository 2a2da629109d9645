#include "vannot/importance.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "vannot/errors.hpp"

namespace vannot {

Grid<double> StrokeDelta::dense(int width, int height) const {
  Grid<double> out(width, height, 0.0);
  for (int ly = 0; ly < values.height(); ++ly) {
    const int y = y0 + ly;
    if (y < 0 || y >= height) continue;
    for (int lx = 0; lx < values.width(); ++lx) {
      const int x = x0 + lx;
      if (x < 0 || x >= width) continue;
      out.at(x, y) = values.at(lx, ly);
    }
  }
  return out;
}

ImportanceVolume new_volume(int width, int height, int frames) {
  if (width <= 0 || height <= 0 || frames <= 0) {
    throw ArgumentError("importance volume needs positive dimensions and frame count");
  }
  ImportanceVolume vol;
  vol.width = width;
  vol.height = height;
  vol.maps.assign(static_cast<std::size_t>(frames), Plane(width, height, kNeutralImportance));
  return vol;
}

void validate_stroke(const Stroke& s, const ImportanceVolume& vol) {
  if (s.frame < 0 || s.frame >= vol.frame_count()) {
    throw ArgumentError("stroke frame " + std::to_string(s.frame) + " out of range");
  }
  if (s.cx < 0 || s.cx >= vol.width || s.cy < 0 || s.cy >= vol.height) {
    throw ArgumentError("stroke center (" + std::to_string(s.cx) + ", " + std::to_string(s.cy) +
                        ") outside the frame");
  }
  if (!(s.radius >= 1.0) || !std::isfinite(s.radius)) {
    throw ArgumentError("stroke radius must be >= 1");
  }
}

StrokeDelta stroke_kernel(const Stroke& s) {
  const int extent = static_cast<int>(std::floor(s.radius));
  StrokeDelta d;
  d.frame = s.frame;
  d.x0 = s.cx - extent;
  d.y0 = s.cy - extent;
  d.values = Grid<std::int16_t>(2 * extent + 1, 2 * extent + 1, 0);
  const double sign = s.polarity == Polarity::kPaint ? 1.0 : -1.0;
  for (int ly = 0; ly < d.values.height(); ++ly) {
    for (int lx = 0; lx < d.values.width(); ++lx) {
      const double dist = std::hypot(lx - extent, ly - extent);
      const double falloff = std::max(0.0, 1.0 - dist / s.radius);
      d.values.at(lx, ly) = static_cast<std::int16_t>(sign * std::round(s.strength * falloff));
    }
  }
  return d;
}

void apply_delta(ImportanceVolume& vol, const StrokeDelta& delta) {
  if (delta.frame < 0 || delta.frame >= vol.frame_count()) {
    throw ArgumentError("delta frame " + std::to_string(delta.frame) + " out of range");
  }
  Plane& map = vol.maps[static_cast<std::size_t>(delta.frame)];
  const int x_begin = std::max(0, delta.x0);
  const int y_begin = std::max(0, delta.y0);
  const int x_end = std::min(vol.width, delta.x0 + delta.values.width());
  const int y_end = std::min(vol.height, delta.y0 + delta.values.height());
  for (int y = y_begin; y < y_end; ++y) {
    for (int x = x_begin; x < x_end; ++x) {
      const int v = map.at(x, y) + delta.values.at(x - delta.x0, y - delta.y0);
      map.at(x, y) = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
    }
  }
}

namespace {

using Histogram = std::array<std::uint64_t, 256>;

Histogram histogram(const ImportanceVolume& vol) {
  Histogram h{};
  for (const auto& m : vol.maps) {
    for (std::uint8_t v : m.values()) ++h[v];
  }
  return h;
}

double histogram_mean(const Histogram& h, const std::array<std::uint8_t, 256>& lut) {
  std::uint64_t sum = 0;
  std::uint64_t n = 0;
  for (int v = 0; v < 256; ++v) {
    sum += static_cast<std::uint64_t>(lut[v]) * h[v];
    n += h[v];
  }
  return static_cast<double>(sum) / static_cast<double>(n);
}

std::array<std::uint8_t, 256> scale_lut(double s) {
  std::array<std::uint8_t, 256> lut{};
  for (int v = 0; v < 256; ++v) {
    lut[v] = static_cast<std::uint8_t>(std::clamp(std::round(v * s), 0.0, 255.0));
  }
  return lut;
}

// Contribution of saturated pixels to the mean.
double saturated_share(const Histogram& h, const std::array<std::uint8_t, 256>& lut) {
  std::uint64_t sat = 0;
  std::uint64_t n = 0;
  for (int v = 0; v < 256; ++v) {
    if (lut[v] == 255) sat += h[v];
    n += h[v];
  }
  return 255.0 * static_cast<double>(sat) / static_cast<double>(n);
}

}  // namespace

double mean_value(const ImportanceVolume& vol) {
  if (vol.pixel_count() == 0) throw ArgumentError("empty importance volume");
  std::array<std::uint8_t, 256> identity{};
  for (int v = 0; v < 256; ++v) identity[v] = static_cast<std::uint8_t>(v);
  return histogram_mean(histogram(vol), identity);
}

// The mean after scaling is a function of the value histogram alone, so each
// refinement pass costs 256 operations and the pixels are touched once.
NormalizeResult normalize(const ImportanceVolume& vol) {
  if (vol.pixel_count() == 0) throw ArgumentError("cannot normalize an empty volume");
  const Histogram hist = histogram(vol);
  std::array<std::uint8_t, 256> identity{};
  for (int v = 0; v < 256; ++v) identity[v] = static_cast<std::uint8_t>(v);
  const double mean0 = histogram_mean(hist, identity);

  NormalizeResult r;
  if (mean0 < 1.0) {
    r.volume = new_volume(vol.width, vol.height, vol.frame_count());
    r.scale = 0.0;
    r.mean = kNormalizeTarget;
    r.degenerate = true;
    return r;
  }
  if (std::abs(mean0 - kNormalizeTarget) <= kNormalizeTolerance) {
    r.volume = vol;
    r.scale = 1.0;
    r.mean = mean0;
    return r;
  }

  double s = kNormalizeTarget / mean0;
  double best_s = s;
  double best_err = INFINITY;
  double best_mean = mean0;
  r.converged = false;
  for (int it = 1; it <= kNormalizeMaxIterations; ++it) {
    r.iterations = it;
    const auto lut = scale_lut(s);
    const double m = histogram_mean(hist, lut);
    const double err = std::abs(m - kNormalizeTarget);
    if (err < best_err) {
      best_err = err;
      best_s = s;
      best_mean = m;
    }
    if (err <= kNormalizeTolerance) {
      r.converged = true;
      break;
    }
    if (m <= 0.0) break;
    // Pixels pinned at 255 do not respond to the scale; rescale only the rest.
    const double pinned = saturated_share(hist, lut);
    if (m - pinned > 0.0 && kNormalizeTarget > pinned) {
      s *= (kNormalizeTarget - pinned) / (m - pinned);
    } else {
      s *= kNormalizeTarget / m;
    }
  }

  const auto lut = scale_lut(best_s);
  r.volume = vol;
  for (auto& map : r.volume.maps) {
    for (auto& v : map.values()) v = lut[v];
  }
  r.scale = best_s;
  r.mean = best_mean;
  return r;
}

ImportanceVolume average_volumes(std::span<const ImportanceVolume> volumes) {
  if (volumes.empty()) throw ArgumentError("average of zero volumes");
  const auto& first = volumes.front();
  for (const auto& v : volumes) {
    if (v.width != first.width || v.height != first.height ||
        v.frame_count() != first.frame_count()) {
      throw ArgumentError("volumes to average differ in shape");
    }
  }
  const std::uint64_t n = volumes.size();
  ImportanceVolume out = first;
  std::vector<std::uint64_t> sum(static_cast<std::size_t>(first.width) * first.height);
  for (int f = 0; f < first.frame_count(); ++f) {
    std::fill(sum.begin(), sum.end(), 0);
    for (const auto& v : volumes) {
      const auto px = v.maps[static_cast<std::size_t>(f)].values();
      for (std::size_t i = 0; i < px.size(); ++i) sum[i] += px[i];
    }
    auto dst = out.maps[static_cast<std::size_t>(f)].values();
    for (std::size_t i = 0; i < sum.size(); ++i) {
      dst[i] = static_cast<std::uint8_t>((2 * sum[i] + n) / (2 * n));
    }
  }
  return out;
}

}  // namespace vannot
