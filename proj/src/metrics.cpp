#include "vannot/metrics.hpp"

#include <string>

#include "vannot/errors.hpp"

namespace vannot {

namespace {

void check_same_shape(const FrameSequence& ref, const FrameSequence& rec) {
  if (ref.orig_width != rec.orig_width || ref.orig_height != rec.orig_height ||
      ref.frames.size() != rec.frames.size()) {
    throw ArgumentError("psnr: sequences differ in dimensions or frame count");
  }
}

}  // namespace

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return kLossless;
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double psnr(const FrameSequence& ref, const FrameSequence& rec) {
  check_same_shape(ref, rec);
  std::uint64_t sse = 0;
  std::uint64_t n = 0;
  for (std::size_t f = 0; f < ref.frames.size(); ++f) {
    const Plane& a = ref.frames[f].luma;
    const Plane& b = rec.frames[f].luma;
    for (int y = 0; y < ref.orig_height; ++y) {
      const auto ra = a.row(y);
      const auto rb = b.row(y);
      for (int x = 0; x < ref.orig_width; ++x) {
        const int d = static_cast<int>(ra[x]) - static_cast<int>(rb[x]);
        sse += static_cast<std::uint64_t>(d * d);
      }
    }
    n += static_cast<std::uint64_t>(ref.orig_width) * ref.orig_height;
  }
  return psnr_from_mse(static_cast<double>(sse) / static_cast<double>(n));
}

RegionMetrics region_metrics(const FrameSequence& ref, const FrameSequence& rec,
                             const ImportanceVolume& vol, std::uint8_t threshold) {
  check_same_shape(ref, rec);
  if (vol.width != ref.orig_width || vol.height != ref.orig_height ||
      static_cast<std::size_t>(vol.frame_count()) != ref.frames.size()) {
    throw ArgumentError("region metrics: importance volume does not match the video");
  }
  std::uint64_t sse_in = 0, sse_out = 0;
  RegionMetrics m;
  m.threshold = threshold;
  double wsse = 0.0;
  double wsum = 0.0;
  for (std::size_t f = 0; f < ref.frames.size(); ++f) {
    const Plane& a = ref.frames[f].luma;
    const Plane& b = rec.frames[f].luma;
    const Plane& imp = vol.maps[f];
    for (int y = 0; y < vol.height; ++y) {
      for (int x = 0; x < vol.width; ++x) {
        const int d = static_cast<int>(a.at(x, y)) - static_cast<int>(b.at(x, y));
        const auto e = static_cast<std::uint64_t>(d * d);
        const std::uint8_t v = imp.at(x, y);
        if (v >= threshold) {
          sse_in += e;
          ++m.pixels_in;
        } else {
          sse_out += e;
          ++m.pixels_out;
        }
        const double w = v / 255.0;
        wsse += w * static_cast<double>(e);
        wsum += w;
      }
    }
  }
  if (m.pixels_in == 0) {
    throw DegenerateRegionError("region metrics: no pixel has importance >= " +
                                    std::to_string(threshold) + " (inside region empty)",
                                DegenerateRegionError::Side::kInside);
  }
  if (m.pixels_out == 0) {
    throw DegenerateRegionError("region metrics: every pixel has importance >= " +
                                    std::to_string(threshold) + " (outside region empty)",
                                DegenerateRegionError::Side::kOutside);
  }
  m.psnr_in = psnr_from_mse(static_cast<double>(sse_in) / static_cast<double>(m.pixels_in));
  m.psnr_out = psnr_from_mse(static_cast<double>(sse_out) / static_cast<double>(m.pixels_out));
  m.weighted_psnr = psnr_from_mse(wsum > 0.0 ? wsse / wsum
                                             : static_cast<double>(sse_in + sse_out) /
                                                   static_cast<double>(m.pixels_in + m.pixels_out));
  return m;
}

}  // namespace vannot
