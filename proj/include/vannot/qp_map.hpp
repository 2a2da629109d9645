#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "vannot/grid.hpp"
#include "vannot/importance.hpp"

namespace vannot {

inline constexpr double kMaxDeltaQp = 10.0;

// Per-frame, per-macroblock quantizer offsets in [-10, 10].
struct DeltaQpMap {
  int mb_cols = 0;
  int mb_rows = 0;
  std::vector<Grid<float>> frames;

  int frame_count() const { return static_cast<int>(frames.size()); }

  float at(int frame, int mb_x, int mb_y) const {
    return frames[static_cast<std::size_t>(frame)].at(mb_x, mb_y);
  }

  static DeltaQpMap zero(int mb_cols, int mb_rows, int frames);
  bool all_zero() const;

  friend bool operator==(const DeltaQpMap&, const DeltaQpMap&) = default;
};

// Mean importance of each 16x16 macroblock; partial edge blocks average only
// their in-frame pixels.
std::vector<Grid<double>> block_means(const ImportanceVolume& vol);

// Affine map from normalized importance v = mean / 255 to
// range * (1 - 2v): importance 1 gives -range (finer quantization), 0 gives
// +range. Results are clamped to [-range, range].
DeltaQpMap to_delta_qp(const std::vector<Grid<double>>& means, double range = kMaxDeltaQp);

float delta_qp_for_mean(double mean, double range = kMaxDeltaQp);

// normalize -> block_means -> to_delta_qp.
DeltaQpMap importance_to_delta_qp(const ImportanceVolume& vol, double range = kMaxDeltaQp);

// DQP container:
//   "VDQP" u32 version(=1) u32 mb_cols u32 mb_rows u32 frame_count
//   per frame: row-major f32
inline constexpr std::uint32_t kDqpVersion = 1;

void serialize_qpmap(const DeltaQpMap& map, std::ostream& out);
DeltaQpMap parse_qpmap(std::istream& in);
std::string qpmap_bytes(const DeltaQpMap& map);

void write_qpmap_file(const DeltaQpMap& map, const std::filesystem::path& path);
DeltaQpMap read_qpmap_file(const std::filesystem::path& path);

}  // namespace vannot
