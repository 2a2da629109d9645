#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "vannot/grid.hpp"
#include "vannot/video.hpp"

namespace vannot {

// Forward flow: content at (x, y) in frame from_frame moves to
// (x + dx, y + dy) in frame from_frame + 1.
struct FlowField {
  int from_frame = 0;
  Grid<float> dx;
  Grid<float> dy;

  int width() const { return dx.width(); }
  int height() const { return dx.height(); }

  static FlowField zero(int from_frame, int width, int height) {
    return {from_frame, Grid<float>(width, height, 0.f), Grid<float>(width, height, 0.f)};
  }

  friend bool operator==(const FlowField&, const FlowField&) = default;
};

struct FlowParams {
  int block = 16;
  int search_range = 24;
  // Candidate stride. 1 is an exhaustive search; larger values search a
  // coarse lattice and then refine exhaustively within +-(step - 1) of the
  // coarse winner.
  int step = 1;
};

void validate(const FlowParams& params);

// One integer displacement per block; the block grid tiles the frame with
// partial blocks at the right and bottom.
struct BlockMotion {
  int block = 16;
  int cols = 0;
  int rows = 0;
  std::vector<int> dx;
  std::vector<int> dy;
};

// Block matching on luma by SAD. Only displacements that keep the whole block
// inside frame b are candidates. Ties prefer the smaller |dx| + |dy|, then the
// smaller dy, then the smaller dx.
BlockMotion match_blocks(const Plane& a, const Plane& b, const FlowParams& params);

// Bilinear interpolation of block displacements between block-center pixels
// (x0 + w/2, y0 + h/2), constant beyond the outermost centers.
FlowField upsample_motion(const BlockMotion& motion, int width, int height, int from_frame);

FlowField estimate_flow(const FrameBuffer& a, const FrameBuffer& b, const FlowParams& params);

// Restricts a field to its top-left (width x height) region.
FlowField crop(const FlowField& field, int width, int height);

// Flow fields keyed by source frame. With a directory, fields are persisted one
// file per pair and read back on demand through a bounded cache; without one,
// the store lives in memory.
class FlowStore {
 public:
  FlowStore() = default;
  explicit FlowStore(std::filesystem::path dir, std::size_t cache_capacity = 48);

  void put(const FlowField& field);
  std::shared_ptr<const FlowField> get(int from_frame) const;
  bool contains(int from_frame) const;
  int count() const;
  // Fields written since construction.
  int writes() const;

  const std::optional<std::filesystem::path>& directory() const { return dir_; }

 private:
  std::filesystem::path file_for(int from_frame) const;

  std::optional<std::filesystem::path> dir_;
  std::size_t cache_capacity_ = 0;
  mutable std::mutex mu_;
  mutable std::map<int, std::shared_ptr<const FlowField>> cache_;
  mutable std::list<int> cache_order_;
  int writes_ = 0;
};

// Estimates the N-1 forward fields of the sequence (cropped to the unpadded
// size) and stores any that are missing. Returns the number of fields the
// store holds for this sequence. Throws ArgumentError for fewer than 2 frames.
int precompute_sequence(const FrameSequence& seq, const FlowParams& params, FlowStore& store);

// Flow container:
//   "VFLO" u32 version(=1) u32 width u32 height u32 field_count
//   per field: u32 from_frame, dx grid, dy grid (row-major f32)
inline constexpr std::uint32_t kFlowVersion = 1;

void export_flow(std::span<const FlowField> fields, std::ostream& out);
std::vector<FlowField> import_flow(std::istream& in);

}  // namespace vannot
