#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vannot/grid.hpp"

namespace vannot {

inline constexpr int kMacroblockSize = 16;

struct Rational {
  std::uint32_t num = 30;
  std::uint32_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Rational&, const Rational&) = default;
};

enum class ChromaMode : std::uint8_t { kMono = 0, k420 = 1 };

// One decoded picture. Chroma planes are half resolution and absent for mono.
struct FrameBuffer {
  Plane luma;
  std::optional<Plane> chroma_u;
  std::optional<Plane> chroma_v;
  int index = 0;

  friend bool operator==(const FrameBuffer&, const FrameBuffer&) = default;
};

// Decoded source video. Frame planes are stored padded to a multiple of the
// macroblock size by edge replication; orig_width/orig_height record the
// visible region.
struct FrameSequence {
  int width = 0;
  int height = 0;
  int orig_width = 0;
  int orig_height = 0;
  Rational frame_rate;
  ChromaMode chroma = ChromaMode::k420;
  std::vector<FrameBuffer> frames;

  double duration_seconds() const {
    return static_cast<double>(frames.size()) / frame_rate.value();
  }
  int mb_cols() const { return width / kMacroblockSize; }
  int mb_rows() const { return height / kMacroblockSize; }

  friend bool operator==(const FrameSequence&, const FrameSequence&) = default;
};

inline int pad_to_macroblock(int n) {
  return (n + kMacroblockSize - 1) / kMacroblockSize * kMacroblockSize;
}

// Replicates the rightmost column and bottom row of the top-left
// (valid_w x valid_h) region out to the plane's full size.
void replicate_edges(Plane& plane, int valid_w, int valid_h);

// Builds a padded sequence from unpadded planes. Each frame's planes must have
// the original dimensions (chroma: ceil(w/2) x ceil(h/2)).
FrameSequence make_sequence(int orig_width, int orig_height, Rational frame_rate,
                            ChromaMode chroma, std::vector<FrameBuffer> unpadded);

// Copies the top-left region of a plane.
Plane crop(const Plane& plane, int width, int height);

}  // namespace vannot
