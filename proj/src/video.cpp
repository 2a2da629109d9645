#include "vannot/video.hpp"

#include <algorithm>
#include <string>

#include "vannot/errors.hpp"

namespace vannot {

void replicate_edges(Plane& plane, int valid_w, int valid_h) {
  const int w = plane.width();
  const int h = plane.height();
  for (int y = 0; y < valid_h; ++y) {
    auto row = plane.row(y);
    std::fill(row.begin() + valid_w, row.end(), row[valid_w - 1]);
  }
  for (int y = valid_h; y < h; ++y) {
    auto src = plane.row(valid_h - 1);
    std::copy(src.begin(), src.begin() + w, plane.row(y).begin());
  }
}

namespace {

Plane pad_plane(const Plane& src, int padded_w, int padded_h) {
  Plane out(padded_w, padded_h);
  for (int y = 0; y < src.height(); ++y) {
    auto s = src.row(y);
    std::copy(s.begin(), s.end(), out.row(y).begin());
  }
  replicate_edges(out, src.width(), src.height());
  return out;
}

}  // namespace

FrameSequence make_sequence(int orig_width, int orig_height, Rational frame_rate,
                            ChromaMode chroma, std::vector<FrameBuffer> unpadded) {
  if (orig_width <= 0 || orig_height <= 0) {
    throw ArgumentError("frame dimensions must be positive");
  }
  if (frame_rate.num == 0 || frame_rate.den == 0) {
    throw ArgumentError("frame rate must be positive");
  }
  FrameSequence seq;
  seq.orig_width = orig_width;
  seq.orig_height = orig_height;
  seq.width = pad_to_macroblock(orig_width);
  seq.height = pad_to_macroblock(orig_height);
  seq.frame_rate = frame_rate;
  seq.chroma = chroma;
  seq.frames.reserve(unpadded.size());

  const int cw = (orig_width + 1) / 2;
  const int ch = (orig_height + 1) / 2;
  int index = 0;
  for (auto& f : unpadded) {
    if (f.luma.width() != orig_width || f.luma.height() != orig_height) {
      throw ArgumentError("frame " + std::to_string(index) + " luma has wrong dimensions");
    }
    FrameBuffer out;
    out.index = index;
    out.luma = pad_plane(f.luma, seq.width, seq.height);
    if (chroma == ChromaMode::k420) {
      if (!f.chroma_u || !f.chroma_v || f.chroma_u->width() != cw ||
          f.chroma_u->height() != ch || f.chroma_v->width() != cw ||
          f.chroma_v->height() != ch) {
        throw ArgumentError("frame " + std::to_string(index) + " chroma has wrong dimensions");
      }
      out.chroma_u = pad_plane(*f.chroma_u, seq.width / 2, seq.height / 2);
      out.chroma_v = pad_plane(*f.chroma_v, seq.width / 2, seq.height / 2);
    }
    seq.frames.push_back(std::move(out));
    ++index;
  }
  return seq;
}

Plane crop(const Plane& plane, int width, int height) {
  Plane out(width, height);
  for (int y = 0; y < height; ++y) {
    auto s = plane.row(y);
    std::copy(s.begin(), s.begin() + width, out.row(y).begin());
  }
  return out;
}

}  // namespace vannot
