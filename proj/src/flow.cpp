#include "vannot/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <string>
#include <tuple>

#include "binio.hpp"
#include "vannot/errors.hpp"

namespace vannot {

void validate(const FlowParams& p) {
  if (p.block < 4) throw ArgumentError("flow block size must be >= 4");
  if (p.search_range < 1) throw ArgumentError("flow search range must be >= 1");
  if (p.step < 1) throw ArgumentError("flow search step must be >= 1");
}

namespace {

struct Best {
  long sad = std::numeric_limits<long>::max();
  int dx = 0;
  int dy = 0;
};

auto tie_key(int dx, int dy) { return std::make_tuple(std::abs(dx) + std::abs(dy), dy, dx); }

// SAD of block (x0, y0, bw, bh) of a against b displaced by (dx, dy). Stops
// early once the partial sum exceeds `bound`; such a candidate cannot win.
long block_sad(const Plane& a, const Plane& b, int x0, int y0, int bw, int bh, int dx, int dy,
               long bound) {
  long sad = 0;
  for (int y = 0; y < bh; ++y) {
    const std::uint8_t* pa = a.row(y0 + y).data() + x0;
    const std::uint8_t* pb = b.row(y0 + y + dy).data() + x0 + dx;
    int row = 0;
    for (int x = 0; x < bw; ++x) row += std::abs(static_cast<int>(pa[x]) - static_cast<int>(pb[x]));
    sad += row;
    if (sad > bound) return sad;
  }
  return sad;
}

void consider(const Plane& a, const Plane& b, int x0, int y0, int bw, int bh, int dx, int dy,
              Best& best) {
  const long sad = block_sad(a, b, x0, y0, bw, bh, dx, dy, best.sad);
  if (sad < best.sad || (sad == best.sad && tie_key(dx, dy) < tie_key(best.dx, best.dy))) {
    best = {sad, dx, dy};
  }
}

}  // namespace

BlockMotion match_blocks(const Plane& a, const Plane& b, const FlowParams& params) {
  validate(params);
  if (a.width() != b.width() || a.height() != b.height()) {
    throw ArgumentError("flow: frame dimensions differ");
  }
  const int w = a.width();
  const int h = a.height();
  const int bs = params.block;
  const int r = params.search_range;
  BlockMotion m;
  m.block = bs;
  m.cols = (w + bs - 1) / bs;
  m.rows = (h + bs - 1) / bs;
  m.dx.assign(static_cast<std::size_t>(m.cols) * m.rows, 0);
  m.dy.assign(m.dx.size(), 0);

  for (int by = 0; by < m.rows; ++by) {
    for (int bx = 0; bx < m.cols; ++bx) {
      const int x0 = bx * bs;
      const int y0 = by * bs;
      const int bw = std::min(bs, w - x0);
      const int bh = std::min(bs, h - y0);
      const int dx_lo = std::max(-r, -x0);
      const int dx_hi = std::min(r, w - bw - x0);
      const int dy_lo = std::max(-r, -y0);
      const int dy_hi = std::min(r, h - bh - y0);

      Best best;
      consider(a, b, x0, y0, bw, bh, 0, 0, best);
      if (params.step == 1) {
        for (int dy = dy_lo; dy <= dy_hi; ++dy) {
          for (int dx = dx_lo; dx <= dx_hi; ++dx) consider(a, b, x0, y0, bw, bh, dx, dy, best);
        }
      } else {
        const int s = params.step;
        // Lattice through the origin.
        for (int dy = dy_lo + ((-dy_lo) % s + s) % s; dy <= dy_hi; dy += s) {
          for (int dx = dx_lo + ((-dx_lo) % s + s) % s; dx <= dx_hi; dx += s) {
            consider(a, b, x0, y0, bw, bh, dx, dy, best);
          }
        }
        const int cx = best.dx;
        const int cy = best.dy;
        for (int dy = std::max(dy_lo, cy - s + 1); dy <= std::min(dy_hi, cy + s - 1); ++dy) {
          for (int dx = std::max(dx_lo, cx - s + 1); dx <= std::min(dx_hi, cx + s - 1); ++dx) {
            consider(a, b, x0, y0, bw, bh, dx, dy, best);
          }
        }
      }
      const std::size_t i = static_cast<std::size_t>(by) * m.cols + bx;
      m.dx[i] = best.dx;
      m.dy[i] = best.dy;
    }
  }
  return m;
}

namespace {

struct Tap {
  int i0;
  int i1;
  double t;
};

// Interpolation taps along one axis for block centers x0 + len/2.
std::vector<Tap> axis_taps(int n, int block, int extent) {
  std::vector<int> centers(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int start = i * block;
    centers[static_cast<std::size_t>(i)] = start + std::min(block, extent - start) / 2;
  }
  std::vector<Tap> taps(static_cast<std::size_t>(extent));
  int seg = 0;
  for (int p = 0; p < extent; ++p) {
    if (p <= centers.front()) {
      taps[static_cast<std::size_t>(p)] = {0, 0, 0.0};
    } else if (p >= centers.back()) {
      taps[static_cast<std::size_t>(p)] = {n - 1, n - 1, 0.0};
    } else {
      while (centers[static_cast<std::size_t>(seg + 1)] < p) ++seg;
      const int c0 = centers[static_cast<std::size_t>(seg)];
      const int c1 = centers[static_cast<std::size_t>(seg + 1)];
      taps[static_cast<std::size_t>(p)] = {seg, seg + 1, static_cast<double>(p - c0) / (c1 - c0)};
    }
  }
  return taps;
}

}  // namespace

FlowField upsample_motion(const BlockMotion& m, int width, int height, int from_frame) {
  FlowField f = FlowField::zero(from_frame, width, height);
  const auto tx = axis_taps(m.cols, m.block, width);
  const auto ty = axis_taps(m.rows, m.block, height);
  auto at = [&](const std::vector<int>& v, int col, int row) {
    return static_cast<double>(v[static_cast<std::size_t>(row) * m.cols + col]);
  };
  for (int y = 0; y < height; ++y) {
    const Tap& vy = ty[static_cast<std::size_t>(y)];
    for (int x = 0; x < width; ++x) {
      const Tap& vx = tx[static_cast<std::size_t>(x)];
      auto lerp2 = [&](const std::vector<int>& v) {
        const double top = at(v, vx.i0, vy.i0) * (1 - vx.t) + at(v, vx.i1, vy.i0) * vx.t;
        const double bot = at(v, vx.i0, vy.i1) * (1 - vx.t) + at(v, vx.i1, vy.i1) * vx.t;
        return top * (1 - vy.t) + bot * vy.t;
      };
      f.dx.at(x, y) = static_cast<float>(lerp2(m.dx));
      f.dy.at(x, y) = static_cast<float>(lerp2(m.dy));
    }
  }
  return f;
}

FlowField estimate_flow(const FrameBuffer& a, const FrameBuffer& b, const FlowParams& params) {
  const BlockMotion m = match_blocks(a.luma, b.luma, params);
  return upsample_motion(m, a.luma.width(), a.luma.height(), a.index);
}

FlowField crop(const FlowField& field, int width, int height) {
  FlowField out = FlowField::zero(field.from_frame, width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      out.dx.at(x, y) = field.dx.at(x, y);
      out.dy.at(x, y) = field.dy.at(x, y);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Store

FlowStore::FlowStore(std::filesystem::path dir, std::size_t cache_capacity)
    : dir_(std::move(dir)), cache_capacity_(std::max<std::size_t>(1, cache_capacity)) {
  std::filesystem::create_directories(*dir_);
}

std::filesystem::path FlowStore::file_for(int from_frame) const {
  char name[32];
  std::snprintf(name, sizeof name, "flow_%06d.vflo", from_frame);
  return *dir_ / name;
}

void FlowStore::put(const FlowField& field) {
  std::lock_guard lock(mu_);
  if (dir_) {
    const auto path = file_for(field.from_frame);
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot create " + tmp);
      export_flow(std::span(&field, 1), out);
      out.flush();
      if (!out) throw IoError("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
    cache_.erase(field.from_frame);
    cache_order_.remove(field.from_frame);
  } else {
    cache_[field.from_frame] = std::make_shared<const FlowField>(field);
  }
  ++writes_;
}

std::shared_ptr<const FlowField> FlowStore::get(int from_frame) const {
  std::lock_guard lock(mu_);
  if (auto it = cache_.find(from_frame); it != cache_.end()) {
    if (dir_) {
      cache_order_.remove(from_frame);
      cache_order_.push_back(from_frame);
    }
    return it->second;
  }
  if (!dir_) return nullptr;
  const auto path = file_for(from_frame);
  std::ifstream in(path, std::ios::binary);
  if (!in) return nullptr;
  auto fields = import_flow(in);
  if (fields.size() != 1 || fields[0].from_frame != from_frame) {
    throw FormatError("flow store: unexpected content in " + path.string());
  }
  auto ptr = std::make_shared<const FlowField>(std::move(fields[0]));
  cache_[from_frame] = ptr;
  cache_order_.push_back(from_frame);
  while (cache_order_.size() > cache_capacity_) {
    cache_.erase(cache_order_.front());
    cache_order_.pop_front();
  }
  return ptr;
}

bool FlowStore::contains(int from_frame) const {
  std::lock_guard lock(mu_);
  if (!dir_) return cache_.count(from_frame) != 0;
  return std::filesystem::exists(file_for(from_frame));
}

int FlowStore::count() const {
  std::lock_guard lock(mu_);
  if (!dir_) return static_cast<int>(cache_.size());
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(*dir_)) {
    if (e.path().extension() == ".vflo") ++n;
  }
  return n;
}

int FlowStore::writes() const {
  std::lock_guard lock(mu_);
  return writes_;
}

int precompute_sequence(const FrameSequence& seq, const FlowParams& params, FlowStore& store) {
  validate(params);
  if (seq.frames.size() < 2) throw ArgumentError("flow precompute needs at least 2 frames");
  int present = 0;
  for (std::size_t t = 0; t + 1 < seq.frames.size(); ++t) {
    const int from = static_cast<int>(t);
    if (!store.contains(from)) {
      FlowField f = estimate_flow(seq.frames[t], seq.frames[t + 1], params);
      f.from_frame = from;
      store.put(crop(f, seq.orig_width, seq.orig_height));
    }
    ++present;
  }
  return present;
}

// ---------------------------------------------------------------------------
// VFLO

void export_flow(std::span<const FlowField> fields, std::ostream& out) {
  const int w = fields.empty() ? 0 : fields.front().width();
  const int h = fields.empty() ? 0 : fields.front().height();
  binio::put_magic(out, "VFLO");
  binio::put_u32(out, kFlowVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(w));
  binio::put_u32(out, static_cast<std::uint32_t>(h));
  binio::put_u32(out, static_cast<std::uint32_t>(fields.size()));
  for (const auto& f : fields) {
    if (f.width() != w || f.height() != h || f.dy.width() != w || f.dy.height() != h) {
      throw ArgumentError("flow: fields in one container must share dimensions");
    }
    binio::put_u32(out, static_cast<std::uint32_t>(f.from_frame));
    for (float v : f.dx.values()) binio::put_f32(out, v);
    for (float v : f.dy.values()) binio::put_f32(out, v);
  }
  if (!out) throw IoError("flow: write failed");
}

std::vector<FlowField> import_flow(std::istream& in) {
  binio::Reader r(in, "vflo");
  r.expect_magic("VFLO");
  r.expect_version(kFlowVersion);
  const std::uint32_t w = r.u32();
  const std::uint32_t h = r.u32();
  const std::uint32_t n = r.u32();
  if (n > 0 && (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16))) {
    throw FormatError("vflo: invalid dimensions " + std::to_string(w) + "x" + std::to_string(h));
  }
  std::vector<FlowField> fields;
  fields.reserve(std::min<std::uint32_t>(n, 4096));
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 4);
  auto read_grid = [&](Grid<float>& g, long index) {
    r.bytes(raw.data(), raw.size(), index);
    auto out = g.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
      const unsigned char* b = raw.data() + 4 * i;
      const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                                 (static_cast<std::uint32_t>(b[1]) << 8) |
                                 (static_cast<std::uint32_t>(b[2]) << 16) |
                                 (static_cast<std::uint32_t>(b[3]) << 24);
      out[i] = std::bit_cast<float>(bits);
    }
  };
  for (std::uint32_t i = 0; i < n; ++i) {
    FlowField f = FlowField::zero(0, static_cast<int>(w), static_cast<int>(h));
    f.from_frame = static_cast<int>(r.u32(static_cast<long>(i)));
    read_grid(f.dx, static_cast<long>(i));
    read_grid(f.dy, static_cast<long>(i));
    fields.push_back(std::move(f));
  }
  return fields;
}

}  // namespace vannot
