#include "vannot/qp_map.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "binio.hpp"
#include "vannot/errors.hpp"
#include "vannot/video.hpp"

namespace vannot {

DeltaQpMap DeltaQpMap::zero(int mb_cols, int mb_rows, int frames) {
  DeltaQpMap m;
  m.mb_cols = mb_cols;
  m.mb_rows = mb_rows;
  m.frames.assign(static_cast<std::size_t>(frames), Grid<float>(mb_cols, mb_rows, 0.f));
  return m;
}

bool DeltaQpMap::all_zero() const {
  for (const auto& f : frames) {
    for (float v : f.values()) {
      if (v != 0.f) return false;
    }
  }
  return true;
}

std::vector<Grid<double>> block_means(const ImportanceVolume& vol) {
  const int cols = (vol.width + kMacroblockSize - 1) / kMacroblockSize;
  const int rows = (vol.height + kMacroblockSize - 1) / kMacroblockSize;
  std::vector<Grid<double>> out;
  out.reserve(vol.maps.size());
  std::vector<std::uint64_t> sums(static_cast<std::size_t>(cols));
  for (const auto& map : vol.maps) {
    Grid<double> g(cols, rows, 0.0);
    for (int by = 0; by < rows; ++by) {
      std::fill(sums.begin(), sums.end(), 0);
      const int y_end = std::min(vol.height, (by + 1) * kMacroblockSize);
      for (int y = by * kMacroblockSize; y < y_end; ++y) {
        const auto row = map.row(y);
        for (int x = 0; x < vol.width; ++x) sums[static_cast<std::size_t>(x / kMacroblockSize)] += row[x];
      }
      const int bh = y_end - by * kMacroblockSize;
      for (int bx = 0; bx < cols; ++bx) {
        const int bw = std::min(vol.width, (bx + 1) * kMacroblockSize) - bx * kMacroblockSize;
        g.at(bx, by) = static_cast<double>(sums[static_cast<std::size_t>(bx)]) / (bw * bh);
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

// Orientation lives here: flip kSign to map importance to coarser quantization.
float delta_qp_for_mean(double mean, double range) {
  constexpr double kSign = 1.0;
  const double v = mean / 255.0;
  const double dqp = kSign * range * (1.0 - 2.0 * v);
  return static_cast<float>(std::clamp(dqp, -range, range));
}

DeltaQpMap to_delta_qp(const std::vector<Grid<double>>& means, double range) {
  DeltaQpMap m;
  if (means.empty()) return m;
  m.mb_cols = means.front().width();
  m.mb_rows = means.front().height();
  for (const auto& g : means) {
    Grid<float> f(g.width(), g.height());
    auto src = g.values();
    auto dst = f.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = delta_qp_for_mean(src[i], range);
    m.frames.push_back(std::move(f));
  }
  return m;
}

DeltaQpMap importance_to_delta_qp(const ImportanceVolume& vol, double range) {
  return to_delta_qp(block_means(normalize(vol).volume), range);
}

void serialize_qpmap(const DeltaQpMap& map, std::ostream& out) {
  binio::put_magic(out, "VDQP");
  binio::put_u32(out, kDqpVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(map.mb_cols));
  binio::put_u32(out, static_cast<std::uint32_t>(map.mb_rows));
  binio::put_u32(out, static_cast<std::uint32_t>(map.frame_count()));
  for (const auto& f : map.frames) {
    if (f.width() != map.mb_cols || f.height() != map.mb_rows) {
      throw ArgumentError("vdqp: frame grid does not match the declared macroblock grid");
    }
    for (float v : f.values()) binio::put_f32(out, v);
  }
  if (!out) throw IoError("vdqp: write failed");
}

DeltaQpMap parse_qpmap(std::istream& in) {
  binio::Reader r(in, "vdqp");
  r.expect_magic("VDQP");
  r.expect_version(kDqpVersion);
  const std::uint32_t cols = r.u32();
  const std::uint32_t rows = r.u32();
  const std::uint32_t n = r.u32();
  if (cols == 0 || rows == 0 || cols > 4096 || rows > 4096) {
    throw FormatError("vdqp: invalid macroblock grid " + std::to_string(cols) + "x" +
                      std::to_string(rows));
  }
  DeltaQpMap m;
  m.mb_cols = static_cast<int>(cols);
  m.mb_rows = static_cast<int>(rows);
  for (std::uint32_t f = 0; f < n; ++f) {
    Grid<float> g(m.mb_cols, m.mb_rows);
    for (float& v : g.values()) v = r.f32(static_cast<long>(f));
    m.frames.push_back(std::move(g));
  }
  return m;
}

std::string qpmap_bytes(const DeltaQpMap& map) {
  std::ostringstream out(std::ios::binary);
  serialize_qpmap(map, out);
  return std::move(out).str();
}

void write_qpmap_file(const DeltaQpMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  serialize_qpmap(map, out);
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

DeltaQpMap read_qpmap_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_qpmap(in);
}

}  // namespace vannot
