#include "vannot/vimp.hpp"

#include <fstream>
#include <sstream>

#include "binio.hpp"
#include "vannot/errors.hpp"

namespace vannot {

namespace {
constexpr std::uint32_t kMaxDim = 1u << 16;
constexpr std::uint32_t kMaxFrames = 1u << 20;
}  // namespace

void write_vimp(const ImportanceVolume& vol, std::ostream& out) {
  binio::put_magic(out, "VIMP");
  binio::put_u32(out, kVimpVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(vol.width));
  binio::put_u32(out, static_cast<std::uint32_t>(vol.height));
  binio::put_u32(out, static_cast<std::uint32_t>(vol.frame_count()));
  for (const auto& m : vol.maps) {
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size()));
  }
  if (!out) throw IoError("vimp: write failed");
}

ImportanceVolume read_vimp(std::istream& in) {
  binio::Reader r(in, "vimp");
  r.expect_magic("VIMP");
  r.expect_version(kVimpVersion);
  const std::uint32_t w = r.u32();
  const std::uint32_t h = r.u32();
  const std::uint32_t n = r.u32();
  if (w == 0 || h == 0 || n == 0 || w > kMaxDim || h > kMaxDim || n > kMaxFrames) {
    throw FormatError("vimp: invalid dimensions " + std::to_string(w) + "x" + std::to_string(h) +
                      "x" + std::to_string(n));
  }
  ImportanceVolume vol;
  vol.width = static_cast<int>(w);
  vol.height = static_cast<int>(h);
  vol.maps.reserve(n);
  for (std::uint32_t f = 0; f < n; ++f) {
    Plane m(vol.width, vol.height);
    r.bytes(m.data(), m.size(), static_cast<long>(f));
    vol.maps.push_back(std::move(m));
  }
  return vol;
}

std::string vimp_bytes(const ImportanceVolume& vol) {
  std::ostringstream out(std::ios::binary);
  write_vimp(vol, out);
  return std::move(out).str();
}

ImportanceVolume vimp_from_bytes(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_vimp(in);
}

void write_vimp_file(const ImportanceVolume& vol, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  write_vimp(vol, out);
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

ImportanceVolume read_vimp_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_vimp(in);
}

}  // namespace vannot
