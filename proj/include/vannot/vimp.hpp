#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "vannot/importance.hpp"

namespace vannot {

// Importance-volume container:
//   "VIMP" u32 version(=1) u32 width u32 height u32 frame_count
//   frame_count row-major byte grids
// All integers little-endian.
inline constexpr std::uint32_t kVimpVersion = 1;

void write_vimp(const ImportanceVolume& vol, std::ostream& out);
ImportanceVolume read_vimp(std::istream& in);

std::string vimp_bytes(const ImportanceVolume& vol);
ImportanceVolume vimp_from_bytes(const std::string& bytes);

void write_vimp_file(const ImportanceVolume& vol, const std::filesystem::path& path);
ImportanceVolume read_vimp_file(const std::filesystem::path& path);

}  // namespace vannot
