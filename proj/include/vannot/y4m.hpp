#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>

#include "vannot/video.hpp"

namespace vannot {

// Reads a YUV4MPEG2 stream (4:2:0 or mono, 8-bit, progressive). Throws
// FormatError for a malformed header and TruncationError for a short frame.
FrameSequence load_y4m(std::istream& in);
FrameSequence load_y4m_file(const std::filesystem::path& path);

// Writes the unpadded region of every frame. Returns the number of bytes
// written.
std::size_t write_y4m(const FrameSequence& seq, std::ostream& out);
std::size_t write_y4m_file(const FrameSequence& seq, const std::filesystem::path& path);

}  // namespace vannot
