#pragma once

// Little-endian helpers shared by the VIMP/VDQP/VFLO/VMCK codecs.

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "vannot/errors.hpp"

namespace vannot::binio {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff),
                              static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

inline void put_u16(std::ostream& out, std::uint16_t v) {
  const std::array<char, 2> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b.data(), 2);
}

inline void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

inline void put_magic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

class Reader {
 public:
  Reader(std::istream& in, std::string format) : in_(in), format_(std::move(format)) {}

  void expect_magic(std::string_view magic) {
    std::string got(magic.size(), '\0');
    in_.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (in_.gcount() != static_cast<std::streamsize>(magic.size()) || got != magic) {
      throw FormatError(format_ + ": magic mismatch (expected '" + std::string(magic) + "')");
    }
  }

  std::uint32_t u32(long index = -1) {
    unsigned char b[4];
    bytes(b, 4, index);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }

  std::uint16_t u16(long index = -1) {
    unsigned char b[2];
    bytes(b, 2, index);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }

  float f32(long index = -1) { return std::bit_cast<float>(u32(index)); }

  void bytes(void* dst, std::size_t n, long index = -1) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      std::string what = format_ + ": truncated";
      if (index >= 0) what += " at entry " + std::to_string(index);
      throw TruncationError(what, index);
    }
  }

  void expect_version(std::uint32_t version) {
    const std::uint32_t v = u32();
    if (v != version) {
      throw FormatError(format_ + ": unsupported version " + std::to_string(v));
    }
  }

  const std::string& format() const { return format_; }

 private:
  std::istream& in_;
  std::string format_;
};

}  // namespace vannot::binio
