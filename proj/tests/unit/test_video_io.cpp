#include <doctest.h>

#include <random>
#include <sstream>
#include <string>

#include "test_support.hpp"
#include "vannot/edges.hpp"
#include "vannot/errors.hpp"
#include "vannot/y4m.hpp"

using namespace vannot;
using vannot::testing::random_sequence;

namespace {

std::string y4m_stream(const std::string& header, int frames, std::size_t payload,
                       std::uint8_t fill = 0) {
  std::string s = header + "\n";
  for (int i = 0; i < frames; ++i) {
    s += "FRAME\n";
    s += std::string(payload, static_cast<char>(fill));
  }
  return s;
}

FrameSequence load(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return load_y4m(in);
}

}  // namespace

TEST_CASE("load_y4m pads 800x450 to whole macroblocks") {
  const std::size_t payload = 800 * 450 + 2 * 400 * 225;
  const auto seq = load(y4m_stream("YUV4MPEG2 W800 H450 F30:1 Ip A1:1 C420jpeg", 90, payload, 7));
  CHECK(seq.orig_width == 800);
  CHECK(seq.orig_height == 450);
  CHECK(seq.width == 800);
  CHECK(seq.height == 464);
  CHECK(seq.frames.size() == 90);
  CHECK(seq.frame_rate == Rational{30, 1});
  CHECK(seq.frames[89].index == 89);
  CHECK(seq.frames[0].chroma_u->height() == 232);
}

TEST_CASE("load_y4m single black 16x16 frame needs no padding") {
  const auto seq = load(y4m_stream("YUV4MPEG2 W16 H16 F25:1 C420jpeg", 1, 384, 0));
  CHECK(seq.width == 16);
  CHECK(seq.height == 16);
  REQUIRE(seq.frames.size() == 1);
  for (auto v : seq.frames[0].luma.values()) CHECK(v == 0);
}

TEST_CASE("load_y4m reports truncation with the frame index") {
  std::string s = "YUV4MPEG2 W16 H16 F30:1 C420jpeg\nFRAME\n" + std::string(100, '\0');
  try {
    load(s);
    FAIL("expected truncation");
  } catch (const TruncationError& e) {
    CHECK(e.index() == 0);
  }
  s = y4m_stream("YUV4MPEG2 W16 H16 F30:1 C420jpeg", 2, 384) + "FRAME\n" + std::string(10, 'x');
  try {
    load(s);
    FAIL("expected truncation");
  } catch (const TruncationError& e) {
    CHECK(e.index() == 2);
  }
}

TEST_CASE("load_y4m names the offending header token") {
  auto message = [](const std::string& header) -> std::string {
    try {
      load(y4m_stream(header, 1, 384));
    } catch (const FormatError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message("YUV4MPEG2 W16 Hxx F30:1").find("Hxx") != std::string::npos);
  CHECK(message("YUV4MPEG W16 H16 F30:1").find("YUV4MPEG") != std::string::npos);
  CHECK(message("YUV4MPEG2 W16 H16 F30:0").find("F30:0") != std::string::npos);
  CHECK(message("YUV4MPEG2 W16 H16 F30:1 C444").find("C444") != std::string::npos);
  CHECK(message("YUV4MPEG2 W16 H16 F30:1 Z9").find("Z9") != std::string::npos);
  CHECK(message("YUV4MPEG2 W16 F30:1").find("H") != std::string::npos);
}

TEST_CASE("load_y4m rejects a frame without a FRAME marker") {
  CHECK_THROWS_AS(load("YUV4MPEG2 W16 H16 F30:1\nFRAMX\n" + std::string(384, '\0')), FormatError);
}

TEST_CASE("write_y4m byte counts") {
  std::mt19937 rng(1);
  SUBCASE("4:2:0") {
    const auto seq = random_sequence(16, 16, 1, ChromaMode::k420, rng);
    std::ostringstream out;
    const std::size_t n = write_y4m(seq, out);
    const std::string header = "YUV4MPEG2 W16 H16 F30:1 Ip C420jpeg\n";
    CHECK(n == header.size() + 6 + 16 * 16 * 3 / 2);
    CHECK(out.str().size() == n);
    CHECK(out.str().substr(0, header.size()) == header);
  }
  SUBCASE("mono") {
    const auto seq = random_sequence(16, 16, 2, ChromaMode::kMono, rng);
    std::ostringstream out;
    const std::size_t n = write_y4m(seq, out);
    const std::string header = "YUV4MPEG2 W16 H16 F30:1 Ip Cmono\n";
    CHECK(n == header.size() + 2 * (6 + 256));
  }
  SUBCASE("empty sequence") {
    FrameSequence empty;
    std::ostringstream out;
    CHECK_THROWS_AS(write_y4m(empty, out), ArgumentError);
  }
}

TEST_CASE("y4m round-trip is bit-exact and padding preserves the original region") {
  std::mt19937 rng(42);
  std::uniform_int_distribution<int> dim(1, 70);
  for (int trial = 0; trial < 40; ++trial) {
    const int w = dim(rng);
    const int h = dim(rng);
    const auto chroma = trial % 3 == 0 ? ChromaMode::kMono : ChromaMode::k420;
    const auto seq = random_sequence(w, h, 1 + trial % 4, chroma, rng, {24000, 1001});
    std::stringstream buf;
    write_y4m(seq, buf);
    const auto back = load_y4m(buf);
    REQUIRE(back == seq);

    const auto& luma = seq.frames[0].luma;
    CHECK(luma.width() % 16 == 0);
    CHECK(luma.height() % 16 == 0);
    // Padding replicates the last valid column/row.
    CHECK(luma.at(luma.width() - 1, luma.height() - 1) == luma.at(w - 1, h - 1));
    CHECK(luma.at(luma.width() - 1, 0) == luma.at(w - 1, 0));
  }
}

TEST_CASE("sobel_edges: constant luma gives zero magnitude") {
  const auto mask = sobel_edges(Plane(32, 16, 90), 10);
  for (auto v : mask.magnitude.values()) CHECK(v == 0);
  CHECK(mask.threshold == 10);
}

TEST_CASE("sobel_edges: vertical step saturates at the step") {
  Plane p(32, 16, 0);
  for (int y = 0; y < 16; ++y) {
    for (int x = 16; x < 32; ++x) p.at(x, y) = 255;
  }
  const auto mask = sobel_edges(p, 128);
  for (int y = 0; y < 16; ++y) {
    // Gx = 4 * 255 on both sides of the step, clamped.
    CHECK(mask.magnitude.at(15, y) == 255);
    CHECK(mask.magnitude.at(16, y) == 255);
    for (int x = 0; x < 14; ++x) CHECK(mask.magnitude.at(x, y) == 0);
    for (int x = 18; x < 32; ++x) CHECK(mask.magnitude.at(x, y) == 0);
  }
  CHECK(mask.is_edge(16, 3));
  CHECK_FALSE(mask.is_edge(3, 3));
}

TEST_CASE("sobel_edges: single bright pixel stays within its 3x3 neighbourhood") {
  Plane p(16, 16, 0);
  p.at(7, 9) = 200;
  const auto mask = sobel_edges(p, 1);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const bool near = std::abs(x - 7) <= 1 && std::abs(y - 9) <= 1;
      if (!near) CHECK(mask.magnitude.at(x, y) == 0);
    }
  }
  // Edge-adjacent taps: gx = 2 * 200 at (6, 9); corners gx = gy = 200.
  CHECK(mask.magnitude.at(6, 9) == 255);
  CHECK(mask.magnitude.at(6, 8) == 255);
  CHECK(mask.magnitude.at(7, 9) == 0);
}

TEST_CASE("sobel_edges is translation-equivariant in the interior") {
  std::mt19937 rng(5);
  const Plane base = vannot::testing::random_plane(40, 40, rng);
  for (int dx = -3; dx <= 3; dx += 3) {
    for (int dy = -2; dy <= 2; dy += 2) {
      Plane shifted(40, 40, 0);
      for (int y = 0; y < 40; ++y) {
        for (int x = 0; x < 40; ++x) {
          const int sx = x - dx;
          const int sy = y - dy;
          if (base.contains(sx, sy)) shifted.at(x, y) = base.at(sx, sy);
        }
      }
      const auto a = sobel_edges(base, 0);
      const auto b = sobel_edges(shifted, 0);
      for (int y = 6; y < 34; ++y) {
        for (int x = 6; x < 34; ++x) {
          REQUIRE(b.magnitude.at(x, y) == a.magnitude.at(x - dx, y - dy));
        }
      }
    }
  }
}
