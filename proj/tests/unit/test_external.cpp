#include <doctest.h>

#include <filesystem>
#include <random>
#include <unistd.h>

#include "test_support.hpp"
#include "vannot/errors.hpp"
#include "vannot/external_encoder.hpp"
#include "vannot/metrics.hpp"
#include "vannot/y4m.hpp"

using namespace vannot;
namespace fs = std::filesystem;

namespace {

const std::string kTemplate = std::string("python3 ") + VANNOT_TEST_DIR +
                              "/adapters/fake_encoder.py --pass {pass} --bitrate {bitrate} "
                              "[--dqp {dqp.vdqp}] --stats {statsfile} -o {out} {input.y4m}";

struct Fixture {
  fs::path dir;
  fs::path input;
  FrameSequence seq;

  Fixture() {
    dir = fs::temp_directory_path() / ("vannot-ext-" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::mt19937 rng(61);
    seq = vannot::testing::random_sequence(40, 20, 3, ChromaMode::k420, rng);
    input = dir / "in put.y4m";  // the space exercises quoting
    write_y4m_file(seq, input);
  }
  ~Fixture() { fs::remove_all(dir); }

  ExternalAdapter adapter(const std::string& prefix = "") const {
    return {prefix + kTemplate, dir / "work"};
  }
  EncoderConfig cfg() const {
    EncoderConfig c;
    c.target_bitrate = 300000;
    return c;
  }
};

std::vector<std::string> arg_lines(const fs::path& work) {
  std::vector<std::string> lines;
  std::istringstream in(vannot::testing::read_file(work / "out.bin.args"));
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("render_command") {
  const std::map<std::string, std::string> v{{"a", "1"}, {"b", "two"}};
  CHECK(render_command("x {a} [--b {b}] y", v, true) == "x 1 --b two y");
  CHECK(render_command("x {a} [--b {b}] y", v, false) == "x 1  y");
  CHECK_THROWS_AS(render_command("x {c}", v, true), ArgumentError);
  CHECK_THROWS_AS(render_command("x {a", v, true), ArgumentError);
  CHECK_THROWS_AS(render_command("x [a", v, true), ArgumentError);
  CHECK(shell_quote("it's") == "'it'\\''s'");
}

TEST_CASE("parse_stats") {
  CHECK(parse_stats("frame 0 bits 10\nframe 1 bits 20\n\n") == std::vector<std::uint64_t>{10, 20});
  CHECK_THROWS_AS(parse_stats("frame 0 bits ten\n"), AdapterError);
  CHECK_THROWS_AS(parse_stats("frame 1 bits 10\n"), AdapterError);
  CHECK_THROWS_AS(parse_stats("frame 0 bits 10 extra\n"), AdapterError);
  CHECK_THROWS_AS(parse_stats(""), AdapterError);
}

TEST_CASE("no adapter configured is a capability error") {
  Fixture fx;
  const auto dqp = DeltaQpMap::zero(fx.seq.mb_cols(), fx.seq.mb_rows(), 3);
  CHECK_THROWS_AS(external_encode(fx.input, dqp, fx.cfg(), std::nullopt), CapabilityError);
  CHECK_THROWS_AS(external_encode(fx.input, dqp, fx.cfg(), ExternalAdapter{}), CapabilityError);
}

TEST_CASE("all-zero map runs a plain two-pass encode") {
  Fixture fx;
  const auto dqp = DeltaQpMap::zero(fx.seq.mb_cols(), fx.seq.mb_rows(), 3);
  const auto r = external_encode(fx.input, dqp, fx.cfg(), fx.adapter());
  const auto lines = arg_lines(fx.dir / "work");
  REQUIRE(lines.size() == 2);
  CHECK(lines[0].find("--pass 1 --bitrate 300 --stats") != std::string::npos);
  CHECK(lines[1].find("--pass 2 --bitrate 300 --stats") != std::string::npos);
  for (const auto& l : lines) CHECK(l.find("--dqp") == std::string::npos);
  CHECK(r.codec == "external");
  CHECK(r.per_frame_bits == std::vector<std::uint64_t>(3, 10000));
  CHECK(r.pass1_bits.size() == 3);
  CHECK(r.reconstruction == fx.seq);
  CHECK(is_lossless(r.psnr_overall));
  CHECK(r.bitstream_path == fx.dir / "work" / "out.bin");
}

TEST_CASE("non-zero map passes the VDQP file to both passes") {
  Fixture fx;
  auto dqp = DeltaQpMap::zero(fx.seq.mb_cols(), fx.seq.mb_rows(), 3);
  dqp.frames[1].at(2, 0) = -4.5f;
  external_encode(fx.input, dqp, fx.cfg(), fx.adapter());
  const auto lines = arg_lines(fx.dir / "work");
  REQUIRE(lines.size() == 2);
  for (const auto& l : lines) CHECK(l.find("--dqp " + (fx.dir / "work" / "dqp.vdqp").string()) != std::string::npos);
  CHECK(vannot::testing::read_file(fx.dir / "work" / "dqp.vdqp") == qpmap_bytes(dqp));
}

TEST_CASE("adapter failures carry diagnostics") {
  Fixture fx;
  const auto dqp = DeltaQpMap::zero(fx.seq.mb_cols(), fx.seq.mb_rows(), 3);
  SUBCASE("non-zero exit") {
    try {
      external_encode(fx.input, dqp, fx.cfg(), fx.adapter("FAKE_ENCODER_MODE=fail "));
      FAIL("expected adapter error");
    } catch (const AdapterError& e) {
      CHECK(e.diagnostics().find("simulated failure") != std::string::npos);
    }
  }
  SUBCASE("malformed stats") {
    try {
      external_encode(fx.input, dqp, fx.cfg(), fx.adapter("FAKE_ENCODER_MODE=garbage "));
      FAIL("expected adapter error");
    } catch (const AdapterError& e) {
      CHECK(e.diagnostics().find("not a stats line") != std::string::npos);
    }
  }
  SUBCASE("missing program") {
    CHECK_THROWS_AS(external_encode(fx.input, dqp, fx.cfg(), ExternalAdapter{"/nonexistent/encoder {out}", fx.dir / "w2"}),
                    AdapterError);
  }
}
