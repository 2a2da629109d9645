#include <doctest.h>

#include <random>
#include <sstream>

#include "test_support.hpp"
#include "vannot/errors.hpp"
#include "vannot/qp_map.hpp"

using namespace vannot;

TEST_CASE("block_means examples") {
  SUBCASE("uniform 127") {
    const auto means = block_means(new_volume(48, 32, 2));
    REQUIRE(means.size() == 2);
    CHECK(means[0].width() == 3);
    CHECK(means[0].height() == 2);
    for (double v : means[1].values()) CHECK(v == 127.0);
  }
  SUBCASE("one aligned 255 block") {
    auto vol = new_volume(48, 48, 1);
    for (auto& v : vol.maps[0].values()) v = 0;
    for (int y = 16; y < 32; ++y) {
      for (int x = 16; x < 32; ++x) vol.maps[0].at(x, y) = 255;
    }
    const auto g = block_means(vol)[0];
    CHECK(g.at(1, 1) == 255.0);
    CHECK(g.at(0, 1) == 0.0);
    CHECK(g.at(1, 0) == 0.0);
    CHECK(g.at(2, 2) == 0.0);
  }
}

TEST_CASE("block_means on 800x450 matches a per-pixel brute force") {
  std::mt19937 rng(31);
  ImportanceVolume vol = new_volume(800, 450, 1);
  vol.maps[0] = vannot::testing::random_plane(800, 450, rng);
  const auto g = block_means(vol)[0];
  CHECK(g.width() == 50);
  CHECK(g.height() == 29);
  for (int by = 0; by < 29; ++by) {
    for (int bx = 0; bx < 50; ++bx) {
      long sum = 0;
      int count = 0;
      for (int y = 0; y < 450; ++y) {
        for (int x = 0; x < 800; ++x) {
          if (x / 16 == bx && y / 16 == by) {
            sum += vol.maps[0].at(x, y);
            ++count;
          }
        }
      }
      if (by == 28) REQUIRE(count == 16 * 2);
      REQUIRE(g.at(bx, by) == doctest::Approx(static_cast<double>(sum) / count).epsilon(1e-12));
    }
  }
}

TEST_CASE("delta_qp_for_mean endpoints") {
  CHECK(delta_qp_for_mean(255.0) == -10.f);
  CHECK(delta_qp_for_mean(0.0) == 10.f);
  CHECK(delta_qp_for_mean(127.5) == 0.f);
  CHECK(delta_qp_for_mean(127.0) == doctest::Approx(10.0 / 255.0));
  CHECK(delta_qp_for_mean(255.0, 5.0) == -5.f);
  CHECK(delta_qp_for_mean(400.0) == -10.f);
  CHECK(delta_qp_for_mean(-3.0) == 10.f);
}

TEST_CASE("to_delta_qp is strictly decreasing and bounded on random grids") {
  std::mt19937 rng(32);
  std::uniform_real_distribution<double> mean(-50.0, 300.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Grid<double>> means{Grid<double>(4, 3)};
    for (auto& v : means[0].values()) v = mean(rng);
    const auto m = to_delta_qp(means);
    CHECK(m.mb_cols == 4);
    CHECK(m.mb_rows == 3);
    auto src = means[0].values();
    auto dst = m.frames[0].values();
    for (std::size_t i = 0; i < src.size(); ++i) {
      REQUIRE(dst[i] >= -10.f);
      REQUIRE(dst[i] <= 10.f);
      for (std::size_t j = 0; j < src.size(); ++j) {
        const bool in_range = src[i] >= 0 && src[i] <= 255 && src[j] >= 0 && src[j] <= 255;
        if (in_range && src[i] > src[j] + 1e-3) REQUIRE(dst[i] < dst[j]);
      }
    }
  }
}

TEST_CASE("a uniform volume yields a uniform map") {
  const auto m = importance_to_delta_qp(new_volume(64, 48, 3));
  for (const auto& f : m.frames) {
    for (float v : f.values()) CHECK(v == m.frames[0].at(0, 0));
  }
  std::vector<Grid<double>> half{Grid<double>(2, 2, 127.5)};
  CHECK(to_delta_qp(half).all_zero());
}

TEST_CASE("VDQP golden file") {
  const std::string golden = vannot::testing::read_file(vannot::testing::golden_dir() / "small.vdqp");
  std::istringstream in(golden);
  const auto m = parse_qpmap(in);
  CHECK(m.mb_cols == 2);
  CHECK(m.mb_rows == 1);
  REQUIRE(m.frame_count() == 2);
  CHECK(m.at(0, 0, 0) == -10.f);
  CHECK(m.at(0, 1, 0) == 0.5f);
  CHECK(m.at(1, 0, 0) == 3.25f);
  CHECK(m.at(1, 1, 0) == 10.f);
  CHECK(qpmap_bytes(m) == golden);
}

TEST_CASE("VDQP round-trip, size and errors") {
  std::mt19937 rng(33);
  std::uniform_real_distribution<float> d(-10.f, 10.f);
  DeltaQpMap m = DeltaQpMap::zero(7, 5, 4);
  for (auto& f : m.frames) {
    for (auto& v : f.values()) v = d(rng);
  }
  std::stringstream buf;
  serialize_qpmap(m, buf);
  CHECK(parse_qpmap(buf) == m);

  CHECK(qpmap_bytes(DeltaQpMap::zero(50, 29, 90)).size() == 20u + 90u * 50u * 29u * 4u);

  std::string bytes = qpmap_bytes(m);
  std::string zero_cols = bytes;
  zero_cols[8] = zero_cols[9] = zero_cols[10] = zero_cols[11] = 0;
  std::istringstream zc(zero_cols);
  CHECK_THROWS_AS(parse_qpmap(zc), FormatError);
  std::istringstream magic("VDQX" + bytes.substr(4));
  CHECK_THROWS_AS(parse_qpmap(magic), FormatError);
  std::istringstream cut(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(parse_qpmap(cut), TruncationError);
}
