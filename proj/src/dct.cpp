#include "vannot/dct.hpp"

#include <cmath>
#include <numbers>

namespace vannot::dct {

namespace {

// basis[k][n] = alpha(k) * cos(pi * (2n + 1) * k / 16)
const std::array<std::array<double, 8>, 8>& basis() {
  static const auto table = [] {
    std::array<std::array<double, 8>, 8> b{};
    for (int k = 0; k < 8; ++k) {
      const double alpha = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int n = 0; n < 8; ++n) {
        b[k][n] = alpha * std::cos(std::numbers::pi * (2 * n + 1) * k / 16.0);
      }
    }
    return b;
  }();
  return table;
}

}  // namespace

Block forward(const Block& px) {
  const auto& c = basis();
  Block tmp{};
  // Rows: tmp[y][u] = sum_x c[u][x] * px[y][x]
  for (int y = 0; y < 8; ++y) {
    for (int u = 0; u < 8; ++u) {
      double s = 0;
      for (int x = 0; x < 8; ++x) s += c[u][x] * px[y * 8 + x];
      tmp[y * 8 + u] = s;
    }
  }
  Block out{};
  for (int v = 0; v < 8; ++v) {
    for (int u = 0; u < 8; ++u) {
      double s = 0;
      for (int y = 0; y < 8; ++y) s += c[v][y] * tmp[y * 8 + u];
      out[v * 8 + u] = s;
    }
  }
  return out;
}

Block inverse(const Block& co) {
  const auto& c = basis();
  Block tmp{};
  // Columns: tmp[y][u] = sum_v c[v][y] * co[v][u]
  for (int y = 0; y < 8; ++y) {
    for (int u = 0; u < 8; ++u) {
      double s = 0;
      for (int v = 0; v < 8; ++v) s += c[v][y] * co[v * 8 + u];
      tmp[y * 8 + u] = s;
    }
  }
  Block out{};
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      double s = 0;
      for (int u = 0; u < 8; ++u) s += c[u][x] * tmp[y * 8 + u];
      out[y * 8 + x] = s;
    }
  }
  return out;
}

}  // namespace vannot::dct
