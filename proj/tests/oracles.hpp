#pragma once

// Reference implementations written independently of the library, shared by
// the unit tests and the acceptance gate.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <random>
#include <tuple>
#include <utility>
#include <vector>

#include "test_support.hpp"
#include "vannot/flow.hpp"
#include "vannot/importance.hpp"

namespace vannot::oracles {

// Exhaustive SAD search written independently of the estimator: every
// candidate is scored in full and the winner is the lexicographic minimum of
// (sad, |dx|+|dy|, dy, dx).
inline BlockMotion brute_force(const Plane& a, const Plane& b, int block, int range) {
  BlockMotion m;
  m.block = block;
  m.cols = (a.width() + block - 1) / block;
  m.rows = (a.height() + block - 1) / block;
  for (int by = 0; by < m.rows; ++by) {
    for (int bx = 0; bx < m.cols; ++bx) {
      const int x0 = bx * block, y0 = by * block;
      const int w = std::min(block, a.width() - x0), h = std::min(block, a.height() - y0);
      std::tuple<long, int, int, int> best{-1, 0, 0, 0};
      for (int dy = -range; dy <= range; ++dy) {
        for (int dx = -range; dx <= range; ++dx) {
          if (x0 + dx < 0 || y0 + dy < 0 || x0 + dx + w > b.width() || y0 + dy + h > b.height()) continue;
          long sad = 0;
          for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) sad += std::abs(a.at(x0 + x, y0 + y) - b.at(x0 + x + dx, y0 + y + dy));
          }
          const std::tuple<long, int, int, int> cand{sad, std::abs(dx) + std::abs(dy), dy, dx};
          if (std::get<0>(best) < 0 || cand < best) best = cand;
        }
      }
      m.dx.push_back(std::get<3>(best));
      m.dy.push_back(std::get<2>(best));
    }
  }
  return m;
}

inline Plane circular_shift(const Plane& a, int sx, int sy) {
  Plane b(a.width(), a.height());
  const int w = a.width(), h = a.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) b.at(x, y) = a.at(((x - sx) % w + w) % w, ((y - sy) % h + h) % h);
  }
  return b;
}

// Aperiodic smooth texture: white noise under two 9x9 box blurs.
inline Plane blurred_noise(int w, int h, std::mt19937& rng) {
  Plane p = vannot::testing::random_plane(w, h, rng);
  for (int pass = 0; pass < 2; ++pass) {
    Plane q(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        int sum = 0;
        for (int j = -4; j <= 4; ++j) {
          for (int i = -4; i <= 4; ++i) sum += p.at((x + i + w) % w, (y + j + h) % h);
        }
        q.at(x, y) = static_cast<std::uint8_t>(sum / 81);
      }
    }
    p = q;
  }
  // Stretch the contrast back out.
  for (auto& v : p.values()) v = static_cast<std::uint8_t>(std::clamp((v - 128) * 6 + 128, 0, 255));
  return p;
}

// Forward propagation by explicit point-mass bookkeeping: every pixel of the
// running delta is a mass that moves by the flow at its pixel and is shared
// among the four pixels around its landing point. Frame t + k receives
// round(w(k) * mass) on top of its current value, clamped to [0, 255].
inline void propagate(ImportanceVolume& vol, const StrokeDelta& delta,
                      const std::vector<FlowField>& flows, int horizon) {
  const int w = vol.width, h = vol.height;
  std::map<std::pair<int, int>, double> mass;
  for (int y = 0; y < delta.values.height(); ++y) {
    for (int x = 0; x < delta.values.width(); ++x) {
      const int gx = delta.x0 + x, gy = delta.y0 + y;
      const int v = delta.values.at(x, y);
      if (v == 0 || gx < 0 || gy < 0 || gx >= w || gy >= h) continue;
      mass[{gx, gy}] += v;
      Plane& p = vol.maps[static_cast<std::size_t>(delta.frame)];
      p.at(gx, gy) = static_cast<std::uint8_t>(std::clamp(p.at(gx, gy) + v, 0, 255));
    }
  }
  for (int k = 1; k <= horizon && delta.frame + k < vol.frame_count(); ++k) {
    const int from = delta.frame + k - 1;
    if (from >= static_cast<int>(flows.size())) break;
    const FlowField& f = flows[static_cast<std::size_t>(from)];
    std::map<std::pair<int, int>, double> next;
    for (const auto& [pos, m] : mass) {
      const double tx = pos.first + static_cast<double>(f.dx.at(pos.first, pos.second));
      const double ty = pos.second + static_cast<double>(f.dy.at(pos.first, pos.second));
      const int ix = static_cast<int>(std::floor(tx)), iy = static_cast<int>(std::floor(ty));
      const double ax = tx - ix, ay = ty - iy;
      const double share[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
      const int ox[4] = {0, 1, 0, 1}, oy[4] = {0, 0, 1, 1};
      for (int c = 0; c < 4; ++c) {
        const int nx = ix + ox[c], ny = iy + oy[c];
        if (share[c] == 0.0 || nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        next[{nx, ny}] += m * share[c];
      }
    }
    mass = std::move(next);
    const double weight = std::max(0.0, 1.0 - static_cast<double>(k) / horizon);
    Plane& p = vol.maps[static_cast<std::size_t>(delta.frame + k)];
    for (const auto& [pos, m] : mass) {
      if (m == 0.0) continue;
      const double add = std::round(weight * m);
      p.at(pos.first, pos.second) =
          static_cast<std::uint8_t>(std::clamp(p.at(pos.first, pos.second) + add, 0.0, 255.0));
    }
  }
}

}  // namespace vannot::oracles
