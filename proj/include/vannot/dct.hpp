#pragma once

#include <array>

namespace vannot::dct {

using Block = std::array<double, 64>;  // row-major 8x8

// Orthonormal 8x8 type-II DCT and its inverse. Coefficient (u, v) is stored
// at index v * 8 + u (u horizontal frequency).
Block forward(const Block& pixels);
Block inverse(const Block& coeffs);

}  // namespace vannot::dct
