#pragma once

// Arithmetic in GF(2^8) with reduction polynomial x^8+x^4+x^3+x^2+1 (0x11D).

#include <array>
#include <cstdint>

#include "cdstore/types.hpp"

namespace cdstore::gf {

inline constexpr unsigned kPolynomial = 0x11D;

struct Tables {
  std::array<std::uint8_t, 512> exp{};
  std::array<std::uint8_t, 256> log{};
  // mul[a][b]; 64KB, used by the region kernels.
  std::array<std::array<std::uint8_t, 256>, 256> mul{};
};

const Tables& tables();

inline std::uint8_t mul(std::uint8_t a, std::uint8_t b) { return tables().mul[a][b]; }

inline std::uint8_t add(std::uint8_t a, std::uint8_t b) { return a ^ b; }

/// Multiplicative inverse; a must be non-zero.
std::uint8_t inv(std::uint8_t a);

/// a / b; b must be non-zero.
std::uint8_t div(std::uint8_t a, std::uint8_t b);

/// dst[i] ^= c * src[i]
void mul_add_region(std::uint8_t c, ByteView src, MutableByteView dst);

}  // namespace cdstore::gf
