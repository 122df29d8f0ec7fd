#include "cdstore/gf256.hpp"

#include "cdstore/error.hpp"

namespace cdstore::gf {

namespace {

Tables build_tables() {
  Tables t;
  unsigned x = 1;
  for (int i = 0; i < 255; ++i) {
    t.exp[i] = static_cast<std::uint8_t>(x);
    t.log[x] = static_cast<std::uint8_t>(i);
    x <<= 1;
    if (x & 0x100) x ^= kPolynomial;
  }
  for (int i = 255; i < 512; ++i) t.exp[i] = t.exp[i - 255];
  for (int a = 1; a < 256; ++a)
    for (int b = 1; b < 256; ++b) t.mul[a][b] = t.exp[t.log[a] + t.log[b]];
  return t;
}

}  // namespace

const Tables& tables() {
  static const Tables t = build_tables();
  return t;
}

std::uint8_t inv(std::uint8_t a) {
  require(a != 0, "gf::inv of zero");
  const Tables& t = tables();
  return t.exp[255 - t.log[a]];
}

std::uint8_t div(std::uint8_t a, std::uint8_t b) {
  require(b != 0, "gf::div by zero");
  if (a == 0) return 0;
  const Tables& t = tables();
  return t.exp[t.log[a] + 255 - t.log[b]];
}

void mul_add_region(std::uint8_t c, ByteView src, MutableByteView dst) {
  require(src.size() == dst.size(), "mul_add_region: size mismatch");
  if (c == 0) return;
  const std::size_t n = src.size();
  if (c == 1) {
    for (std::size_t i = 0; i < n; ++i) dst[i] ^= src[i];
    return;
  }
  const auto& row = tables().mul[c];
  for (std::size_t i = 0; i < n; ++i) dst[i] ^= row[src[i]];
}

}  // namespace cdstore::gf
