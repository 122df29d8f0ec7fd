#include "doctest.h"

#include "cdstore/gf256.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace cdstore;

TEST_SUITE("gf256") {
  TEST_CASE("zero and one") {
    CHECK(gf::mul(0, 137) == 0);
    CHECK(gf::mul(1, 137) == 137);
    CHECK(gf::add(0x53, 0x53) == 0);
  }

  TEST_CASE("x^7 times x reduces by the field polynomial") {
    CHECK(gf::mul(0x80, 0x02) == oracle::gf_mul(0x80, 0x02));
    CHECK(gf::mul(0x80, 0x02) == 0x1D);
  }

  TEST_CASE("multiplication table matches shift-and-reduce everywhere") {
    for (unsigned a = 0; a < 256; ++a)
      for (unsigned b = 0; b < 256; ++b)
        REQUIRE(gf::mul(static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b)) ==
                oracle::gf_mul(static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b)));
  }

  TEST_CASE("inverse and division") {
    for (unsigned a = 1; a < 256; ++a) {
      const auto x = static_cast<std::uint8_t>(a);
      CHECK(gf::mul(x, gf::inv(x)) == 1);
      CHECK(gf::inv(x) == oracle::gf_inv(x));
      CHECK(gf::div(gf::mul(x, 0xA7), 0xA7) == x);
    }
    CHECK_THROWS(gf::inv(0));
  }

  TEST_CASE("mul_add_region accumulates a scaled copy") {
    const auto src = testutil::random_bytes(1000, 1);
    auto dst = testutil::random_bytes(1000, 2);
    const auto before = dst;
    gf::mul_add_region(0x3C, src, dst);
    for (std::size_t i = 0; i < src.size(); ++i) CHECK(dst[i] == (before[i] ^ oracle::gf_mul(0x3C, src[i])));
  }
}
