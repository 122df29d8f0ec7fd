#include "doctest.h"

#include <random>

#include "cdstore/error.hpp"
#include "cdstore/rs_codec.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace cdstore;

namespace {

std::vector<ShareSlice> pick(const std::vector<ShareSlice>& all, const std::vector<int>& idx) {
  std::vector<ShareSlice> out;
  for (int i : idx) out.push_back(all[static_cast<std::size_t>(i)]);
  return out;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::io;
}

}  // namespace

TEST_SUITE("rs_codec") {
  TEST_CASE("systematic slices are the package thirds") {
    const auto p = testutil::random_bytes(3 * 100, 3);
    const auto slices = rs_encode(p, {4, 3});
    REQUIRE(slices.size() == 4);
    for (int i = 0; i < 3; ++i) {
      CHECK(slices[i].index == i);
      CHECK(slices[i].data == Bytes(p.begin() + 100 * i, p.begin() + 100 * (i + 1)));
    }
  }

  TEST_CASE("all-zero package encodes to all-zero slices") {
    for (CodingParams params : {CodingParams{4, 3}, CodingParams{6, 4}, CodingParams{8, 5}}) {
      const Bytes zero(static_cast<std::size_t>(params.k) * 17, 0);
      for (const auto& s : rs_encode(zero, params)) CHECK(s.data == Bytes(17, 0));
    }
  }

  TEST_CASE("parity of bytes 0..11 matches a naive matrix-vector product") {
    Bytes p(12);
    for (int i = 0; i < 12; ++i) p[i] = static_cast<std::uint8_t>(i);
    const auto slices = rs_encode(p, {4, 3});
    CHECK(slices[3].data == oracle::encode_slice(p, 4, 3, 3));
    // Frozen from the oracle above.
    CHECK(slices[3].data == Bytes{0xa4, 0xc3, 0x6a, 0x0d});
  }

  TEST_CASE("generator matches the Cauchy construction") {
    for (int n = 2; n <= 10; ++n)
      for (int k = 1; k < n; ++k) {
        const auto g = generator_matrix({n, k});
        const auto want = oracle::generator(n, k);
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < k; ++c) REQUIRE(g.at(r, c) == want[r][c]);
      }
  }

  TEST_CASE("every k-subset of generator rows is invertible for n <= 8") {
    for (int n = 2; n <= 8; ++n)
      for (int k = 1; k < n; ++k) {
        const auto g = oracle::generator(n, k);
        for (const auto& rows : testutil::subsets(n, k)) {
          std::vector<std::vector<std::uint8_t>> sub;
          for (int r : rows) sub.push_back(g[r]);
          REQUIRE(oracle::rank(sub) == k);
        }
      }
  }

  TEST_CASE("systematic subset decodes to the concatenation") {
    const auto p = testutil::random_bytes(3 * 64, 4);
    const auto slices = rs_encode(p, {4, 3});
    CHECK(rs_decode(pick(slices, {0, 1, 2}), {4, 3}) == p);
    CHECK(rs_decode(pick(slices, {0, 1, 3}), {4, 3}) == p);
  }

  TEST_CASE("round trip over all k-subsets") {
    std::mt19937_64 rng(5);
    for (CodingParams params : {CodingParams{2, 1}, CodingParams{4, 2}, CodingParams{4, 3}, CodingParams{6, 4},
                                CodingParams{8, 5}, CodingParams{10, 7}}) {
      for (int trial = 0; trial < 5; ++trial) {
        const std::size_t len = static_cast<std::size_t>(params.k) * (1 + rng() % 300);
        const auto p = testutil::random_bytes(len, rng());
        const auto slices = rs_encode(p, params);
        for (const auto& idx : testutil::subsets(params.n, params.k)) {
          auto sub = pick(slices, idx);
          std::shuffle(sub.begin(), sub.end(), rng);
          REQUIRE(rs_decode(sub, params) == p);
        }
      }
    }
  }

  TEST_CASE("extra slices beyond k are accepted") {
    const auto p = testutil::random_bytes(30, 6);
    const auto slices = rs_encode(p, {4, 3});
    CHECK(rs_decode(slices, {4, 3}) == p);
  }

  TEST_CASE("encoding is deterministic and linear") {
    const CodingParams params{6, 4};
    const auto a = testutil::random_bytes(400, 7);
    const auto b = testutil::random_bytes(400, 8);
    Bytes x(400);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = a[i] ^ b[i];
    const auto ea = rs_encode(a, params);
    const auto eb = rs_encode(b, params);
    const auto ex = rs_encode(x, params);
    CHECK(ea == rs_encode(a, params));
    for (int s = 0; s < params.n; ++s)
      for (std::size_t i = 0; i < ex[s].data.size(); ++i) REQUIRE(ex[s].data[i] == (ea[s].data[i] ^ eb[s].data[i]));
  }

  TEST_CASE("contract violations") {
    const auto slices = rs_encode(testutil::random_bytes(30, 9), {4, 3});
    CHECK(code_of([&] { rs_decode(pick(slices, {0, 1}), {4, 3}); }) == Errc::insufficient_shares);
    CHECK(code_of([&] { rs_decode(pick(slices, {0, 0, 1}), {4, 3}); }) == Errc::contract_violation);
    auto uneven = pick(slices, {0, 1, 2});
    uneven[1].data.pop_back();
    CHECK(code_of([&] { rs_decode(uneven, {4, 3}); }) == Errc::contract_violation);
    auto bad_index = pick(slices, {0, 1, 2});
    bad_index[2].index = 4;
    CHECK(code_of([&] { rs_decode(bad_index, {4, 3}); }) == Errc::contract_violation);
    CHECK(code_of([&] { rs_encode(Bytes(31), {4, 3}); }) == Errc::contract_violation);
    CHECK(code_of([] { CodingParams{3, 3}.validate(); }) == Errc::contract_violation);
    CHECK(code_of([] { CodingParams{4, 0}.validate(); }) == Errc::contract_violation);
    CHECK(code_of([] { CodingParams{256, 3}.validate(); }) == Errc::contract_violation);
    CHECK(code_of([] { CodingParams{200, 100}.validate(); }) == Errc::contract_violation);
    CHECK_NOTHROW(CodingParams{255, 1}.validate());
  }
}
