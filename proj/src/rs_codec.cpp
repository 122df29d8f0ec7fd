#include "cdstore/rs_codec.hpp"

#include <algorithm>
#include <string>

#include "cdstore/error.hpp"
#include "cdstore/gf256.hpp"

namespace cdstore {

void CodingParams::validate() const {
  if (k < 1 || n <= k)
    fail(Errc::contract_violation,
         "coding params require n > k >= 1 (n=" + std::to_string(n) + ", k=" + std::to_string(k) + ")");
  if (n > 255 || n + k > 256)
    fail(Errc::contract_violation, "coding params exceed GF(2^8) Cauchy construction (n <= 255, n + k <= 256)");
}

GfMatrix generator_matrix(const CodingParams& params) {
  params.validate();
  GfMatrix g(params.n, params.k);
  for (int i = 0; i < params.k; ++i) g.at(i, i) = 1;
  for (int i = params.k; i < params.n; ++i)
    for (int j = 0; j < params.k; ++j)
      g.at(i, j) = gf::inv(static_cast<std::uint8_t>(i ^ (params.n + j)));
  return g;
}

std::optional<GfMatrix> invert(const GfMatrix& m) {
  require(m.rows == m.cols, "invert: matrix not square");
  const int size = m.rows;
  GfMatrix a = m;
  GfMatrix out(size, size);
  for (int i = 0; i < size; ++i) out.at(i, i) = 1;

  for (int col = 0; col < size; ++col) {
    int pivot = col;
    while (pivot < size && a.at(pivot, col) == 0) ++pivot;
    if (pivot == size) return std::nullopt;
    if (pivot != col) {
      for (int j = 0; j < size; ++j) {
        std::swap(a.at(col, j), a.at(pivot, j));
        std::swap(out.at(col, j), out.at(pivot, j));
      }
    }
    std::uint8_t scale = gf::inv(a.at(col, col));
    for (int j = 0; j < size; ++j) {
      a.at(col, j) = gf::mul(a.at(col, j), scale);
      out.at(col, j) = gf::mul(out.at(col, j), scale);
    }
    for (int r = 0; r < size; ++r) {
      if (r == col) continue;
      std::uint8_t f = a.at(r, col);
      if (f == 0) continue;
      for (int j = 0; j < size; ++j) {
        a.at(r, j) ^= gf::mul(f, a.at(col, j));
        out.at(r, j) ^= gf::mul(f, out.at(col, j));
      }
    }
  }
  return out;
}

ReedSolomon::ReedSolomon(CodingParams params)
    : params_(params), generator_(generator_matrix(params)) {}

std::vector<ShareSlice> ReedSolomon::encode(ByteView package) const {
  const auto k = static_cast<std::size_t>(params_.k);
  if (package.size() % k != 0)
    fail(Errc::contract_violation, "rs_encode: package length " + std::to_string(package.size()) +
                                       " not divisible by k=" + std::to_string(k));
  const std::size_t seg = package.size() / k;
  std::vector<ShareSlice> out(static_cast<std::size_t>(params_.n));
  for (int i = 0; i < params_.k; ++i) {
    out[i].index = i;
    auto begin = package.begin() + static_cast<std::ptrdiff_t>(seg * i);
    out[i].data.assign(begin, begin + static_cast<std::ptrdiff_t>(seg));
  }
  for (int i = params_.k; i < params_.n; ++i) {
    out[i].index = i;
    out[i].data.assign(seg, 0);
    for (int j = 0; j < params_.k; ++j)
      gf::mul_add_region(generator_.at(i, j), package.subspan(seg * j, seg), out[i].data);
  }
  return out;
}

Bytes ReedSolomon::decode(std::span<const ShareSlice> slices) const {
  const int k = params_.k;
  if (static_cast<int>(slices.size()) < k)
    fail(Errc::insufficient_shares, "rs_decode: " + std::to_string(slices.size()) +
                                        " slices given, need " + std::to_string(k));

  std::vector<const ShareSlice*> sorted;
  sorted.reserve(slices.size());
  std::vector<bool> seen(static_cast<std::size_t>(params_.n), false);
  for (const auto& s : slices) {
    require(s.index >= 0 && s.index < params_.n, "rs_decode: share index out of range");
    require(!seen[s.index], "rs_decode: duplicate share index " + std::to_string(s.index));
    require(s.data.size() == slices[0].data.size(), "rs_decode: slices differ in length");
    seen[s.index] = true;
    sorted.push_back(&s);
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const ShareSlice* a, const ShareSlice* b) { return a->index < b->index; });
  sorted.resize(static_cast<std::size_t>(k));

  const std::size_t seg = sorted[0]->data.size();
  Bytes out(seg * static_cast<std::size_t>(k), 0);

  // Lowest k indices are exactly 0..k-1 only when all data slices survived.
  if (sorted.back()->index == k - 1) {
    for (int i = 0; i < k; ++i)
      std::copy(sorted[i]->data.begin(), sorted[i]->data.end(), out.begin() + static_cast<std::ptrdiff_t>(seg * i));
    return out;
  }

  GfMatrix sub(k, k);
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < k; ++c) sub.at(r, c) = generator_.at(sorted[r]->index, c);
  auto inverse = invert(sub);
  if (!inverse) fail(Errc::contract_violation, "rs_decode: singular decoding matrix");

  for (int r = 0; r < k; ++r) {
    MutableByteView dst(out.data() + seg * r, seg);
    for (int c = 0; c < k; ++c) gf::mul_add_region(inverse->at(r, c), sorted[c]->data, dst);
  }
  return out;
}

std::vector<ShareSlice> rs_encode(ByteView package, const CodingParams& params) {
  return ReedSolomon(params).encode(package);
}

Bytes rs_decode(std::span<const ShareSlice> slices, const CodingParams& params) {
  return ReedSolomon(params).decode(slices);
}

}  // namespace cdstore
