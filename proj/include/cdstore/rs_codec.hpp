#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cdstore/types.hpp"

namespace cdstore {

/// (n, k) dispersal parameters: n shares, any k reconstruct.
struct CodingParams {
  int n = 4;
  int k = 3;

  /// Throws contract_violation unless n > k >= 1 and the Cauchy points fit
  /// in GF(2^8) (n <= 255, n + k <= 256).
  void validate() const;

  friend bool operator==(const CodingParams&, const CodingParams&) = default;
};

struct ShareSlice {
  int index = 0;
  Bytes data;

  friend bool operator==(const ShareSlice&, const ShareSlice&) = default;
};

/// Row-major matrix over GF(2^8).
struct GfMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> cells;

  GfMatrix() = default;
  GfMatrix(int r, int c) : rows(r), cols(c), cells(static_cast<std::size_t>(r) * c, 0) {}

  std::uint8_t& at(int r, int c) { return cells[static_cast<std::size_t>(r) * cols + c]; }
  std::uint8_t at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c]; }
};

/// n x k generator: identity on top, Cauchy rows 1 / (i ^ (n + j)) for
/// parity row i in [k, n).
GfMatrix generator_matrix(const CodingParams& params);

/// Gauss-Jordan inverse; nullopt when singular.
std::optional<GfMatrix> invert(const GfMatrix& m);

/// Systematic Reed-Solomon codec. Immutable after construction; safe to share
/// across threads.
class ReedSolomon {
 public:
  explicit ReedSolomon(CodingParams params);

  const CodingParams& params() const { return params_; }
  const GfMatrix& generator() const { return generator_; }

  /// Splits `package` into k equal segments (its length must be a multiple
  /// of k) and appends n - k parity slices.
  std::vector<ShareSlice> encode(ByteView package) const;

  /// Reconstructs the package from at least k slices. When more than k are
  /// given, the k lowest indices are used.
  Bytes decode(std::span<const ShareSlice> slices) const;

 private:
  CodingParams params_;
  GfMatrix generator_;
};

std::vector<ShareSlice> rs_encode(ByteView package, const CodingParams& params);
Bytes rs_decode(std::span<const ShareSlice> slices, const CodingParams& params);

}  // namespace cdstore
