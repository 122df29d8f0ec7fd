#pragma once

// Convergent all-or-nothing transform (OAEP style) composed with systematic
// Reed-Solomon coding: a secret X becomes the package (Y, t) with
//   h = H(salt || X),  Y = X ^ E(h, 0...0),  t = h ^ H(Y)
// and the package is dispersed into n shares, any k of which recover X.

#include <cstddef>
#include <span>
#include <vector>

#include "cdstore/rs_codec.hpp"
#include "cdstore/types.hpp"

namespace cdstore {

inline constexpr std::size_t kTailSize = kDigestSize;

/// A chunk of user data, zero padded so that its package divides evenly.
struct Secret {
  Bytes data;
  std::size_t original_size = 0;
};

struct CaontPackage {
  Bytes head;   // Y, same length as the padded secret
  Digest tail;  // t

  /// Y || t with no framing.
  Bytes serialize() const;
  static CaontPackage parse(ByteView package);
};

/// Padded secret length for `size` input bytes: smallest L >= size with
/// (L + 32) % k == 0.
std::size_t padded_size(std::size_t size, int k);

/// Size of one share produced from a secret of `size` bytes.
std::size_t share_size_for(std::size_t size, int k);

Secret pad_secret(ByteView data, int k);

CaontPackage caont_transform(const Secret& secret, ByteView salt = {});

/// Inverts the transform, verifies H(X) == h and strips padding. Throws
/// integrity_mismatch on failure.
Secret caont_invert(const CaontPackage& package, std::size_t original_size, ByteView salt = {});

struct DecodeOutcome {
  Bytes data;
  /// Number of k-subsets tried, 1 when the first subset verified.
  std::size_t attempts = 0;
  std::vector<int> used_indices;
};

/// CAONT-RS with a fixed deployment salt. Stateless apart from the cached
/// generator matrix, so one instance can serve many threads.
class ConvergentDispersal {
 public:
  explicit ConvergentDispersal(CodingParams params, Bytes salt = {});

  const CodingParams& params() const { return rs_.params(); }
  ByteView salt() const { return salt_; }

  /// Share i is destined for cloud i.
  std::vector<ShareSlice> encode(ByteView secret) const;

  /// Tries k-subsets of `slices` in lexicographic order of sorted indices
  /// until one verifies.
  DecodeOutcome decode(std::span<const ShareSlice> slices, std::size_t original_size) const;

 private:
  ReedSolomon rs_;
  Bytes salt_;
};

std::vector<ShareSlice> encode_secret(ByteView secret, const CodingParams& params, ByteView salt = {});

DecodeOutcome decode_secret(std::span<const ShareSlice> slices, std::size_t original_size,
                            const CodingParams& params, ByteView salt = {});

}  // namespace cdstore
