#include "cdstore/caont.hpp"

#include <algorithm>
#include <string>

#include "cdstore/crypto.hpp"
#include "cdstore/error.hpp"

namespace cdstore {

namespace {

Digest xor_digest(const Digest& a, const Digest& b) {
  Digest out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] ^ b[i];
  return out;
}

// Advances `combo` (strictly increasing positions into [0, total)) to the next
// combination in lexicographic order; false once exhausted.
bool next_combination(std::vector<std::size_t>& combo, std::size_t total) {
  const std::size_t k = combo.size();
  for (std::size_t i = k; i-- > 0;) {
    if (combo[i] < total - k + i) {
      ++combo[i];
      for (std::size_t j = i + 1; j < k; ++j) combo[j] = combo[j - 1] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace

Bytes CaontPackage::serialize() const {
  Bytes out;
  out.reserve(head.size() + tail.size());
  out.insert(out.end(), head.begin(), head.end());
  out.insert(out.end(), tail.begin(), tail.end());
  return out;
}

CaontPackage CaontPackage::parse(ByteView package) {
  require(package.size() >= kTailSize, "CAONT package shorter than its tail");
  CaontPackage p;
  const std::size_t head = package.size() - kTailSize;
  p.head.assign(package.begin(), package.begin() + static_cast<std::ptrdiff_t>(head));
  std::copy(package.begin() + static_cast<std::ptrdiff_t>(head), package.end(), p.tail.begin());
  return p;
}

std::size_t padded_size(std::size_t size, int k) {
  require(k >= 1, "padded_size: k must be positive");
  const auto kk = static_cast<std::size_t>(k);
  const std::size_t rem = (size + kTailSize) % kk;
  return rem == 0 ? size : size + (kk - rem);
}

std::size_t share_size_for(std::size_t size, int k) {
  return (padded_size(size, k) + kTailSize) / static_cast<std::size_t>(k);
}

Secret pad_secret(ByteView data, int k) {
  require(!data.empty(), "pad_secret: empty secret");
  Secret s;
  s.original_size = data.size();
  s.data.assign(padded_size(data.size(), k), 0);
  std::copy(data.begin(), data.end(), s.data.begin());
  return s;
}

CaontPackage caont_transform(const Secret& secret, ByteView salt) {
  const Digest h = crypto::sha256(salt, secret.data);
  CaontPackage p;
  p.head.resize(secret.data.size());
  crypto::aes256_ctr_xor(h, secret.data, p.head);
  p.tail = xor_digest(h, crypto::sha256(p.head));
  return p;
}

Secret caont_invert(const CaontPackage& package, std::size_t original_size, ByteView salt) {
  require(original_size <= package.head.size(), "caont_invert: original size exceeds package head");
  const Digest h = xor_digest(package.tail, crypto::sha256(package.head));
  Secret s;
  s.data.resize(package.head.size());
  crypto::aes256_ctr_xor(h, package.head, s.data);
  if (crypto::sha256(salt, s.data) != h) fail(Errc::integrity_mismatch, "CAONT integrity check failed");
  s.data.resize(original_size);
  s.original_size = original_size;
  return s;
}

ConvergentDispersal::ConvergentDispersal(CodingParams params, Bytes salt)
    : rs_(params), salt_(std::move(salt)) {}

std::vector<ShareSlice> ConvergentDispersal::encode(ByteView secret) const {
  const Secret padded = pad_secret(secret, params().k);
  const CaontPackage package = caont_transform(padded, salt_);
  return rs_.encode(package.serialize());
}

DecodeOutcome ConvergentDispersal::decode(std::span<const ShareSlice> slices,
                                          std::size_t original_size) const {
  const auto k = static_cast<std::size_t>(params().k);
  if (slices.size() < k)
    fail(Errc::insufficient_shares, "decode_secret: " + std::to_string(slices.size()) +
                                        " shares available, need " + std::to_string(k));

  std::vector<const ShareSlice*> sorted;
  for (const auto& s : slices) sorted.push_back(&s);
  std::sort(sorted.begin(), sorted.end(),
            [](const ShareSlice* a, const ShareSlice* b) { return a->index < b->index; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    require(sorted[i]->index >= 0 && sorted[i]->index < params().n, "decode_secret: share index out of range");
    require(i == 0 || sorted[i]->index != sorted[i - 1]->index,
            "decode_secret: duplicate share index " + std::to_string(sorted[i]->index));
  }

  std::vector<std::size_t> combo(k);
  for (std::size_t i = 0; i < k; ++i) combo[i] = i;
  std::vector<ShareSlice> subset(k);
  DecodeOutcome outcome;
  do {
    ++outcome.attempts;
    for (std::size_t i = 0; i < k; ++i) subset[i] = *sorted[combo[i]];
    try {
      // Slices of mismatched length cannot come from one encoding; treat the
      // subset as corrupt rather than a caller error.
      bool uniform = std::all_of(subset.begin(), subset.end(),
                                 [&](const ShareSlice& s) { return s.data.size() == subset[0].data.size(); });
      if (!uniform) continue;
      Bytes package = rs_.decode(subset);
      if (package.size() < kTailSize || package.size() - kTailSize < original_size) continue;
      Secret secret = caont_invert(CaontPackage::parse(package), original_size, salt_);
      outcome.data = std::move(secret.data);
      for (const auto& s : subset) outcome.used_indices.push_back(s.index);
      return outcome;
    } catch (const Error& e) {
      if (e.code() != Errc::integrity_mismatch) throw;
    }
  } while (next_combination(combo, sorted.size()));

  fail(Errc::all_subsets_failed,
       "decode_secret: no k-subset of " + std::to_string(sorted.size()) + " shares verified");
}

std::vector<ShareSlice> encode_secret(ByteView secret, const CodingParams& params, ByteView salt) {
  return ConvergentDispersal(params, Bytes(salt.begin(), salt.end())).encode(secret);
}

DecodeOutcome decode_secret(std::span<const ShareSlice> slices, std::size_t original_size,
                            const CodingParams& params, ByteView salt) {
  return ConvergentDispersal(params, Bytes(salt.begin(), salt.end())).decode(slices, original_size);
}

}  // namespace cdstore
