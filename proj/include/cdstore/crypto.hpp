#pragma once

#include "cdstore/types.hpp"

namespace cdstore::crypto {

Digest sha256(ByteView data);

/// SHA-256 over prefix || data without concatenating the two.
Digest sha256(ByteView prefix, ByteView data);

/// out = in XOR AES-256-CTR keystream(key, zero IV). With `in` all zero this
/// is the encryption of a constant zero block under `key`.
void aes256_ctr_xor(const Digest& key, ByteView in, MutableByteView out);

Bytes random_bytes(std::size_t n);

}  // namespace cdstore::crypto
