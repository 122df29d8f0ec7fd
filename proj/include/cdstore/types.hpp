#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cdstore {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using MutableByteView = std::span<std::uint8_t>;

using UserId = std::uint32_t;

inline constexpr std::size_t kDigestSize = 32;

/// SHA-256 sized value used for hash keys and fingerprints.
using Digest = std::array<std::uint8_t, kDigestSize>;

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline ByteView as_bytes(const Digest& d) { return {d.data(), d.size()}; }

std::string to_hex(ByteView data);
Bytes from_hex(std::string_view hex);

inline std::string to_hex(const Digest& d) { return to_hex(as_bytes(d)); }

struct DigestHash {
  std::size_t operator()(const Digest& d) const noexcept {
    std::size_t h;
    std::memcpy(&h, d.data(), sizeof(h));
    return h;
  }
};

}  // namespace cdstore
