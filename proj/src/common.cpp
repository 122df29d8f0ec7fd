#include "cdstore/error.hpp"
#include "cdstore/types.hpp"

namespace cdstore {

std::string to_hex(ByteView data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (std::uint8_t b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) fail(Errc::parse, "hex string has odd length");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]);
    int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) fail(Errc::parse, "invalid hex digit");
    out[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return out;
}

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::contract_violation: return "contract-violation";
    case Errc::insufficient_shares: return "insufficient-shares";
    case Errc::integrity_mismatch: return "integrity-mismatch";
    case Errc::all_subsets_failed: return "all-subsets-failed";
    case Errc::not_found: return "not-found";
    case Errc::corruption: return "corruption";
    case Errc::protocol: return "protocol";
    case Errc::backend: return "backend";
    case Errc::capacity: return "capacity";
    case Errc::insufficient_clouds: return "insufficient-clouds";
    case Errc::usage: return "usage";
    case Errc::parse: return "parse";
    case Errc::io: return "io";
  }
  return "unknown";
}

}  // namespace cdstore
