#pragma once

// Little-endian fixed-width encoding shared by the wire protocol, index
// records and container files.

#include <cstdint>
#include <string>
#include <string_view>

#include "cdstore/error.hpp"
#include "cdstore/types.hpp"

namespace cdstore {

class ByteWriter {
 public:
  ByteWriter() = default;
  explicit ByteWriter(std::size_t reserve) { buf_.reserve(reserve); }

  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void raw(ByteView data) { buf_.insert(buf_.end(), data.begin(), data.end()); }
  void digest(const Digest& d) { raw(as_bytes(d)); }
  /// u32 length followed by the bytes.
  void blob(ByteView data) {
    u32(static_cast<std::uint32_t>(data.size()));
    raw(data);
  }
  void str(std::string_view s) { blob(as_bytes(s)); }

  std::size_t size() const { return buf_.size(); }
  const Bytes& bytes() const& { return buf_; }
  Bytes take() && { return std::move(buf_); }

 private:
  void put_le(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  Bytes buf_;
};

/// Bounds-checked reader. Running off the end throws Error with the code
/// given at construction (protocol errors on the wire, corruption on disk).
class ByteReader {
 public:
  explicit ByteReader(ByteView data, Errc on_underflow = Errc::protocol)
      : data_(data), errc_(on_underflow) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }

  ByteView raw(std::size_t n) {
    need(n);
    ByteView out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  Digest digest() {
    Digest d;
    ByteView v = raw(d.size());
    std::copy(v.begin(), v.end(), d.begin());
    return d;
  }
  Bytes blob() {
    std::uint32_t n = u32();
    ByteView v = raw(n);
    return Bytes(v.begin(), v.end());
  }
  std::string str() {
    std::uint32_t n = u32();
    ByteView v = raw(n);
    return std::string(v.begin(), v.end());
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }

  /// Element counts read off the wire are checked against the bytes left so
  /// a hostile count cannot trigger a huge allocation.
  std::size_t count(std::size_t min_element_size) {
    std::uint64_t n = u32();
    if (min_element_size > 0 && n > remaining() / min_element_size)
      fail(errc_, "element count exceeds remaining bytes");
    return static_cast<std::size_t>(n);
  }

  void expect_done() const {
    if (!done()) fail(errc_, "trailing bytes after record");
  }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) fail(errc_, "record truncated");
  }
  std::uint64_t get_le(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  ByteView data_;
  std::size_t pos_ = 0;
  Errc errc_;
};

}  // namespace cdstore
