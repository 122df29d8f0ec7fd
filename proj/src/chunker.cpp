#include "cdstore/chunker.hpp"

#include <array>
#include <bit>

#include "cdstore/error.hpp"

namespace cdstore {

namespace {

int degree(std::uint64_t p) { return 63 - std::countl_zero(p); }

std::uint64_t pol_mod(std::uint64_t x, std::uint64_t p) {
  const int dp = degree(p);
  while (x != 0 && degree(x) >= dp) x ^= p << (degree(x) - dp);
  return x;
}

std::uint64_t append_byte(std::uint64_t hash, std::uint8_t b, std::uint64_t p) {
  return pol_mod((hash << 8) | b, p);
}

struct RabinTables {
  std::array<std::uint64_t, 256> out{};
  std::array<std::uint64_t, 256> mod{};
  std::size_t window = 0;
};

// Tables depend on the window size; one cache slot covers the common case.
const RabinTables& rabin_tables(std::size_t window) {
  thread_local RabinTables t;
  if (t.window == window) return t;
  const std::uint64_t p = RabinWindow::kPolynomial;
  const int k = degree(p);
  for (int b = 0; b < 256; ++b) {
    std::uint64_t h = append_byte(0, static_cast<std::uint8_t>(b), p);
    for (std::size_t i = 0; i + 1 < window; ++i) h = append_byte(h, 0, p);
    t.out[b] = h;
    const auto shifted = static_cast<std::uint64_t>(b) << k;
    t.mod[b] = pol_mod(shifted, p) | shifted;
  }
  t.window = window;
  return t;
}

}  // namespace

std::uint64_t ChunkParams::mask() const { return std::bit_floor(avg) - 1; }

void ChunkParams::validate() const {
  if (mode == ChunkMode::fixed) {
    require(fixed_size > 0, "fixed chunk size must be positive");
    return;
  }
  require(min <= avg && avg <= max, "chunk params require min <= avg <= max");
  require(std::has_single_bit(avg), "chunk avg must be a power of two");
  require(window > 0 && window <= min, "rolling window must be in [1, min]");
}

ChunkParams ChunkParams::fixed_chunks(std::size_t size) {
  ChunkParams p;
  p.mode = ChunkMode::fixed;
  p.fixed_size = size;
  return p;
}

RabinWindow::RabinWindow(std::size_t window) : window_(window), ring_(window, 0) {}

void RabinWindow::reset() {
  std::fill(ring_.begin(), ring_.end(), 0);
  pos_ = 0;
  digest_ = 0;
}

std::uint64_t RabinWindow::roll(std::uint8_t byte) {
  const RabinTables& t = rabin_tables(window_);
  constexpr int kShift = 53 - 8;
  const std::uint8_t leaving = ring_[pos_];
  ring_[pos_] = byte;
  pos_ = (pos_ + 1) % window_;
  digest_ ^= t.out[leaving];
  const auto index = static_cast<std::uint8_t>(digest_ >> kShift);
  digest_ = ((digest_ << 8) | byte) ^ t.mod[index];
  return digest_;
}

std::size_t next_chunk_length(ByteView data, const ChunkParams& params, bool at_end) {
  if (params.mode == ChunkMode::fixed) return std::min(data.size(), params.fixed_size);
  if (data.size() <= params.min) {
    require(at_end, "next_chunk_length: short buffer before end of stream");
    return data.size();
  }
  const std::size_t limit = std::min(data.size(), params.max);
  const std::uint64_t mask = params.mask();
  const std::uint64_t target = mask - 1;

  // Only the last `window` bytes before a candidate cut influence the hash,
  // so hashing starts window bytes ahead of the minimum size.
  RabinWindow rabin(params.window);
  std::size_t i = params.min - params.window;
  for (; i < params.min; ++i) rabin.roll(data[i]);
  for (; i < limit; ++i) {
    if ((rabin.digest() & mask) == target) return i;
    rabin.roll(data[i]);
  }
  if (limit == params.max) return params.max;
  require(at_end, "next_chunk_length: short buffer before end of stream");
  return data.size();
}

std::vector<ByteView> chunk_stream(ByteView input, const ChunkParams& params) {
  params.validate();
  std::vector<ByteView> out;
  std::size_t pos = 0;
  while (pos < input.size()) {
    const std::size_t len = next_chunk_length(input.subspan(pos), params, true);
    out.push_back(input.subspan(pos, len));
    pos += len;
  }
  return out;
}

std::vector<ByteView> chunk_fixed(ByteView input, std::size_t size) {
  require(size > 0, "chunk_fixed: size must be positive");
  return chunk_stream(input, ChunkParams::fixed_chunks(size));
}

StreamChunker::StreamChunker(std::istream& in, ChunkParams params) : in_(in), params_(params) {
  params_.validate();
}

void StreamChunker::fill() {
  const std::size_t want = std::max<std::size_t>(params_.max_chunk() * 64, 1 << 20);
  if (head_ > 0 && head_ * 2 >= buf_.size()) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(head_));
    head_ = 0;
  }
  while (!eof_ && buf_.size() - head_ < want) {
    const std::size_t old = buf_.size();
    buf_.resize(old + want);
    in_.read(reinterpret_cast<char*>(buf_.data() + old), static_cast<std::streamsize>(want));
    buf_.resize(old + static_cast<std::size_t>(in_.gcount()));
    if (!in_) eof_ = true;
  }
}

std::optional<Bytes> StreamChunker::next() {
  if (buf_.size() - head_ < params_.max_chunk() && !eof_) fill();
  if (buf_.size() == head_) return std::nullopt;
  ByteView rest(buf_.data() + head_, buf_.size() - head_);
  const std::size_t len = next_chunk_length(rest, params_, eof_);
  Bytes chunk(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(len));
  head_ += len;
  return chunk;
}

}  // namespace cdstore
