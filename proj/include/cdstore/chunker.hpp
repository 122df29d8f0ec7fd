#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <vector>

#include "cdstore/types.hpp"

namespace cdstore {

enum class ChunkMode { variable, fixed };

struct ChunkParams {
  ChunkMode mode = ChunkMode::variable;
  std::size_t avg = 8192;
  std::size_t min = 2048;
  std::size_t max = 16384;
  std::size_t window = 48;
  /// Chunk size used when mode == fixed.
  std::size_t fixed_size = 4096;

  /// avg - 1 when avg is a power of two: log2(avg) low bits set.
  std::uint64_t mask() const;

  void validate() const;

  /// Largest chunk this configuration can emit.
  std::size_t max_chunk() const { return mode == ChunkMode::fixed ? fixed_size : max; }

  static ChunkParams fixed_chunks(std::size_t size);
};

/// 64-bit Rabin fingerprint over a sliding window, reduced modulo an
/// irreducible polynomial of degree 53.
class RabinWindow {
 public:
  static constexpr std::uint64_t kPolynomial = 0x3DA3358B4DC173ULL;

  explicit RabinWindow(std::size_t window);

  void reset();
  std::uint64_t roll(std::uint8_t byte);
  std::uint64_t digest() const { return digest_; }

 private:
  std::size_t window_;
  std::vector<std::uint8_t> ring_;
  std::size_t pos_ = 0;
  std::uint64_t digest_ = 0;
};

/// Length of the chunk starting at data[0]. `at_end` says whether `data`
/// holds the rest of the stream; when false, data must hold at least
/// params.max_chunk() bytes.
std::size_t next_chunk_length(ByteView data, const ChunkParams& params, bool at_end);

/// Views into `input` whose concatenation equals it.
std::vector<ByteView> chunk_stream(ByteView input, const ChunkParams& params);

std::vector<ByteView> chunk_fixed(ByteView input, std::size_t size);

/// Pull-based chunker over an input stream, for inputs that do not fit in
/// memory.
class StreamChunker {
 public:
  StreamChunker(std::istream& in, ChunkParams params);

  std::optional<Bytes> next();

 private:
  void fill();

  std::istream& in_;
  ChunkParams params_;
  Bytes buf_;
  std::size_t head_ = 0;
  bool eof_ = false;
};

}  // namespace cdstore
