#pragma once

// Framed binary client-server protocol.
//
// Frame:  u8 type | u32 payload length | payload   (little-endian)

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdstore/types.hpp"

namespace cdstore::proto {

inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kFrameHeaderSize = 5;
inline constexpr std::uint32_t kMaxPayload = 64u << 20;
/// Upload and download batches are cut at this serialized size.
inline constexpr std::size_t kBatchBytes = 4u << 20;

enum class MessageType : std::uint8_t {
  hello = 1,
  fp_query = 2,
  fp_reply = 3,
  share_batch = 4,
  file_meta = 5,
  download_req = 6,
  recipe_reply = 7,
  share_reply = 8,
  error = 9,
  ack = 10,
};

const char* type_name(MessageType t);

struct Message {
  MessageType type = MessageType::ack;
  Bytes payload;

  friend bool operator==(const Message&, const Message&) = default;
};

Bytes encode_message(const Message& m);

struct FrameDecode {
  /// nullopt: more bytes are needed.
  std::optional<Message> message;
  std::size_t consumed = 0;
};

/// Decodes at most one frame from the front of `stream`. Throws a protocol
/// error on an unknown type or an oversized length.
FrameDecode decode_message(ByteView stream);

struct Hello {
  std::uint8_t version = kProtocolVersion;
  UserId user = 0;
  /// Cloud index the client believes it is talking to.
  std::uint32_t cloud_index = 0;
};

struct FpQuery {
  std::vector<Digest> fingerprints;
};

struct FpReply {
  std::vector<bool> duplicate;
};

struct BatchShare {
  Digest client_fp{};
  std::uint64_t sequence = 0;
  std::uint32_t secret_size = 0;
  Bytes share;
};

struct ShareBatch {
  std::vector<BatchShare> shares;
};

/// Serialized size contribution of one share inside a ShareBatch.
inline std::size_t batch_entry_size(std::size_t share_bytes) { return kDigestSize + 8 + 4 + 4 + share_bytes; }

struct SecretMeta {
  Digest client_fp{};
  std::uint32_t secret_size = 0;
};

struct FileMeta {
  /// This cloud's share of the dispersed pathname; opaque to the server.
  Bytes pathname_share;
  std::uint32_t pathname_size = 0;
  std::uint64_t file_size = 0;
  std::vector<SecretMeta> secrets;
};

struct DownloadReq {
  Bytes pathname_share;
};

struct RecipeReply {
  std::uint64_t file_size = 0;
  std::vector<std::uint32_t> secret_sizes;
};

enum class ShareStatus : std::uint8_t { ok = 0, corrupt = 1, missing = 2 };

struct ReplyShare {
  ShareStatus status = ShareStatus::ok;
  Bytes data;
};

struct ShareReply {
  std::uint64_t first_sequence = 0;
  std::vector<ReplyShare> shares;
};

struct ErrorReply {
  std::uint16_t code = 0;
  std::string message;
};

struct Ack {
  std::uint64_t value = 0;
};

Message to_message(const Hello& v);
Message to_message(const FpQuery& v);
Message to_message(const FpReply& v);
Message to_message(const ShareBatch& v);
Message to_message(const FileMeta& v);
Message to_message(const DownloadReq& v);
Message to_message(const RecipeReply& v);
Message to_message(const ShareReply& v);
Message to_message(const ErrorReply& v);
Message to_message(const Ack& v);

// Payload parsers; throw a protocol error on a type mismatch or malformed
// payload.
Hello parse_hello(const Message& m);
FpQuery parse_fp_query(const Message& m);
FpReply parse_fp_reply(const Message& m);
ShareBatch parse_share_batch(const Message& m);
FileMeta parse_file_meta(const Message& m);
DownloadReq parse_download_req(const Message& m);
RecipeReply parse_recipe_reply(const Message& m);
ShareReply parse_share_reply(const Message& m);
ErrorReply parse_error(const Message& m);
Ack parse_ack(const Message& m);

}  // namespace cdstore::proto
