#include "cdstore/proto.hpp"

#include "cdstore/byte_io.hpp"
#include "cdstore/error.hpp"

namespace cdstore::proto {

namespace {

bool known_type(std::uint8_t t) { return t >= 1 && t <= 10; }

ByteReader reader_for(const Message& m, MessageType expected) {
  if (m.type != expected)
    fail(Errc::protocol, std::string("expected ") + type_name(expected) + ", got " + type_name(m.type));
  return ByteReader(m.payload, Errc::protocol);
}

Message finish(MessageType t, ByteWriter&& w) { return {t, std::move(w).take()}; }

}  // namespace

const char* type_name(MessageType t) {
  switch (t) {
    case MessageType::hello: return "HELLO";
    case MessageType::fp_query: return "FP_QUERY";
    case MessageType::fp_reply: return "FP_REPLY";
    case MessageType::share_batch: return "SHARE_BATCH";
    case MessageType::file_meta: return "FILE_META";
    case MessageType::download_req: return "DOWNLOAD_REQ";
    case MessageType::recipe_reply: return "RECIPE_REPLY";
    case MessageType::share_reply: return "SHARE_REPLY";
    case MessageType::error: return "ERROR";
    case MessageType::ack: return "ACK";
  }
  return "UNKNOWN";
}

Bytes encode_message(const Message& m) {
  require(m.payload.size() <= kMaxPayload, "encode_message: payload exceeds frame limit");
  ByteWriter w(kFrameHeaderSize + m.payload.size());
  w.u8(static_cast<std::uint8_t>(m.type));
  w.u32(static_cast<std::uint32_t>(m.payload.size()));
  w.raw(m.payload);
  return std::move(w).take();
}

FrameDecode decode_message(ByteView stream) {
  if (stream.empty()) return {};
  if (!known_type(stream[0])) fail(Errc::protocol, "unknown message type " + std::to_string(stream[0]));
  if (stream.size() < kFrameHeaderSize) return {};
  ByteReader r(stream.subspan(1, 4));
  const std::uint32_t len = r.u32();
  if (len > kMaxPayload) fail(Errc::protocol, "frame length " + std::to_string(len) + " exceeds limit");
  if (stream.size() - kFrameHeaderSize < len) return {};
  Message m;
  m.type = static_cast<MessageType>(stream[0]);
  m.payload.assign(stream.begin() + kFrameHeaderSize, stream.begin() + kFrameHeaderSize + len);
  return {std::move(m), kFrameHeaderSize + len};
}

Message to_message(const Hello& v) {
  ByteWriter w;
  w.u8(v.version);
  w.u32(v.user);
  w.u32(v.cloud_index);
  return finish(MessageType::hello, std::move(w));
}

Hello parse_hello(const Message& m) {
  auto r = reader_for(m, MessageType::hello);
  Hello v;
  v.version = r.u8();
  v.user = r.u32();
  v.cloud_index = r.u32();
  r.expect_done();
  return v;
}

Message to_message(const FpQuery& v) {
  ByteWriter w(4 + v.fingerprints.size() * kDigestSize);
  w.u32(static_cast<std::uint32_t>(v.fingerprints.size()));
  for (const auto& fp : v.fingerprints) w.digest(fp);
  return finish(MessageType::fp_query, std::move(w));
}

FpQuery parse_fp_query(const Message& m) {
  auto r = reader_for(m, MessageType::fp_query);
  FpQuery v;
  const std::size_t n = r.count(kDigestSize);
  v.fingerprints.reserve(n);
  for (std::size_t i = 0; i < n; ++i) v.fingerprints.push_back(r.digest());
  r.expect_done();
  return v;
}

Message to_message(const FpReply& v) {
  ByteWriter w(4 + v.duplicate.size());
  w.u32(static_cast<std::uint32_t>(v.duplicate.size()));
  for (bool d : v.duplicate) w.u8(d ? 1 : 0);
  return finish(MessageType::fp_reply, std::move(w));
}

FpReply parse_fp_reply(const Message& m) {
  auto r = reader_for(m, MessageType::fp_reply);
  FpReply v;
  const std::size_t n = r.count(1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t flag = r.u8();
    if (flag > 1) fail(Errc::protocol, "bad duplicate flag");
    v.duplicate.push_back(flag == 1);
  }
  r.expect_done();
  return v;
}

Message to_message(const ShareBatch& v) {
  std::size_t size = 4;
  for (const auto& s : v.shares) size += batch_entry_size(s.share.size());
  ByteWriter w(size);
  w.u32(static_cast<std::uint32_t>(v.shares.size()));
  for (const auto& s : v.shares) {
    w.digest(s.client_fp);
    w.u64(s.sequence);
    w.u32(s.secret_size);
    w.blob(s.share);
  }
  return finish(MessageType::share_batch, std::move(w));
}

ShareBatch parse_share_batch(const Message& m) {
  auto r = reader_for(m, MessageType::share_batch);
  ShareBatch v;
  const std::size_t n = r.count(batch_entry_size(0));
  v.shares.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    BatchShare s;
    s.client_fp = r.digest();
    s.sequence = r.u64();
    s.secret_size = r.u32();
    s.share = r.blob();
    v.shares.push_back(std::move(s));
  }
  r.expect_done();
  return v;
}

Message to_message(const FileMeta& v) {
  ByteWriter w;
  w.blob(v.pathname_share);
  w.u32(v.pathname_size);
  w.u64(v.file_size);
  w.u32(static_cast<std::uint32_t>(v.secrets.size()));
  for (const auto& s : v.secrets) {
    w.digest(s.client_fp);
    w.u32(s.secret_size);
  }
  return finish(MessageType::file_meta, std::move(w));
}

FileMeta parse_file_meta(const Message& m) {
  auto r = reader_for(m, MessageType::file_meta);
  FileMeta v;
  v.pathname_share = r.blob();
  v.pathname_size = r.u32();
  v.file_size = r.u64();
  const std::size_t n = r.count(kDigestSize + 4);
  v.secrets.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SecretMeta s;
    s.client_fp = r.digest();
    s.secret_size = r.u32();
    v.secrets.push_back(s);
  }
  r.expect_done();
  return v;
}

Message to_message(const DownloadReq& v) {
  ByteWriter w;
  w.blob(v.pathname_share);
  return finish(MessageType::download_req, std::move(w));
}

DownloadReq parse_download_req(const Message& m) {
  auto r = reader_for(m, MessageType::download_req);
  DownloadReq v;
  v.pathname_share = r.blob();
  r.expect_done();
  return v;
}

Message to_message(const RecipeReply& v) {
  ByteWriter w(12 + 4 * v.secret_sizes.size());
  w.u64(v.file_size);
  w.u32(static_cast<std::uint32_t>(v.secret_sizes.size()));
  for (auto s : v.secret_sizes) w.u32(s);
  return finish(MessageType::recipe_reply, std::move(w));
}

RecipeReply parse_recipe_reply(const Message& m) {
  auto r = reader_for(m, MessageType::recipe_reply);
  RecipeReply v;
  v.file_size = r.u64();
  const std::size_t n = r.count(4);
  v.secret_sizes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) v.secret_sizes.push_back(r.u32());
  r.expect_done();
  return v;
}

Message to_message(const ShareReply& v) {
  ByteWriter w;
  w.u64(v.first_sequence);
  w.u32(static_cast<std::uint32_t>(v.shares.size()));
  for (const auto& s : v.shares) {
    w.u8(static_cast<std::uint8_t>(s.status));
    w.blob(s.data);
  }
  return finish(MessageType::share_reply, std::move(w));
}

ShareReply parse_share_reply(const Message& m) {
  auto r = reader_for(m, MessageType::share_reply);
  ShareReply v;
  v.first_sequence = r.u64();
  const std::size_t n = r.count(5);
  v.shares.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ReplyShare s;
    const std::uint8_t status = r.u8();
    if (status > 2) fail(Errc::protocol, "bad share status");
    s.status = static_cast<ShareStatus>(status);
    s.data = r.blob();
    v.shares.push_back(std::move(s));
  }
  r.expect_done();
  return v;
}

Message to_message(const ErrorReply& v) {
  ByteWriter w;
  w.u16(v.code);
  w.str(v.message);
  return finish(MessageType::error, std::move(w));
}

ErrorReply parse_error(const Message& m) {
  auto r = reader_for(m, MessageType::error);
  ErrorReply v;
  v.code = r.u16();
  v.message = r.str();
  r.expect_done();
  return v;
}

Message to_message(const Ack& v) {
  ByteWriter w;
  w.u64(v.value);
  return finish(MessageType::ack, std::move(w));
}

Ack parse_ack(const Message& m) {
  auto r = reader_for(m, MessageType::ack);
  Ack v;
  v.value = r.u64();
  r.expect_done();
  return v;
}

}  // namespace cdstore::proto
