#include "cdstore/kv_store.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>

#include "cdstore/byte_io.hpp"
#include "cdstore/error.hpp"

namespace cdstore {

namespace {

constexpr std::uint8_t kOpPut = 1;
constexpr std::uint8_t kOpDel = 2;

Bytes encode_batch(const WriteBatch& batch) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(batch.ops().size()));
  for (const auto& [key, value] : batch.ops()) {
    w.u8(value ? kOpPut : kOpDel);
    w.str(key);
    if (value) w.blob(*value);
  }
  return std::move(w).take();
}

WriteBatch decode_batch(ByteView payload) {
  ByteReader r(payload, Errc::corruption);
  WriteBatch batch;
  const std::size_t n = r.count(5);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t op = r.u8();
    std::string key = r.str();
    if (op == kOpPut) {
      batch.put(std::move(key), r.blob());
    } else if (op == kOpDel) {
      batch.del(std::move(key));
    } else {
      fail(Errc::corruption, "unknown kv log op");
    }
  }
  r.expect_done();
  return batch;
}

std::uint32_t crc_of(ByteView data) {
  return static_cast<std::uint32_t>(crc32(0L, data.data(), static_cast<uInt>(data.size())));
}

}  // namespace

std::optional<Bytes> MemoryKvStore::get(std::string_view key) const {
  std::shared_lock lock(mu_);
  auto it = map_.find(key);
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

void MemoryKvStore::write(const WriteBatch& batch) { apply(batch); }

void MemoryKvStore::apply(const WriteBatch& batch) {
  std::unique_lock lock(mu_);
  for (const auto& [key, value] : batch.ops()) {
    if (value)
      map_.insert_or_assign(key, *value);
    else
      map_.erase(key);
  }
}

void MemoryKvStore::scan(std::string_view prefix,
                         const std::function<bool(std::string_view, ByteView)>& visit) const {
  std::shared_lock lock(mu_);
  for (auto it = map_.lower_bound(prefix); it != map_.end(); ++it) {
    if (it->first.compare(0, prefix.size(), prefix) != 0) break;
    if (!visit(it->first, it->second)) break;
  }
}

LogKvStore::LogKvStore(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  replay();
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) fail(Errc::io, "cannot open kv log " + path_.string() + ": " + std::strerror(errno));
}

LogKvStore::~LogKvStore() {
  if (fd_ >= 0) {
    ::fsync(fd_);
    ::close(fd_);
  }
}

void LogKvStore::replay() {
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  while (data.size() - pos >= 8) {
    ByteReader header(ByteView(data).subspan(pos, 8), Errc::corruption);
    const std::uint32_t len = header.u32();
    const std::uint32_t crc = header.u32();
    if (data.size() - pos - 8 < len) break;
    ByteView payload(data.data() + pos + 8, len);
    if (crc_of(payload) != crc) break;
    apply(decode_batch(payload));
    pos += 8 + len;
  }
  if (pos != data.size()) std::filesystem::resize_file(path_, pos);
}

void LogKvStore::write(const WriteBatch& batch) {
  if (batch.empty()) return;
  const Bytes payload = encode_batch(batch);
  ByteWriter frame(payload.size() + 8);
  frame.u32(static_cast<std::uint32_t>(payload.size()));
  frame.u32(crc_of(payload));
  frame.raw(payload);
  {
    // Log order must match apply order.
    std::unique_lock lock(mu_);
    const Bytes& bytes = frame.bytes();
    std::size_t done = 0;
    while (done < bytes.size()) {
      ssize_t n = ::write(fd_, bytes.data() + done, bytes.size() - done);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail(Errc::io, std::string("kv log write failed: ") + std::strerror(errno));
      }
      done += static_cast<std::size_t>(n);
    }
    for (const auto& [key, value] : batch.ops()) {
      if (value)
        map_.insert_or_assign(key, *value);
      else
        map_.erase(key);
    }
  }
}

void LogKvStore::sync() {
  if (::fsync(fd_) != 0) fail(Errc::io, std::string("kv log fsync failed: ") + std::strerror(errno));
}

}  // namespace cdstore
