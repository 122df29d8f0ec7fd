#pragma once

// Ordered key-value store used by the server indices. Two engines: an
// in-memory map for tests and an append-only batch log that is replayed on
// open.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cdstore/types.hpp"

namespace cdstore {

class WriteBatch {
 public:
  void put(std::string key, Bytes value) { ops_.emplace_back(std::move(key), std::move(value)); }
  void del(std::string key) { ops_.emplace_back(std::move(key), std::nullopt); }

  bool empty() const { return ops_.empty(); }
  const auto& ops() const { return ops_; }

 private:
  std::vector<std::pair<std::string, std::optional<Bytes>>> ops_;
};

class KvStore {
 public:
  virtual ~KvStore() = default;

  virtual std::optional<Bytes> get(std::string_view key) const = 0;
  /// Applies all operations atomically.
  virtual void write(const WriteBatch& batch) = 0;
  /// Visits keys starting with `prefix` in order; stop by returning false.
  virtual void scan(std::string_view prefix,
                    const std::function<bool(std::string_view, ByteView)>& visit) const = 0;
  virtual void sync() {}

  void put(std::string key, Bytes value) {
    WriteBatch b;
    b.put(std::move(key), std::move(value));
    write(b);
  }
};

class MemoryKvStore : public KvStore {
 public:
  std::optional<Bytes> get(std::string_view key) const override;
  void write(const WriteBatch& batch) override;
  void scan(std::string_view prefix,
            const std::function<bool(std::string_view, ByteView)>& visit) const override;

 protected:
  void apply(const WriteBatch& batch);

  mutable std::shared_mutex mu_;
  std::map<std::string, Bytes, std::less<>> map_;
};

/// Durable engine. Each batch is appended as
///   u32 payload_len | u32 crc32(payload) | payload
/// and a torn tail is truncated on reopen.
class LogKvStore : public MemoryKvStore {
 public:
  explicit LogKvStore(std::filesystem::path path);
  ~LogKvStore() override;

  LogKvStore(const LogKvStore&) = delete;
  LogKvStore& operator=(const LogKvStore&) = delete;

  void write(const WriteBatch& batch) override;
  void sync() override;

 private:
  void replay();

  std::filesystem::path path_;
  int fd_ = -1;
};

}  // namespace cdstore
