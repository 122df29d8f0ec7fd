#pragma once

// Packs share and recipe records into single-owner containers of at most
// 4MB, persists them through a cloud backend, and keeps an LRU cache of
// recently read containers.
//
// Container file format (little-endian):
//   "CDSC" | u8 version | u8 kind | u16 reserved | u32 owner | u32 count
//   then `count` records of  u32 length | bytes

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include "cdstore/types.hpp"

namespace cdstore {

using ContainerId = std::uint64_t;

inline constexpr std::size_t kContainerCap = 4u << 20;
inline constexpr std::size_t kContainerHeaderSize = 16;
inline constexpr std::uint8_t kContainerVersion = 1;

enum class ContainerKind : std::uint8_t { share = 1, recipe = 2 };

struct ContainerRef {
  ContainerId container = 0;
  std::uint32_t offset = 0;
  std::uint32_t length = 0;

  friend bool operator==(const ContainerRef&, const ContainerRef&) = default;
};

struct ContainerHeader {
  ContainerKind kind = ContainerKind::share;
  UserId owner = 0;
  std::uint32_t record_count = 0;
};

/// Parses and validates a container image; throws corruption on a bad
/// header or record framing.
ContainerHeader parse_container(ByteView image, std::vector<ByteView>* records = nullptr);

/// Object store holding one object per container id.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual void put(ContainerId id, ByteView data) = 0;
  virtual std::optional<Bytes> get(ContainerId id) = 0;
  virtual std::vector<ContainerId> list() = 0;
  virtual void remove(ContainerId id) = 0;
};

/// <root>/containers/<16 hex digit id>
class FsBackend : public Backend {
 public:
  explicit FsBackend(std::filesystem::path root);

  void put(ContainerId id, ByteView data) override;
  std::optional<Bytes> get(ContainerId id) override;
  std::vector<ContainerId> list() override;
  void remove(ContainerId id) override;

  std::filesystem::path object_path(ContainerId id) const;

 private:
  std::filesystem::path dir_;
};

class MemoryBackend : public Backend {
 public:
  void put(ContainerId id, ByteView data) override;
  std::optional<Bytes> get(ContainerId id) override;
  std::vector<ContainerId> list() override;
  void remove(ContainerId id) override;

  /// Subsequent puts throw backend errors while set.
  void set_fail_puts(bool v) { fail_puts_ = v; }
  std::size_t get_calls() const { return get_calls_; }

 private:
  std::mutex mu_;
  std::map<ContainerId, Bytes> objects_;
  std::atomic<bool> fail_puts_{false};
  std::atomic<std::size_t> get_calls_{0};
};

class ContainerStore {
 public:
  using IdAllocator = std::function<ContainerId()>;

  /// Without an allocator, ids continue after the largest id in the backend.
  ContainerStore(Backend& backend, std::size_t cache_capacity = 128, IdAllocator ids = {});
  ~ContainerStore();

  ContainerStore(const ContainerStore&) = delete;
  ContainerStore& operator=(const ContainerStore&) = delete;

  /// Buffers `record` in the open (owner, kind) container, sealing and
  /// flushing that container first if the record would push it past 4MB.
  /// A record that alone exceeds the cap gets a container of its own.
  ContainerRef append_record(UserId owner, ContainerKind kind, ByteView record);

  Bytes read_record(const ContainerRef& ref);

  /// Seals and persists every open buffer. On backend failure, throws a
  /// backend error listing the ids that were not persisted; those buffers
  /// are kept for a later retry.
  void flush_all();

  void drop_cache();

  std::size_t backend_fetches() const { return fetches_; }
  std::size_t cache_capacity() const { return capacity_; }

 private:
  struct OpenContainer {
    ContainerId id = 0;
    ContainerKind kind = ContainerKind::share;
    UserId owner = 0;
    Bytes image;
    std::uint32_t count = 0;
  };
  using BufferKey = std::pair<UserId, ContainerKind>;

  OpenContainer open_container(UserId owner, ContainerKind kind);
  void seal(OpenContainer& c);
  std::shared_ptr<const Bytes> fetch(ContainerId id);

  Backend& backend_;
  std::size_t capacity_;
  IdAllocator ids_;
  ContainerId next_id_ = 1;

  std::mutex write_mu_;
  std::map<BufferKey, OpenContainer> open_;
  // Sealed containers whose backend put failed.
  std::map<ContainerId, OpenContainer> unpersisted_;

  std::mutex cache_mu_;
  std::list<ContainerId> lru_;
  std::unordered_map<ContainerId, std::pair<std::shared_ptr<const Bytes>, std::list<ContainerId>::iterator>>
      cache_;
  std::atomic<std::size_t> fetches_{0};
};

}  // namespace cdstore
