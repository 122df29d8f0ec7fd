#include "cdstore/container_store.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>

#include "cdstore/byte_io.hpp"
#include "cdstore/error.hpp"

namespace cdstore {

namespace {

constexpr std::uint8_t kMagic[4] = {'C', 'D', 'S', 'C'};

void write_u32_at(Bytes& image, std::size_t pos, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) image[pos + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::string id_name(ContainerId id) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(id));
  return buf;
}

}  // namespace

ContainerHeader parse_container(ByteView image, std::vector<ByteView>* records) {
  ByteReader r(image, Errc::corruption);
  ByteView magic = r.raw(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic)) fail(Errc::corruption, "bad container magic");
  if (r.u8() != kContainerVersion) fail(Errc::corruption, "unsupported container version");
  ContainerHeader h;
  const std::uint8_t kind = r.u8();
  if (kind != static_cast<std::uint8_t>(ContainerKind::share) &&
      kind != static_cast<std::uint8_t>(ContainerKind::recipe))
    fail(Errc::corruption, "bad container kind");
  h.kind = static_cast<ContainerKind>(kind);
  r.u16();
  h.owner = r.u32();
  h.record_count = r.u32();
  for (std::uint32_t i = 0; i < h.record_count; ++i) {
    const std::uint32_t len = r.u32();
    ByteView rec = r.raw(len);
    if (records) records->push_back(rec);
  }
  r.expect_done();
  return h;
}

FsBackend::FsBackend(std::filesystem::path root) : dir_(std::move(root) / "containers") {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path FsBackend::object_path(ContainerId id) const { return dir_ / id_name(id); }

void FsBackend::put(ContainerId id, ByteView data) {
  const auto final_path = object_path(id);
  auto tmp = final_path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) fail(Errc::backend, "failed writing container " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, final_path, ec);
  if (ec) fail(Errc::backend, "failed publishing container " + final_path.string() + ": " + ec.message());
}

std::optional<Bytes> FsBackend::get(ContainerId id) {
  std::ifstream in(object_path(id), std::ios::binary);
  if (!in) return std::nullopt;
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::vector<ContainerId> FsBackend::list() {
  std::vector<ContainerId> ids;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    const std::string name = entry.path().filename().string();
    if (name.size() != 16 || name.find_first_not_of("0123456789abcdef") != std::string::npos) continue;
    ids.push_back(std::stoull(name, nullptr, 16));
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

void FsBackend::remove(ContainerId id) { std::filesystem::remove(object_path(id)); }

void MemoryBackend::put(ContainerId id, ByteView data) {
  if (fail_puts_) fail(Errc::backend, "injected backend put failure");
  std::lock_guard lock(mu_);
  objects_[id] = Bytes(data.begin(), data.end());
}

std::optional<Bytes> MemoryBackend::get(ContainerId id) {
  ++get_calls_;
  std::lock_guard lock(mu_);
  auto it = objects_.find(id);
  if (it == objects_.end()) return std::nullopt;
  return it->second;
}

std::vector<ContainerId> MemoryBackend::list() {
  std::lock_guard lock(mu_);
  std::vector<ContainerId> ids;
  for (const auto& [id, _] : objects_) ids.push_back(id);
  return ids;
}

void MemoryBackend::remove(ContainerId id) {
  std::lock_guard lock(mu_);
  objects_.erase(id);
}

ContainerStore::ContainerStore(Backend& backend, std::size_t cache_capacity, IdAllocator ids)
    : backend_(backend), capacity_(cache_capacity), ids_(std::move(ids)) {
  if (!ids_) {
    auto existing = backend_.list();
    next_id_ = existing.empty() ? 1 : existing.back() + 1;
  }
}

ContainerStore::~ContainerStore() {
  try {
    flush_all();
  } catch (...) {
  }
}

ContainerStore::OpenContainer ContainerStore::open_container(UserId owner, ContainerKind kind) {
  OpenContainer c;
  c.id = ids_ ? ids_() : next_id_++;
  c.kind = kind;
  c.owner = owner;
  ByteWriter w(kContainerCap);
  w.raw(ByteView(kMagic, 4));
  w.u8(kContainerVersion);
  w.u8(static_cast<std::uint8_t>(kind));
  w.u16(0);
  w.u32(owner);
  w.u32(0);
  c.image = std::move(w).take();
  return c;
}

void ContainerStore::seal(OpenContainer& c) {
  write_u32_at(c.image, 12, c.count);
  try {
    backend_.put(c.id, c.image);
  } catch (const Error&) {
    unpersisted_.emplace(c.id, c);
    throw;
  }
}

ContainerRef ContainerStore::append_record(UserId owner, ContainerKind kind, ByteView record) {
  require(record.size() <= UINT32_MAX, "append_record: record too large");
  std::lock_guard lock(write_mu_);
  const BufferKey key{owner, kind};
  const std::size_t framed = 4 + record.size();

  auto it = open_.find(key);
  if (it != open_.end() && it->second.image.size() + framed > kContainerCap) {
    OpenContainer sealed = std::move(it->second);
    open_.erase(it);
    it = open_.end();
    seal(sealed);
  }

  if (kContainerHeaderSize + framed > kContainerCap) {
    // Oversized record: a dedicated container that may exceed the cap.
    OpenContainer solo = open_container(owner, kind);
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(record.size()));
    solo.image.insert(solo.image.end(), w.bytes().begin(), w.bytes().end());
    const auto offset = static_cast<std::uint32_t>(solo.image.size());
    solo.image.insert(solo.image.end(), record.begin(), record.end());
    solo.count = 1;
    seal(solo);
    return {solo.id, offset, static_cast<std::uint32_t>(record.size())};
  }

  if (it == open_.end()) it = open_.emplace(key, open_container(owner, kind)).first;
  OpenContainer& c = it->second;
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(record.size()));
  c.image.insert(c.image.end(), w.bytes().begin(), w.bytes().end());
  const auto offset = static_cast<std::uint32_t>(c.image.size());
  c.image.insert(c.image.end(), record.begin(), record.end());
  ++c.count;
  return {c.id, offset, static_cast<std::uint32_t>(record.size())};
}

void ContainerStore::flush_all() {
  std::lock_guard lock(write_mu_);
  std::vector<ContainerId> failed;
  std::string first_error;
  for (auto it = unpersisted_.begin(); it != unpersisted_.end();) {
    try {
      backend_.put(it->first, it->second.image);
      it = unpersisted_.erase(it);
    } catch (const Error& e) {
      failed.push_back(it->first);
      if (first_error.empty()) first_error = e.what();
      ++it;
    }
  }
  for (auto it = open_.begin(); it != open_.end();) {
    write_u32_at(it->second.image, 12, it->second.count);
    try {
      backend_.put(it->second.id, it->second.image);
      it = open_.erase(it);
    } catch (const Error& e) {
      failed.push_back(it->second.id);
      if (first_error.empty()) first_error = e.what();
      ++it;
    }
  }
  if (!failed.empty()) {
    std::string ids;
    for (ContainerId id : failed) ids += (ids.empty() ? "" : ",") + id_name(id);
    fail(Errc::backend, "partial flush; unpersisted containers [" + ids + "]: " + first_error);
  }
}

std::shared_ptr<const Bytes> ContainerStore::fetch(ContainerId id) {
  {
    std::lock_guard lock(cache_mu_);
    auto it = cache_.find(id);
    if (it != cache_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second.second);
      return it->second.first;
    }
  }
  ++fetches_;
  auto data = backend_.get(id);
  if (!data) fail(Errc::not_found, "container " + id_name(id) + " not found");
  auto image = std::make_shared<const Bytes>(std::move(*data));
  if (capacity_ == 0) return image;
  std::lock_guard lock(cache_mu_);
  if (cache_.count(id) == 0) {
    lru_.push_front(id);
    cache_.emplace(id, std::make_pair(image, lru_.begin()));
    while (cache_.size() > capacity_) {
      cache_.erase(lru_.back());
      lru_.pop_back();
    }
  }
  return image;
}

Bytes ContainerStore::read_record(const ContainerRef& ref) {
  auto slice = [&](const Bytes& image) {
    if (static_cast<std::uint64_t>(ref.offset) + ref.length > image.size())
      fail(Errc::corruption, "short read from container " + id_name(ref.container));
    auto begin = image.begin() + ref.offset;
    return Bytes(begin, begin + ref.length);
  };
  {
    std::lock_guard lock(write_mu_);
    for (const auto& [_, c] : open_)
      if (c.id == ref.container) return slice(c.image);
    auto it = unpersisted_.find(ref.container);
    if (it != unpersisted_.end()) return slice(it->second.image);
  }
  return slice(*fetch(ref.container));
}

void ContainerStore::drop_cache() {
  std::lock_guard lock(cache_mu_);
  cache_.clear();
  lru_.clear();
}

}  // namespace cdstore
