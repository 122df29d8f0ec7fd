#include "cdstore/index.hpp"

#include <mutex>
#include <string>

#include "cdstore/byte_io.hpp"
#include "cdstore/crypto.hpp"
#include "cdstore/error.hpp"

namespace cdstore {

namespace {

std::string key_with(std::string_view prefix, const Digest& d) {
  std::string k(prefix);
  k.append(reinterpret_cast<const char*>(d.data()), d.size());
  return k;
}

std::string file_kv_key(const Digest& d) { return key_with("F/", d); }
std::string share_kv_key(const Digest& d) { return key_with("S/", d); }
std::string user_prefix(UserId user) { return "U/" + std::to_string(user) + "/"; }
std::string user_kv_key(UserId user, const Digest& d) { return key_with(user_prefix(user), d); }

Digest digest_from_key(std::string_view key, std::size_t prefix_len) {
  Digest d{};
  if (key.size() != prefix_len + d.size()) fail(Errc::corruption, "malformed index key");
  std::copy(key.begin() + static_cast<std::ptrdiff_t>(prefix_len), key.end(), d.begin());
  return d;
}

void write_ref(ByteWriter& w, const ContainerRef& ref) {
  w.u64(ref.container);
  w.u32(ref.offset);
  w.u32(ref.length);
}

ContainerRef read_ref(ByteReader& r) {
  ContainerRef ref;
  ref.container = r.u64();
  ref.offset = r.u32();
  ref.length = r.u32();
  return ref;
}

Bytes encode_link(const UserShareLink& link) {
  ByteWriter w;
  w.digest(link.server_fingerprint);
  w.u8(link.pending ? 1 : 0);
  return std::move(w).take();
}

UserShareLink decode_link(ByteView record) {
  ByteReader r(record, Errc::corruption);
  UserShareLink link;
  link.server_fingerprint = r.digest();
  link.pending = r.u8() != 0;
  r.expect_done();
  return link;
}

}  // namespace

Bytes encode_recipe(const FileRecipe& recipe) {
  ByteWriter w(8 + recipe.size() * (kDigestSize + 4));
  w.u64(recipe.size());
  for (const auto& e : recipe) {
    w.digest(e.share_fingerprint);
    w.u32(e.secret_size);
  }
  return std::move(w).take();
}

FileRecipe decode_recipe(ByteView record) {
  ByteReader r(record, Errc::corruption);
  const std::uint64_t n = r.u64();
  if (n > r.remaining() / (kDigestSize + 4)) fail(Errc::corruption, "recipe count exceeds record");
  FileRecipe recipe(static_cast<std::size_t>(n));
  for (auto& e : recipe) {
    e.share_fingerprint = r.digest();
    e.secret_size = r.u32();
  }
  r.expect_done();
  return recipe;
}

Bytes encode_file_entry(const FileIndexEntry& e) {
  ByteWriter w;
  write_ref(w, e.recipe_ref);
  w.u64(e.file_size);
  w.u64(e.secret_count);
  w.u32(e.pathname_size);
  return std::move(w).take();
}

FileIndexEntry decode_file_entry(ByteView record) {
  ByteReader r(record, Errc::corruption);
  FileIndexEntry e;
  e.recipe_ref = read_ref(r);
  e.file_size = r.u64();
  e.secret_count = r.u64();
  e.pathname_size = r.u32();
  r.expect_done();
  return e;
}

Bytes encode_share_entry(const ShareIndexEntry& e) {
  ByteWriter w;
  write_ref(w, e.container_ref);
  w.u32(e.share_size);
  w.u32(static_cast<std::uint32_t>(e.owners.size()));
  for (const auto& [user, count] : e.owners) {
    w.u32(user);
    w.u32(count);
  }
  return std::move(w).take();
}

ShareIndexEntry decode_share_entry(const Digest& key, ByteView record) {
  ByteReader r(record, Errc::corruption);
  ShareIndexEntry e;
  e.key = key;
  e.container_ref = read_ref(r);
  e.share_size = r.u32();
  const std::size_t owners = r.count(8);
  for (std::size_t i = 0; i < owners; ++i) {
    const UserId user = r.u32();
    e.owners[user] = r.u32();
  }
  r.expect_done();
  return e;
}

ServerIndex::ServerIndex(KvStore& kv, ContainerStore& containers, Bytes server_salt)
    : kv_(kv), containers_(containers), salt_(std::move(server_salt)) {}

Digest ServerIndex::server_fingerprint(ByteView share) const { return crypto::sha256(salt_, share); }

Digest ServerIndex::file_key(UserId user, ByteView pathname_record) {
  ByteWriter w;
  w.u32(user);
  return crypto::sha256(pathname_record, w.bytes());
}

std::vector<bool> ServerIndex::intra_user_query(UserId user, std::span<const Digest> fingerprints) const {
  std::shared_lock lock(mu_);
  std::vector<bool> flags;
  flags.reserve(fingerprints.size());
  for (const Digest& fp : fingerprints) flags.push_back(kv_.get(user_kv_key(user, fp)).has_value());
  return flags;
}

InsertOutcome ServerIndex::insert_share(UserId user, const Digest& client_fp, ByteView share) {
  const Digest server_fp = server_fingerprint(share);
  std::unique_lock lock(mu_);
  InsertOutcome outcome = InsertOutcome::deduplicated;
  ShareIndexEntry entry;
  if (auto existing = kv_.get(share_kv_key(server_fp))) {
    entry = decode_share_entry(server_fp, *existing);
  } else {
    entry.key = server_fp;
    entry.container_ref = containers_.append_record(user, ContainerKind::share, share);
    entry.share_size = static_cast<std::uint32_t>(share.size());
    outcome = InsertOutcome::stored_new;
  }
  ++entry.owners[user];
  WriteBatch batch;
  batch.put(share_kv_key(server_fp), encode_share_entry(entry));
  batch.put(user_kv_key(user, client_fp), encode_link({server_fp, true}));
  kv_.write(batch);
  return outcome;
}

std::optional<UserShareLink> ServerIndex::user_link(UserId user, const Digest& client_fp) const {
  std::shared_lock lock(mu_);
  auto v = kv_.get(user_kv_key(user, client_fp));
  if (!v) return std::nullopt;
  return decode_link(*v);
}

std::optional<ShareIndexEntry> ServerIndex::find_share(const Digest& server_fp) const {
  std::shared_lock lock(mu_);
  auto v = kv_.get(share_kv_key(server_fp));
  if (!v) return std::nullopt;
  return decode_share_entry(server_fp, *v);
}

Digest ServerIndex::claim_reference(UserId user, const Digest& client_fp) {
  std::unique_lock lock(mu_);
  auto raw_link = kv_.get(user_kv_key(user, client_fp));
  if (!raw_link) fail(Errc::not_found, "no share with this client fingerprint for user " + std::to_string(user));
  UserShareLink link = decode_link(*raw_link);
  if (link.pending) {
    link.pending = false;
    kv_.put(user_kv_key(user, client_fp), encode_link(link));
    return link.server_fingerprint;
  }
  auto raw_entry = kv_.get(share_kv_key(link.server_fingerprint));
  if (!raw_entry) fail(Errc::corruption, "user link points at a missing share entry");
  ShareIndexEntry entry = decode_share_entry(link.server_fingerprint, *raw_entry);
  ++entry.owners[user];
  kv_.put(share_kv_key(entry.key), encode_share_entry(entry));
  return link.server_fingerprint;
}

std::uint32_t ServerIndex::decrement_owner(UserId user, const Digest& server_fp) {
  std::unique_lock lock(mu_);
  auto raw = kv_.get(share_kv_key(server_fp));
  if (!raw) fail(Errc::not_found, "unknown share fingerprint");
  ShareIndexEntry entry = decode_share_entry(server_fp, *raw);
  auto it = entry.owners.find(user);
  require(it != entry.owners.end() && it->second > 0,
          "decrement_owner: user " + std::to_string(user) + " holds no reference");
  const std::uint32_t remaining = --it->second;
  if (remaining == 0) entry.owners.erase(it);
  kv_.put(share_kv_key(server_fp), encode_share_entry(entry));
  return remaining;
}

Digest ServerIndex::put_file(UserId user, ByteView pathname_record, std::uint64_t file_size,
                             std::uint32_t pathname_size, const FileRecipe& recipe) {
  const Digest key = file_key(user, pathname_record);
  std::unique_lock lock(mu_);
  FileIndexEntry entry;
  entry.recipe_ref = containers_.append_record(user, ContainerKind::recipe, encode_recipe(recipe));
  entry.file_size = file_size;
  entry.secret_count = recipe.size();
  entry.pathname_size = pathname_size;
  kv_.put(file_kv_key(key), encode_file_entry(entry));
  return key;
}

std::optional<FileIndexEntry> ServerIndex::get_file_entry(const Digest& key) const {
  std::shared_lock lock(mu_);
  auto v = kv_.get(file_kv_key(key));
  if (!v) return std::nullopt;
  return decode_file_entry(*v);
}

ServerIndex::FileLookup ServerIndex::get_file(UserId user, ByteView pathname_record) const {
  auto entry = get_file_entry(file_key(user, pathname_record));
  if (!entry) fail(Errc::not_found, "file not found for user " + std::to_string(user));
  FileLookup out{*entry, decode_recipe(containers_.read_record(entry->recipe_ref))};
  if (out.recipe.size() != entry->secret_count)
    fail(Errc::corruption, "recipe length does not match file entry");
  return out;
}

void ServerIndex::for_each_share(const std::function<void(const ShareIndexEntry&)>& visit) const {
  std::shared_lock lock(mu_);
  kv_.scan("S/", [&](std::string_view key, ByteView value) {
    visit(decode_share_entry(digest_from_key(key, 2), value));
    return true;
  });
}

void ServerIndex::for_each_file(const std::function<void(const Digest&, const FileIndexEntry&)>& visit) const {
  std::shared_lock lock(mu_);
  kv_.scan("F/", [&](std::string_view key, ByteView value) {
    visit(digest_from_key(key, 2), decode_file_entry(value));
    return true;
  });
}

}  // namespace cdstore
