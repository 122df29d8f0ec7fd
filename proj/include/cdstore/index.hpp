#pragma once

// Server-side file index and share index over a KvStore.
//
// Key namespaces:
//   F/<32-byte file key>                 -> FileIndexEntry
//   S/<32-byte server fingerprint>       -> ShareIndexEntry
//   U/<user>/<32-byte client fingerprint> -> UserShareLink
//   M/next_container                      -> u64 container id high-water mark

#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <vector>

#include "cdstore/container_store.hpp"
#include "cdstore/kv_store.hpp"
#include "cdstore/types.hpp"

namespace cdstore {

struct FileIndexEntry {
  ContainerRef recipe_ref;
  std::uint64_t file_size = 0;
  std::uint64_t secret_count = 0;
  /// Length of the full pathname before it was dispersed.
  std::uint32_t pathname_size = 0;

  friend bool operator==(const FileIndexEntry&, const FileIndexEntry&) = default;
};

struct RecipeEntry {
  Digest share_fingerprint{};  // server fingerprint
  std::uint32_t secret_size = 0;

  friend bool operator==(const RecipeEntry&, const RecipeEntry&) = default;
};

using FileRecipe = std::vector<RecipeEntry>;

struct ShareIndexEntry {
  Digest key{};
  ContainerRef container_ref;
  std::uint32_t share_size = 0;
  std::map<UserId, std::uint32_t> owners;
};

/// Per-user mapping from a client fingerprint to the stored share. `pending`
/// marks an upload whose reference has not yet been claimed by a file.
struct UserShareLink {
  Digest server_fingerprint{};
  bool pending = false;
};

enum class InsertOutcome { stored_new, deduplicated };

Bytes encode_recipe(const FileRecipe& recipe);
FileRecipe decode_recipe(ByteView record);

Bytes encode_file_entry(const FileIndexEntry& e);
FileIndexEntry decode_file_entry(ByteView record);

Bytes encode_share_entry(const ShareIndexEntry& e);
ShareIndexEntry decode_share_entry(const Digest& key, ByteView record);

class ServerIndex {
 public:
  ServerIndex(KvStore& kv, ContainerStore& containers, Bytes server_salt);

  /// SHA-256(server salt || share). Never leaves the server.
  Digest server_fingerprint(ByteView share) const;

  /// Hash of the (dispersed) pathname record and the user id.
  static Digest file_key(UserId user, ByteView pathname_record);

  /// flags[i] is true iff `user` already holds a share with client
  /// fingerprint fingerprints[i]. Other users' holdings never show.
  std::vector<bool> intra_user_query(UserId user, std::span<const Digest> fingerprints) const;

  /// Stores `share` if no user holds identical bytes, otherwise adds `user`
  /// as an owner. Each call adds one reference for `user` and records the
  /// client fingerprint mapping as pending.
  InsertOutcome insert_share(UserId user, const Digest& client_fp, ByteView share);

  std::optional<UserShareLink> user_link(UserId user, const Digest& client_fp) const;
  std::optional<ShareIndexEntry> find_share(const Digest& server_fp) const;

  /// Binds one recipe reference to the share behind `client_fp`: consumes
  /// the pending upload reference if present, else adds a reference.
  /// Returns the server fingerprint; throws not_found for unknown shares.
  Digest claim_reference(UserId user, const Digest& client_fp);

  /// Returns the remaining count for `user`; the user is dropped from the
  /// owners at zero but the entry itself stays.
  std::uint32_t decrement_owner(UserId user, const Digest& server_fp);

  /// Persists the recipe to a recipe container and the entry to the file
  /// index, replacing any previous version for (user, pathname_record).
  Digest put_file(UserId user, ByteView pathname_record, std::uint64_t file_size,
                  std::uint32_t pathname_size, const FileRecipe& recipe);

  struct FileLookup {
    FileIndexEntry entry;
    FileRecipe recipe;
  };
  /// Throws not_found when the (user, pathname_record) pair is unknown.
  FileLookup get_file(UserId user, ByteView pathname_record) const;
  std::optional<FileIndexEntry> get_file_entry(const Digest& file_key) const;

  void for_each_share(const std::function<void(const ShareIndexEntry&)>& visit) const;
  void for_each_file(const std::function<void(const Digest&, const FileIndexEntry&)>& visit) const;

  ContainerStore& containers() { return containers_; }

 private:
  KvStore& kv_;
  ContainerStore& containers_;
  Bytes salt_;
  mutable std::shared_mutex mu_;
};

}  // namespace cdstore
