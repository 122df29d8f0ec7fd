#pragma once

#include <filesystem>
#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "cdstore/caont.hpp"
#include "cdstore/chunker.hpp"
#include "cdstore/net.hpp"
#include "cdstore/proto.hpp"
#include "cdstore/rs_codec.hpp"

namespace cdstore {

/// Client configuration. Text format, one `key = value` per line, `#`
/// comments:
///
///   user = 7
///   n = 4
///   k = 3
///   cloud = 127.0.0.1:9100      # repeated n times, cloud 0 first
///   chunking = variable         # or fixed
///   chunk_avg = 8192
///   chunk_min = 2048
///   chunk_max = 16384
///   fixed_size = 4096
///   salt = 00112233             # hex, deployment-wide, optional
///   workers = 2
///   state_dir = /var/lib/cdstore-client   # optional local history
struct ClientConfig {
  UserId user = 0;
  std::vector<net::Endpoint> clouds;
  CodingParams params;
  ChunkParams chunking;
  Bytes salt;
  unsigned workers = 1;
  std::filesystem::path state_dir;

  void validate() const;

  static ClientConfig parse(std::string_view text);
  static ClientConfig load(const std::filesystem::path& path);
};

/// The full pathname dispersed like a secret: share i goes to cloud i.
struct PathnameRecord {
  std::vector<ShareSlice> shares;
  std::uint32_t pathname_size = 0;
};

PathnameRecord share_pathname(std::string_view pathname, const CodingParams& params, ByteView salt = {});
std::string recover_pathname(std::span<const ShareSlice> shares, std::size_t pathname_size,
                             const CodingParams& params, ByteView salt = {});

struct BackupReport {
  std::uint64_t logical_bytes = 0;
  std::uint64_t secrets = 0;
  /// Per cloud: all shares before deduplication.
  std::vector<std::uint64_t> logical_share_bytes;
  /// Per cloud: share bytes actually sent.
  std::vector<std::uint64_t> transferred_share_bytes;
  /// Per cloud: share bytes skipped, flagged by the server or repeated
  /// within this backup.
  std::vector<std::uint64_t> duplicate_share_bytes;
  /// Per cloud: FP_QUERY and FILE_META frame bytes.
  std::vector<std::uint64_t> metadata_bytes;

  std::uint64_t total_logical_share_bytes() const;
  std::uint64_t total_transferred_share_bytes() const;
  /// 1 - transferred / logical shares.
  double intra_user_saving() const;
};

struct RestoreReport {
  std::uint64_t bytes = 0;
  std::uint64_t secrets = 0;
  /// Clouds whose shares were downloaded, in the order they were used.
  std::vector<int> clouds_used;
  /// Secrets that needed a share from a substitute cloud or more than one
  /// k-subset.
  std::vector<std::uint64_t> retried_secrets;
};

class Client {
 public:
  explicit Client(ClientConfig config);

  const ClientConfig& config() const { return config_; }

  /// Uploads a file under `pathname` (defaults to the absolute path).
  BackupReport backup(const std::filesystem::path& file, std::string pathname = {});
  BackupReport backup_stream(std::istream& in, const std::string& pathname);

  RestoreReport restore(const std::string& pathname, const std::filesystem::path& out);
  RestoreReport restore_stream(const std::string& pathname, std::ostream& out);

  /// Called with every frame received from any cloud.
  using FrameTap = std::function<void(int cloud, const proto::Message&)>;
  void set_frame_tap(FrameTap tap) { tap_ = std::move(tap); }

 private:
  struct CloudLink;

  std::unique_ptr<CloudLink> open_link(int cloud) const;
  void append_history(const std::string& pathname, const BackupReport& report) const;

  ClientConfig config_;
  ConvergentDispersal codec_;
  FrameTap tap_;
};

/// Summary of the local history journal in `state_dir`, for `client stats`.
std::string format_history(const std::filesystem::path& state_dir);

}  // namespace cdstore
