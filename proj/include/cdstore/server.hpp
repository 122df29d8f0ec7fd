#pragma once

// One cloud's storage server: terminates the protocol, runs inter-user
// deduplication, and persists containers and indices under a backend
// directory.

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cdstore/container_store.hpp"
#include "cdstore/index.hpp"
#include "cdstore/kv_store.hpp"
#include "cdstore/net.hpp"
#include "cdstore/proto.hpp"

namespace cdstore {

/// Environment variable naming the server-secret salt file.
inline constexpr const char* kSaltFileEnv = "CDSTORE_SERVER_SALT_FILE";

struct ServerConfig {
  net::Endpoint listen;
  std::filesystem::path backend_root;
  /// Empty: read `salt_file`, generating it on first start.
  Bytes salt;
  /// Empty: $CDSTORE_SERVER_SALT_FILE, else <backend_root>/server.salt.
  std::filesystem::path salt_file;
  std::size_t cache_capacity = 128;
  std::uint32_t cloud_index = 0;
  /// Re-check the server fingerprint of every share read for download.
  bool verify_on_read = true;
  /// Suppress diagnostics on stderr.
  bool quiet = false;
};

struct Session {
  std::optional<UserId> user;
};

struct ServerStats {
  std::uint64_t unique_shares = 0;
  std::uint64_t physical_share_bytes = 0;
  std::uint64_t files = 0;
  std::uint64_t share_containers = 0;
  std::uint64_t recipe_containers = 0;
  std::uint64_t backend_bytes = 0;
};

class Server {
 public:
  explicit Server(ServerConfig config);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  const ServerConfig& config() const { return config_; }

  /// Handles one request. Every reply is one or more frames; requests that
  /// fail yield a single ERROR frame.
  std::vector<proto::Message> handle(Session& session, const proto::Message& request);

  proto::Message handle_hello(Session& session, const proto::Hello& hello);
  proto::FpReply handle_fp_query(const Session& session, const proto::FpQuery& query);
  proto::Ack handle_share_batch(const Session& session, const proto::ShareBatch& batch);
  proto::Ack handle_file_meta(const Session& session, const proto::FileMeta& meta);
  std::vector<proto::Message> handle_download(const Session& session, const proto::DownloadReq& req);

  /// Binds the listener and serves sessions on background threads.
  void start();
  /// Stops accepting, closes sessions, and flushes containers and index.
  void stop();
  bool running() const { return running_; }
  std::uint16_t port() const { return port_; }
  net::Endpoint endpoint() const { return {config_.listen.host, port_}; }

  /// start() then block until stop() is called from another thread.
  void run();

  void flush();
  void drop_cache();

  ServerStats stats();

  /// Location of the share stored for secret `sequence` of a file; used by
  /// fault-injection tooling.
  ContainerRef locate_share(UserId user, ByteView pathname_share, std::uint64_t sequence);
  std::filesystem::path container_path(ContainerId id) const;

  ServerIndex& index() { return *index_; }
  ContainerStore& containers() { return *containers_; }

 private:
  void serve(std::shared_ptr<net::TcpConnection> conn);
  ContainerId allocate_container_id();

  ServerConfig config_;
  std::unique_ptr<LogKvStore> kv_;
  std::unique_ptr<FsBackend> backend_;
  std::unique_ptr<ContainerStore> containers_;
  std::unique_ptr<ServerIndex> index_;
  std::mutex id_mu_;
  // Serializes index mutations made by concurrent sessions.
  std::mutex write_mu_;

  std::unique_ptr<net::TcpListener> listener_;
  std::thread accept_thread_;
  std::mutex sessions_mu_;
  std::vector<std::pair<std::shared_ptr<net::TcpConnection>, std::thread>> sessions_;
  std::atomic<bool> running_{false};
  std::uint16_t port_ = 0;
  std::mutex stop_mu_;
  std::condition_variable stop_cv_;
};

Bytes load_or_create_salt(const std::filesystem::path& path);

}  // namespace cdstore
