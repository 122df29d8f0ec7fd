#include "cdstore/server.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "cdstore/byte_io.hpp"
#include "cdstore/crypto.hpp"
#include "cdstore/error.hpp"

namespace cdstore {

namespace {

constexpr std::string_view kNextContainerKey = "M/next_container";

proto::Message error_message(Errc code, const std::string& what) {
  return proto::to_message(proto::ErrorReply{static_cast<std::uint16_t>(code), what});
}

void log_line(const ServerConfig& config, const std::string& msg) {
  if (!config.quiet) std::cerr << "[server " << config.cloud_index << "] " << msg << '\n';
}

}  // namespace

Bytes load_or_create_salt(const std::filesystem::path& path) {
  if (std::filesystem::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    Bytes salt((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (salt.empty()) fail(Errc::io, "server salt file " + path.string() + " is empty");
    return salt;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  Bytes salt = crypto::random_bytes(32);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(salt.data()), static_cast<std::streamsize>(salt.size()));
  if (!out) fail(Errc::io, "cannot write server salt file " + path.string());
  std::filesystem::permissions(path, std::filesystem::perms::owner_read | std::filesystem::perms::owner_write);
  return salt;
}

Server::Server(ServerConfig config) : config_(std::move(config)) {
  require(!config_.backend_root.empty(), "server backend root must be set");
  std::filesystem::create_directories(config_.backend_root);
  if (config_.salt.empty()) {
    auto path = config_.salt_file;
    if (path.empty()) {
      const char* env = std::getenv(kSaltFileEnv);
      path = env && *env ? std::filesystem::path(env) : config_.backend_root / "server.salt";
    }
    config_.salt = load_or_create_salt(path);
  }
  kv_ = std::make_unique<LogKvStore>(config_.backend_root / "index.log");
  backend_ = std::make_unique<FsBackend>(config_.backend_root);
  containers_ = std::make_unique<ContainerStore>(*backend_, config_.cache_capacity,
                                                 [this] { return allocate_container_id(); });
  index_ = std::make_unique<ServerIndex>(*kv_, *containers_, config_.salt);
}

Server::~Server() {
  try {
    stop();
    flush();
  } catch (const std::exception& e) {
    log_line(config_, std::string("shutdown error: ") + e.what());
  }
}

ContainerId Server::allocate_container_id() {
  std::lock_guard lock(id_mu_);
  ContainerId next = 1;
  if (auto v = kv_->get(kNextContainerKey)) {
    next = ByteReader(*v, Errc::corruption).u64();
  } else {
    auto existing = backend_->list();
    if (!existing.empty()) next = existing.back() + 1;
  }
  ByteWriter w;
  w.u64(next + 1);
  kv_->put(std::string(kNextContainerKey), std::move(w).take());
  return next;
}

proto::Message Server::handle_hello(Session& session, const proto::Hello& hello) {
  if (hello.version != proto::kProtocolVersion)
    return error_message(Errc::protocol, "unsupported protocol version " + std::to_string(hello.version));
  if (hello.cloud_index != config_.cloud_index)
    return error_message(Errc::usage, "client expects cloud " + std::to_string(hello.cloud_index) +
                                          " but this server is cloud " + std::to_string(config_.cloud_index));
  session.user = hello.user;
  return proto::to_message(proto::Ack{config_.cloud_index});
}

proto::FpReply Server::handle_fp_query(const Session& session, const proto::FpQuery& query) {
  proto::FpReply reply;
  reply.duplicate = index_->intra_user_query(*session.user, query.fingerprints);
  return reply;
}

proto::Ack Server::handle_share_batch(const Session& session, const proto::ShareBatch& batch) {
  const UserId user = *session.user;
  for (const auto& s : batch.shares)
    if (crypto::sha256(s.share) != s.client_fp)
      fail(Errc::protocol, "share " + std::to_string(s.sequence) + " does not match its fingerprint");
  std::lock_guard lock(write_mu_);
  for (const auto& s : batch.shares) {
    // A replayed batch finds the user's link already present.
    if (index_->user_link(user, s.client_fp)) continue;
    index_->insert_share(user, s.client_fp, s.share);
  }
  return {batch.shares.size()};
}

proto::Ack Server::handle_file_meta(const Session& session, const proto::FileMeta& meta) {
  const UserId user = *session.user;
  std::lock_guard lock(write_mu_);
  for (std::size_t i = 0; i < meta.secrets.size(); ++i)
    if (!index_->user_link(user, meta.secrets[i].client_fp))
      fail(Errc::not_found, "share for secret " + std::to_string(i) + " was never uploaded");
  FileRecipe recipe;
  recipe.reserve(meta.secrets.size());
  for (const auto& s : meta.secrets)
    recipe.push_back({index_->claim_reference(user, s.client_fp), s.secret_size});
  index_->put_file(user, meta.pathname_share, meta.file_size, meta.pathname_size, recipe);
  return {meta.secrets.size()};
}

std::vector<proto::Message> Server::handle_download(const Session& session, const proto::DownloadReq& req) {
  const auto file = index_->get_file(*session.user, req.pathname_share);
  std::vector<proto::Message> out;
  proto::RecipeReply recipe_reply;
  recipe_reply.file_size = file.entry.file_size;
  for (const auto& e : file.recipe) recipe_reply.secret_sizes.push_back(e.secret_size);
  out.push_back(proto::to_message(recipe_reply));

  proto::ShareReply batch;
  std::size_t batch_bytes = 12;
  for (std::uint64_t seq = 0; seq < file.recipe.size(); ++seq) {
    proto::ReplyShare share;
    const auto& fp = file.recipe[seq].share_fingerprint;
    try {
      auto entry = index_->find_share(fp);
      if (!entry) {
        share.status = proto::ShareStatus::missing;
      } else {
        share.data = containers_->read_record(entry->container_ref);
        if (config_.verify_on_read && index_->server_fingerprint(share.data) != fp) {
          share.status = proto::ShareStatus::corrupt;
          share.data.clear();
        }
      }
    } catch (const Error& e) {
      if (e.code() != Errc::corruption && e.code() != Errc::not_found) throw;
      share.status = e.code() == Errc::corruption ? proto::ShareStatus::corrupt : proto::ShareStatus::missing;
      share.data.clear();
    }
    if (share.status != proto::ShareStatus::ok)
      log_line(config_, "download: share for secret " + std::to_string(seq) + " unreadable");
    const std::size_t sz = 5 + share.data.size();
    if (!batch.shares.empty() && batch_bytes + sz > proto::kBatchBytes) {
      out.push_back(proto::to_message(batch));
      batch = {};
      batch.first_sequence = seq;
      batch_bytes = 12;
    }
    batch_bytes += sz;
    batch.shares.push_back(std::move(share));
  }
  if (!batch.shares.empty()) out.push_back(proto::to_message(batch));
  return out;
}

std::vector<proto::Message> Server::handle(Session& session, const proto::Message& request) {
  using proto::MessageType;
  try {
    if (request.type == MessageType::hello) return {handle_hello(session, proto::parse_hello(request))};
    if (!session.user) return {error_message(Errc::protocol, "HELLO required before other requests")};
    switch (request.type) {
      case MessageType::fp_query:
        return {proto::to_message(handle_fp_query(session, proto::parse_fp_query(request)))};
      case MessageType::share_batch:
        return {proto::to_message(handle_share_batch(session, proto::parse_share_batch(request)))};
      case MessageType::file_meta:
        return {proto::to_message(handle_file_meta(session, proto::parse_file_meta(request)))};
      case MessageType::download_req:
        return handle_download(session, proto::parse_download_req(request));
      default:
        return {error_message(Errc::protocol, std::string("unexpected request ") + proto::type_name(request.type))};
    }
  } catch (const Error& e) {
    return {error_message(e.code(), e.what())};
  } catch (const std::exception& e) {
    return {error_message(Errc::io, e.what())};
  }
}

void Server::serve(std::shared_ptr<net::TcpConnection> conn) {
  struct NonOwning : net::Connection {
    explicit NonOwning(net::Connection& c) : inner(c) {}
    void send_all(ByteView d) override { inner.send_all(d); }
    std::size_t recv_some(MutableByteView o) override { return inner.recv_some(o); }
    void shutdown() override { inner.shutdown(); }
    net::Connection& inner;
  };
  net::MessageChannel channel(std::make_unique<NonOwning>(*conn));
  Session session;
  try {
    while (running_) {
      auto request = channel.receive();
      if (!request) break;
      for (const auto& reply : handle(session, *request)) channel.send(reply);
    }
  } catch (const Error& e) {
    // Framing errors end the session; the peer gets one ERROR if it is still there.
    if (e.code() == Errc::protocol) {
      try {
        channel.send(error_message(e.code(), e.what()));
      } catch (...) {
      }
    }
    if (running_) log_line(config_, std::string("session ended: ") + e.what());
  }
  conn->shutdown();
}

void Server::start() {
  if (running_) return;
  // A restarted server keeps the port it was first given.
  auto listen = config_.listen;
  if (port_ != 0) listen.port = port_;
  listener_ = std::make_unique<net::TcpListener>(listen);
  port_ = listener_->port();
  running_ = true;
  accept_thread_ = std::thread([this] {
    while (running_) {
      auto conn = listener_->accept();
      if (!conn) break;
      std::shared_ptr<net::TcpConnection> shared(std::move(conn));
      std::lock_guard lock(sessions_mu_);
      if (!running_) break;
      sessions_.emplace_back(shared, std::thread([this, shared] { serve(shared); }));
    }
  });
  log_line(config_, "listening on " + endpoint().to_string());
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  listener_->close();
  if (accept_thread_.joinable()) accept_thread_.join();
  std::vector<std::pair<std::shared_ptr<net::TcpConnection>, std::thread>> sessions;
  {
    std::lock_guard lock(sessions_mu_);
    sessions.swap(sessions_);
  }
  for (auto& [conn, _] : sessions) conn->shutdown();
  for (auto& [_, t] : sessions)
    if (t.joinable()) t.join();
  listener_.reset();
  flush();
  stop_cv_.notify_all();
}

void Server::run() {
  start();
  std::unique_lock lock(stop_mu_);
  stop_cv_.wait(lock, [this] { return !running_; });
}

void Server::flush() {
  std::lock_guard lock(write_mu_);
  containers_->flush_all();
  kv_->sync();
}

void Server::drop_cache() { containers_->drop_cache(); }

ServerStats Server::stats() {
  ServerStats s;
  index_->for_each_share([&](const ShareIndexEntry& e) {
    ++s.unique_shares;
    s.physical_share_bytes += e.share_size;
  });
  index_->for_each_file([&](const Digest&, const FileIndexEntry&) { ++s.files; });
  for (ContainerId id : backend_->list()) {
    auto image = backend_->get(id);
    if (!image) continue;
    s.backend_bytes += image->size();
    try {
      auto h = parse_container(*image);
      (h.kind == ContainerKind::share ? s.share_containers : s.recipe_containers) += 1;
    } catch (const Error&) {
    }
  }
  return s;
}

ContainerRef Server::locate_share(UserId user, ByteView pathname_share, std::uint64_t sequence) {
  const auto file = index_->get_file(user, pathname_share);
  if (sequence >= file.recipe.size()) fail(Errc::not_found, "secret sequence out of range");
  auto entry = index_->find_share(file.recipe[sequence].share_fingerprint);
  if (!entry) fail(Errc::not_found, "share entry missing");
  return entry->container_ref;
}

std::filesystem::path Server::container_path(ContainerId id) const { return backend_->object_path(id); }

}  // namespace cdstore
