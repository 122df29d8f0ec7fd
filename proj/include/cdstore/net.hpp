#pragma once

// Byte-stream transport and message framing on top of it. The Connection
// interface is the hook for alternative (e.g. encrypted) transports.

#include <cstdint>
#include <memory>
#include <string>

#include "cdstore/proto.hpp"
#include "cdstore/types.hpp"

namespace cdstore::net {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  /// "host:port"
  static Endpoint parse(const std::string& text);
  std::string to_string() const;
};

class Connection {
 public:
  virtual ~Connection() = default;
  virtual void send_all(ByteView data) = 0;
  /// Reads up to out.size() bytes; 0 means the peer closed.
  virtual std::size_t recv_some(MutableByteView out) = 0;
  virtual void shutdown() = 0;
};

class TcpConnection : public Connection {
 public:
  explicit TcpConnection(int fd);
  ~TcpConnection() override;

  TcpConnection(const TcpConnection&) = delete;
  TcpConnection& operator=(const TcpConnection&) = delete;

  /// Throws io on failure to connect.
  static std::unique_ptr<TcpConnection> connect(const Endpoint& ep, int timeout_ms = 2000);

  void send_all(ByteView data) override;
  std::size_t recv_some(MutableByteView out) override;
  void shutdown() override;

 private:
  int fd_;
};

class TcpListener {
 public:
  /// Port 0 picks an ephemeral port.
  explicit TcpListener(const Endpoint& ep);
  ~TcpListener();

  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  /// Blocks; returns nullptr once close() has been called.
  std::unique_ptr<TcpConnection> accept();
  void close();

 private:
  int fd_;
  std::uint16_t port_ = 0;
};

/// Sends and receives whole protocol frames over a Connection.
class MessageChannel {
 public:
  explicit MessageChannel(std::unique_ptr<Connection> conn) : conn_(std::move(conn)) {}

  void send(const proto::Message& m);
  /// nullopt when the peer closed cleanly between frames.
  std::optional<proto::Message> receive();
  /// Like receive() but a closed peer is an io error.
  proto::Message expect();

  Connection& connection() { return *conn_; }

 private:
  std::unique_ptr<Connection> conn_;
  Bytes buf_;
  std::size_t head_ = 0;
};

}  // namespace cdstore::net
