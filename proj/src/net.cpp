#include "cdstore/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "cdstore/error.hpp"

namespace cdstore::net {

namespace {

[[noreturn]] void fail_errno(const std::string& what) {
  fail(Errc::io, what + ": " + std::strerror(errno));
}

sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr)
    fail(Errc::io, "cannot resolve host " + ep.host);
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

}  // namespace

Endpoint Endpoint::parse(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) fail(Errc::parse, "endpoint '" + text + "' is not host:port");
  Endpoint ep;
  ep.host = text.substr(0, colon);
  if (ep.host.empty()) ep.host = "127.0.0.1";
  try {
    const unsigned long port = std::stoul(text.substr(colon + 1));
    if (port > 65535) throw std::out_of_range("port");
    ep.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    fail(Errc::parse, "endpoint '" + text + "' has a bad port");
  }
  return ep;
}

std::string Endpoint::to_string() const { return host + ":" + std::to_string(port); }

TcpConnection::TcpConnection(int fd) : fd_(fd) {
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

TcpConnection::~TcpConnection() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpConnection> TcpConnection::connect(const Endpoint& ep, int timeout_ms) {
  const sockaddr_in addr = resolve(ep);
  int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0);
  if (fd < 0) fail_errno("socket");
  int rc = ::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr));
  if (rc != 0 && errno == EINPROGRESS) {
    pollfd p{fd, POLLOUT, 0};
    rc = ::poll(&p, 1, timeout_ms);
    int err = 0;
    socklen_t len = sizeof(err);
    if (rc == 1 && ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len) == 0 && err == 0) {
      rc = 0;
    } else {
      errno = rc == 0 ? ETIMEDOUT : (err != 0 ? err : errno);
      rc = -1;
    }
  }
  if (rc != 0) {
    const int saved = errno;
    ::close(fd);
    errno = saved;
    fail_errno("connect " + ep.to_string());
  }
  ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) & ~O_NONBLOCK);
  return std::make_unique<TcpConnection>(fd);
}

void TcpConnection::send_all(ByteView data) {
  std::size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::send(fd_, data.data() + done, data.size() - done, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail_errno("send");
    }
    done += static_cast<std::size_t>(n);
  }
}

std::size_t TcpConnection::recv_some(MutableByteView out) {
  for (;;) {
    ssize_t n = ::recv(fd_, out.data(), out.size(), 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    if (errno == ECONNRESET) return 0;
    fail_errno("recv");
  }
}

void TcpConnection::shutdown() { ::shutdown(fd_, SHUT_RDWR); }

TcpListener::TcpListener(const Endpoint& ep) {
  const sockaddr_in addr = resolve(ep);
  fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd_ < 0) fail_errno("socket");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    const int saved = errno;
    ::close(fd_);
    errno = saved;
    fail_errno("bind " + ep.to_string());
  }
  if (::listen(fd_, 64) != 0) fail_errno("listen");
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() { close(); }

std::unique_ptr<TcpConnection> TcpListener::accept() {
  for (;;) {
    int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd >= 0) return std::make_unique<TcpConnection>(fd);
    if (errno == EINTR || errno == ECONNABORTED) continue;
    return nullptr;
  }
}

void TcpListener::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

void MessageChannel::send(const proto::Message& m) { conn_->send_all(proto::encode_message(m)); }

std::optional<proto::Message> MessageChannel::receive() {
  for (;;) {
    auto frame = proto::decode_message(ByteView(buf_).subspan(head_));
    if (frame.message) {
      head_ += frame.consumed;
      if (head_ == buf_.size()) {
        buf_.clear();
        head_ = 0;
      }
      return std::move(frame.message);
    }
    if (head_ > 0) {
      buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(head_));
      head_ = 0;
    }
    const std::size_t old = buf_.size();
    buf_.resize(old + (256u << 10));
    const std::size_t n = conn_->recv_some(MutableByteView(buf_.data() + old, buf_.size() - old));
    buf_.resize(old + n);
    if (n == 0) {
      if (buf_.empty()) return std::nullopt;
      fail(Errc::io, "connection closed mid-frame");
    }
  }
}

proto::Message MessageChannel::expect() {
  auto m = receive();
  if (!m) fail(Errc::io, "connection closed by peer");
  return std::move(*m);
}

}  // namespace cdstore::net
