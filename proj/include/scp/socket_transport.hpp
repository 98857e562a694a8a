#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <thread>

#include "config.hpp"
#include "transport.hpp"

namespace scp {

// TCP transport. Connections are established lazily; the first frame in each
// direction is a Handshake carrying node id and registry fingerprint. Every
// connection is read by its own thread; a node writes to one stable
// connection per peer, so per-channel FIFO order holds.
class SocketTransport final : public Transport {
 public:
  // listen_addr "host:port" ("" for a client-only endpoint, ":0" for an
  // ephemeral port). Binds immediately so the effective port is known before
  // start().
  explicit SocketTransport(const std::string& listen_addr,
                           size_t max_frame = kDefaultMaxFrame,
                           std::chrono::milliseconds handshake_timeout = std::chrono::seconds(10))
      : max_frame_(max_frame), handshake_timeout_(handshake_timeout) {
    if (listen_addr.empty()) return;
    auto [host, port] = split_host_port(listen_addr);
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) raise(Errc::bind_failure, "socket(): " + std::string(strerror(errno)));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
      addr.sin_addr.s_addr = INADDR_ANY;
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      std::string err = strerror(errno);
      ::close(listen_fd_);
      listen_fd_ = -1;
      raise(Errc::bind_failure, "cannot bind " + listen_addr + ": " + err);
    }
    if (::listen(listen_fd_, 64) != 0) {
      std::string err = strerror(errno);
      ::close(listen_fd_);
      listen_fd_ = -1;
      raise(Errc::bind_failure, "cannot listen on " + listen_addr + ": " + err);
    }
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    listen_port_ = ntohs(bound.sin_port);
  }

  ~SocketTransport() override { stop(); }

  uint16_t listen_port() const { return listen_port_; }

  void start(int32_t self_id, uint64_t fingerprint, Deliver deliver) override {
    self_ = self_id;
    fingerprint_ = fingerprint;
    deliver_ = std::move(deliver);
    running_ = true;
    if (listen_fd_ >= 0)
      accept_thread_ = std::thread([this] { accept_loop(); });
  }

  void stop() override {
    running_.store(false);
    if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);  // wakes the acceptor
    if (accept_thread_.joinable()) accept_thread_.join();
    if (listen_fd_ >= 0) {
      ::close(listen_fd_);
      listen_fd_ = -1;
    }
    std::vector<std::shared_ptr<Conn>> all;
    {
      std::lock_guard lk(conns_m_);
      all = all_conns_;
      all_conns_.clear();
      registered_.clear();
    }
    for (auto& c : all) c->close_fd();
    for (auto& c : all)
      if (c->reader.joinable()) c->reader.join();
  }

  void send(const Place& dest, const Bytes& body) override {
    std::shared_ptr<Conn> c = get_or_connect(dest);
    if (!write_frame(*c, body)) {
      drop_conn(c);
      raise(Errc::node_unreachable, "connection to node " + std::to_string(dest.node_id) + " failed");
    }
  }

  void probe(const Place& peer) override { get_or_connect(peer); }

 private:
  struct Conn {
    int fd = -1;
    int32_t peer_id = -1;
    std::mutex write_m;
    std::atomic<bool> dead{false};
    std::thread reader;

    void close_fd() {
      bool was = dead.exchange(true);
      if (!was && fd >= 0) ::shutdown(fd, SHUT_RDWR);
    }
    ~Conn() {
      if (fd >= 0) ::close(fd);
    }
  };

  static bool read_exact(int fd, char* buf, size_t n) {
    size_t got = 0;
    while (got < n) {
      ssize_t r = ::recv(fd, buf + got, n - got, 0);
      if (r == 0) return false;
      if (r < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      got += static_cast<size_t>(r);
    }
    return true;
  }

  static bool write_all(int fd, const char* buf, size_t n) {
    size_t sent = 0;
    while (sent < n) {
      ssize_t r = ::send(fd, buf + sent, n - sent, MSG_NOSIGNAL);
      if (r < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      sent += static_cast<size_t>(r);
    }
    return true;
  }

  bool write_frame(Conn& c, const Bytes& body) {
    if (c.dead.load()) return false;
    ByteWriter w;
    w.u32_be(static_cast<uint32_t>(body.size()));
    w.raw(body);
    Bytes framed = w.take();
    std::lock_guard lk(c.write_m);
    return write_all(c.fd, framed.data(), framed.size());
  }

  // Reads one frame body; empty optional on EOF/error.
  std::optional<Bytes> read_frame(int fd) {
    char hdr[4];
    if (!read_exact(fd, hdr, 4)) return std::nullopt;
    uint32_t len = 0;
    for (char ch : hdr) len = (len << 8) | static_cast<uint8_t>(ch);
    if (len > max_frame_) return std::nullopt;
    Bytes body(len, '\0');
    if (len > 0 && !read_exact(fd, body.data(), len)) return std::nullopt;
    return body;
  }

  void accept_loop() {
    const int lfd = listen_fd_;  // stable until stop() joins this thread
    while (running_.load()) {
      int fd = ::accept(lfd, nullptr, nullptr);
      if (fd < 0) {
        if (errno == EINTR) continue;
        return;  // listener shut down
      }
      configure(fd);
      accept_handshake(fd);
    }
  }

  // Runs inline in the acceptor; peers handshake immediately and the read
  // is bounded by handshake_timeout_.
  void accept_handshake(int fd) {
    auto conn = std::make_shared<Conn>();
    conn->fd = fd;  // owned from here on; Conn closes it
    set_recv_timeout(fd, handshake_timeout_);
    std::optional<Bytes> first = read_frame(fd);
    if (!first) return;
    try {
      Message m = decode_message(*first);
      const Handshake* hs = std::get_if<Handshake>(&m);
      if (!hs) return;
      if (hs->registry_fingerprint != fingerprint_) {
        write_frame(*conn, encode_message(ErrorReply{Uid{}, Errc::registry_mismatch, self_,
                                                     "registry fingerprint mismatch"}));
        return;
      }
      conn->peer_id = hs->node_id;
    } catch (...) {
      return;
    }
    set_recv_timeout(fd, std::chrono::milliseconds(0));
    if (!write_frame(*conn, encode_message(Handshake{self_, fingerprint_}))) return;
    adopt(conn);
  }

  // Registers the connection for reading (always) and writing (if the peer
  // has no registered connection yet).
  void adopt(const std::shared_ptr<Conn>& conn) {
    {
      std::lock_guard lk(conns_m_);
      if (!running_.load()) {
        conn->close_fd();
        return;
      }
      all_conns_.push_back(conn);
      registered_.try_emplace(conn->peer_id, conn);
    }
    conn->reader = std::thread([this, conn] { reader_loop(conn); });
  }

  void reader_loop(const std::shared_ptr<Conn>& conn) {
    while (!conn->dead.load()) {
      std::optional<Bytes> body = read_frame(conn->fd);
      if (!body) break;
      if (running_.load() && deliver_) deliver_(conn->peer_id, std::move(*body));
    }
    drop_conn(conn);
  }

  void drop_conn(const std::shared_ptr<Conn>& conn) {
    conn->close_fd();
    std::lock_guard lk(conns_m_);
    auto it = registered_.find(conn->peer_id);
    if (it != registered_.end() && it->second == conn) registered_.erase(it);
  }

  std::shared_ptr<Conn> get_or_connect(const Place& dest) {
    {
      std::lock_guard lk(conns_m_);
      auto it = registered_.find(dest.node_id);
      if (it != registered_.end() && !it->second->dead.load()) return it->second;
    }
    if (dest.address.empty())
      raise(Errc::node_unreachable,
            "no connection to node " + std::to_string(dest.node_id) + " and no address to dial");
    auto [host, port] = split_host_port(dest.address);
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
      raise(Errc::node_unreachable, "cannot resolve " + dest.address);
    int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    int rc = fd >= 0 ? ::connect(fd, res->ai_addr, res->ai_addrlen) : -1;
    ::freeaddrinfo(res);
    if (rc != 0) {
      if (fd >= 0) ::close(fd);
      raise(Errc::node_unreachable, "cannot connect to " + dest.address);
    }
    configure(fd);
    auto conn = std::make_shared<Conn>();
    conn->fd = fd;  // owned from here on
    conn->peer_id = dest.node_id;
    if (!write_frame(*conn, encode_message(Handshake{self_, fingerprint_})))
      raise(Errc::node_unreachable, "handshake write to " + dest.address + " failed");
    set_recv_timeout(fd, handshake_timeout_);
    std::optional<Bytes> reply = read_frame(fd);
    if (!reply) raise(Errc::node_unreachable, "no handshake reply from " + dest.address);
    Message m = decode_message(*reply);
    if (const ErrorReply* err = std::get_if<ErrorReply>(&m)) raise(err->code, err->text);
    const Handshake* hs = std::get_if<Handshake>(&m);
    if (!hs) raise(Errc::node_unreachable, "unexpected first frame from " + dest.address);
    if (hs->registry_fingerprint != fingerprint_)
      raise(Errc::registry_mismatch, "registry fingerprint mismatch with node " +
                                         std::to_string(hs->node_id));
    set_recv_timeout(fd, std::chrono::milliseconds(0));
    adopt(conn);
    {
      std::lock_guard lk(conns_m_);
      auto it = registered_.find(dest.node_id);
      if (it != registered_.end()) return it->second;
    }
    return conn;
  }

  static void configure(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }

  static void set_recv_timeout(int fd, std::chrono::milliseconds ms) {
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(ms.count() / 1000);
    tv.tv_usec = static_cast<suseconds_t>((ms.count() % 1000) * 1000);
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  }

  size_t max_frame_;
  std::chrono::milliseconds handshake_timeout_;
  int listen_fd_ = -1;
  uint16_t listen_port_ = 0;
  int32_t self_ = -1;
  uint64_t fingerprint_ = 0;
  Deliver deliver_;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;

  std::mutex conns_m_;
  std::map<int32_t, std::shared_ptr<Conn>> registered_;
  std::vector<std::shared_ptr<Conn>> all_conns_;
};

}  // namespace scp
