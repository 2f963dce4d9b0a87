#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <optional>
#include <thread>
#include <utility>

#include "syncml/error.hpp"
#include "syncml/transport.hpp"

namespace syncml {

namespace {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { reset(); }
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  int fd() const { return fd_; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

std::string errno_text() { return std::strerror(errno); }

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

void write_all(int fd, std::span<const std::byte> bytes, const std::string& peer) {
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError("send to " + peer + " failed: " + errno_text());
    }
    off += static_cast<std::size_t>(n);
  }
}

// Reads exactly `out.size()` bytes. Returns false if the deadline passes first.
bool read_exact(int fd, std::span<std::byte> out, std::optional<Clock::time_point> deadline,
                const std::string& peer) {
  std::size_t off = 0;
  while (off < out.size()) {
    if (deadline) {
      const auto left =
          std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - Clock::now());
      if (left.count() <= 0) return false;
      pollfd p{fd, POLLIN, 0};
      const int r = ::poll(&p, 1, static_cast<int>(left.count()));
      if (r < 0 && errno == EINTR) continue;
      if (r < 0) throw TransportError("poll on " + peer + " failed: " + errno_text());
      if (r == 0) return false;
    }
    const ssize_t n = ::recv(fd, out.data() + off, out.size() - off, 0);
    if (n == 0) throw TransportError(peer + " closed the connection");
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError("recv from " + peer + " failed: " + errno_text());
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

std::optional<WireMessage> read_frame(int fd, std::optional<std::chrono::milliseconds> timeout,
                                      const std::string& peer) {
  std::optional<Clock::time_point> deadline;
  if (timeout) deadline = Clock::now() + *timeout;
  std::vector<std::byte> buf(kFrameHeaderSize);
  if (!read_exact(fd, buf, deadline, peer)) return std::nullopt;
  const FrameHeader h = decode_header(buf);
  buf.resize(h.frame_size());
  if (!read_exact(fd, std::span<std::byte>(buf).subspan(kFrameHeaderSize), deadline, peer))
    return std::nullopt;
  return decode_frame(buf);
}

class TcpTransport final : public Transport {
 public:
  TcpTransport(const TransportOptions& options, std::vector<Socket> sockets,
               std::shared_ptr<EventLog> events)
      : Transport(options, std::move(events)), sockets_(std::move(sockets)) {}

  Backend backend() const override { return Backend::Tcp; }

 protected:
  void deliver_all(const WireMessage& msg) override {
    const auto frame = encode_frame(msg);
    for (std::size_t k = 0; k < sockets_.size(); ++k)
      write_all(sockets_[k].fd(), frame, "worker " + std::to_string(k));
  }

  WireMessage receive_from(std::size_t worker) override {
    const std::string peer = "worker " + std::to_string(worker);
    auto msg = read_frame(sockets_[worker].fd(), timeout(), peer);
    if (!msg) throw TransportError("timed out waiting for " + peer);
    return std::move(*msg);
  }

  bool has_pending(std::size_t worker) override {
    pollfd p{sockets_[worker].fd(), POLLIN, 0};
    return ::poll(&p, 1, 0) > 0 && (p.revents & POLLIN);
  }

 private:
  std::vector<Socket> sockets_;
};

class TcpWorkerChannel final : public WorkerChannel {
 public:
  TcpWorkerChannel(Socket socket, std::uint16_t id, std::shared_ptr<EventLog> events)
      : socket_(std::move(socket)), id_(id), events_(std::move(events)) {}

  std::uint16_t id() const override { return id_; }

  WireMessage receive() override {
    WireMessage msg = *read_frame(socket_.fd(), std::nullopt, "master");
    if (msg.kind == MessageKind::Broadcast && events_)
      events_->record(EventKind::BroadcastReceived, msg.round, id_);
    return msg;
  }

  void send(WireMessage msg) override {
    msg.worker_id = id_;
    if (msg.kind == MessageKind::Update && events_)
      events_->record(EventKind::UpdateSent, msg.round, id_);
    write_all(socket_.fd(), encode_frame(msg), "master");
  }

 private:
  Socket socket_;
  std::uint16_t id_;
  std::shared_ptr<EventLog> events_;
};

}  // namespace

TcpListener::TcpListener(const std::string& bind_host, std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError("socket: " + errno_text());
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, bind_host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw ConfigError("bind address must be a dotted IPv4 address: " + bind_host);
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(fd_, 128) < 0) {
    const auto why = errno_text();
    ::close(fd_);
    throw TransportError("cannot listen on " + bind_host + ":" + std::to_string(port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Transport> TcpListener::accept_workers(const TransportOptions& options,
                                                       std::shared_ptr<EventLog> events) {
  std::vector<Socket> by_id(options.workers);
  const auto deadline = Clock::now() + options.timeout;
  for (std::size_t accepted = 0; accepted < options.workers;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    pollfd p{fd_, POLLIN, 0};
    if (left.count() <= 0 || ::poll(&p, 1, static_cast<int>(left.count())) <= 0)
      throw TransportError("timed out waiting for workers (" + std::to_string(accepted) + "/" +
                           std::to_string(options.workers) + " connected)");
    Socket s(::accept(fd_, nullptr, nullptr));
    if (s.fd() < 0) throw TransportError("accept: " + errno_text());
    set_nodelay(s.fd());
    auto hello = read_frame(s.fd(), options.timeout, "connecting worker");
    if (!hello || hello->kind != MessageKind::Control)
      throw ProtocolError("worker did not introduce itself");
    const auto id = hello->worker_id;
    if (id >= options.workers) throw ProtocolError("worker id " + std::to_string(id) + " out of range");
    if (by_id[id].fd() >= 0) throw ProtocolError("worker id " + std::to_string(id) + " connected twice");
    by_id[id] = std::move(s);
    ++accepted;
  }
  return std::make_unique<TcpTransport>(options, std::move(by_id), std::move(events));
}

std::unique_ptr<WorkerChannel> connect_worker(const std::string& host, std::uint16_t port,
                                              std::uint16_t worker_id,
                                              std::chrono::milliseconds timeout,
                                              std::shared_ptr<EventLog> events) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
    throw TransportError("cannot resolve " + host);
  const auto deadline = Clock::now() + timeout;
  Socket s;
  for (;;) {
    s = Socket(::socket(AF_INET, SOCK_STREAM, 0));
    if (::connect(s.fd(), res->ai_addr, res->ai_addrlen) == 0) break;
    if (Clock::now() >= deadline) {
      ::freeaddrinfo(res);
      throw TransportError("cannot connect to " + host + ":" + std::to_string(port) + ": " +
                           errno_text());
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  ::freeaddrinfo(res);
  set_nodelay(s.fd());
  write_all(s.fd(), encode_frame(WireMessage{0, MessageKind::Control, worker_id, {}}), "master");
  return std::make_unique<TcpWorkerChannel>(std::move(s), worker_id, std::move(events));
}

Endpoints make_tcp_loopback(const TransportOptions& options) {
  TcpListener listener("127.0.0.1", 0);
  auto events = std::make_shared<EventLog>();
  std::vector<std::unique_ptr<WorkerChannel>> workers;
  // Connects complete against the listen backlog, so one thread can do both sides.
  for (std::size_t k = 0; k < options.workers; ++k)
    workers.push_back(connect_worker("127.0.0.1", listener.port(), static_cast<std::uint16_t>(k),
                                     options.timeout, events));
  return Endpoints{listener.accept_workers(options, events), std::move(workers)};
}

}  // namespace syncml
