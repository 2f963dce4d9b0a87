#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "syncml/wire.hpp"

namespace syncml {

using Clock = std::chrono::steady_clock;

enum class Backend { InProc, Tcp };

const char* to_string(Backend b);
Backend parse_backend(const std::string& name);  // "inproc" | "tcp"

enum class EventKind { BroadcastSent, BroadcastReceived, UpdateSent, ReduceComplete };

inline constexpr int kMasterEndpoint = -1;

struct TransportEvent {
  Clock::time_point at;
  EventKind kind;
  std::uint32_t round;
  int endpoint;  // worker id, or kMasterEndpoint
};

// Append-only record of protocol events, shared by every endpoint that lives
// in this process. Timestamps come from the monotonic clock.
class EventLog {
 public:
  void record(EventKind kind, std::uint32_t round, int endpoint);
  std::vector<TransportEvent> snapshot() const;
  void clear();
  void set_enabled(bool on);

 private:
  mutable std::mutex mu_;
  bool enabled_ = true;
  std::vector<TransportEvent> events_;
};

// Sleeps for `d`, spinning the final stretch so short delays stay accurate.
void precise_sleep(std::chrono::nanoseconds d);

struct TransportOptions {
  std::size_t workers = 1;
  std::chrono::nanoseconds injected_latency{0};
  std::chrono::milliseconds timeout{30000};
};

// Worker side of a connection: blocking receive of master messages, send of
// updates back.
class WorkerChannel {
 public:
  virtual ~WorkerChannel() = default;
  virtual std::uint16_t id() const = 0;
  virtual WireMessage receive() = 0;
  virtual void send(WireMessage msg) = 0;
};

// Master side. Owned by the single coordinator context; calls block until the
// exchange completes. The latency shim adds half of injected_latency before a
// broadcast is delivered and the other half once all updates are gathered.
class Transport {
 public:
  // `events` lets several endpoints in one process share a log.
  explicit Transport(TransportOptions options, std::shared_ptr<EventLog> events = nullptr);
  virtual ~Transport() = default;
  Transport(const Transport&) = delete;
  Transport& operator=(const Transport&) = delete;

  virtual Backend backend() const = 0;
  std::size_t workers() const { return options_.workers; }
  std::chrono::nanoseconds injected_latency() const { return options_.injected_latency; }
  void set_injected_latency(std::chrono::nanoseconds latency);
  std::chrono::milliseconds timeout() const { return options_.timeout; }

  EventLog& events() { return *events_; }
  std::shared_ptr<EventLog> shared_events() const { return events_; }

  // Round traffic (latency applies).
  void broadcast(std::uint32_t round, std::span<const double> payload);
  // One update per worker, ordered by worker id.
  std::vector<WireMessage> gather(std::uint32_t round);
  // Elementwise sum of the gathered payloads, summed in worker-id order.
  std::vector<double> reduce_sum(std::uint32_t round);

  // Out-of-band traffic; latency is applied only when asked for.
  void send_control(std::uint32_t round, std::span<const double> payload,
                    bool inject_latency = false);
  std::vector<WireMessage> collect(std::uint32_t round, bool inject_latency = false);

 protected:
  virtual void deliver_all(const WireMessage& msg) = 0;
  // Blocks for at most timeout(); throws TransportError naming the worker.
  virtual WireMessage receive_from(std::size_t worker) = 0;
  // True when another message from this worker is already waiting.
  virtual bool has_pending(std::size_t worker) = 0;

 private:
  std::vector<WireMessage> receive_round(std::uint32_t round);

  TransportOptions options_;
  std::shared_ptr<EventLog> events_;
};

// Elementwise sum in the given order. Throws ProtocolError on length mismatch.
std::vector<double> sum_payloads(std::span<const WireMessage> messages);

struct Endpoints {
  std::unique_ptr<Transport> master;
  std::vector<std::unique_ptr<WorkerChannel>> workers;
};

// Mailbox-backed channels inside one process.
Endpoints make_inproc(const TransportOptions& options);

// Real TCP sockets over 127.0.0.1 with every endpoint in this process.
Endpoints make_tcp_loopback(const TransportOptions& options);

// Multi-process TCP: the master listens and waits for `options.workers`
// connections, each announcing its worker id.
class TcpListener {
 public:
  TcpListener(const std::string& bind_host, std::uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  std::unique_ptr<Transport> accept_workers(const TransportOptions& options,
                                            std::shared_ptr<EventLog> events = nullptr);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// Worker side of the TCP backend; retries the connect until `timeout`.
std::unique_ptr<WorkerChannel> connect_worker(const std::string& host, std::uint16_t port,
                                              std::uint16_t worker_id,
                                              std::chrono::milliseconds timeout,
                                              std::shared_ptr<EventLog> events = nullptr);

}  // namespace syncml
