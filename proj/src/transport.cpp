#include "syncml/transport.hpp"

#include <condition_variable>
#include <deque>
#include <optional>
#include <thread>

#include "syncml/error.hpp"

namespace syncml {

const char* to_string(Backend b) { return b == Backend::InProc ? "inproc" : "tcp"; }

Backend parse_backend(const std::string& name) {
  if (name == "inproc") return Backend::InProc;
  if (name == "tcp") return Backend::Tcp;
  throw ConfigError("unknown transport '" + name + "' (inproc, tcp)");
}

void EventLog::record(EventKind kind, std::uint32_t round, int endpoint) {
  const auto now = Clock::now();
  std::lock_guard lock(mu_);
  if (enabled_) events_.push_back({now, kind, round, endpoint});
}

std::vector<TransportEvent> EventLog::snapshot() const {
  std::lock_guard lock(mu_);
  return events_;
}

void EventLog::clear() {
  std::lock_guard lock(mu_);
  events_.clear();
}

void EventLog::set_enabled(bool on) {
  std::lock_guard lock(mu_);
  enabled_ = on;
}

void precise_sleep(std::chrono::nanoseconds d) {
  if (d <= std::chrono::nanoseconds::zero()) return;
  const auto deadline = Clock::now() + d;
  constexpr auto kSpin = std::chrono::microseconds(500);
  if (d > kSpin) std::this_thread::sleep_until(deadline - kSpin);
  while (Clock::now() < deadline) std::this_thread::yield();
}

Transport::Transport(TransportOptions options, std::shared_ptr<EventLog> events)
    : options_(options), events_(events ? std::move(events) : std::make_shared<EventLog>()) {
  if (options_.workers == 0) throw ConfigError("transport needs at least one worker");
  if (options_.workers >= kMasterId) throw ConfigError("too many workers");
  if (options_.injected_latency < std::chrono::nanoseconds::zero())
    throw ConfigError("injected latency must be nonnegative");
}

void Transport::set_injected_latency(std::chrono::nanoseconds latency) {
  if (latency < std::chrono::nanoseconds::zero())
    throw ConfigError("injected latency must be nonnegative");
  options_.injected_latency = latency;
}

void Transport::broadcast(std::uint32_t round, std::span<const double> payload) {
  precise_sleep(options_.injected_latency / 2);
  WireMessage msg{round, MessageKind::Broadcast, kMasterId, {payload.begin(), payload.end()}};
  events_->record(EventKind::BroadcastSent, round, kMasterEndpoint);
  deliver_all(msg);
}

std::vector<WireMessage> Transport::gather(std::uint32_t round) {
  auto msgs = receive_round(round);
  precise_sleep(options_.injected_latency - options_.injected_latency / 2);
  events_->record(EventKind::ReduceComplete, round, kMasterEndpoint);
  return msgs;
}

std::vector<double> Transport::reduce_sum(std::uint32_t round) {
  const auto msgs = gather(round);
  return sum_payloads(msgs);
}

void Transport::send_control(std::uint32_t round, std::span<const double> payload,
                             bool inject_latency) {
  if (inject_latency) precise_sleep(options_.injected_latency / 2);
  deliver_all(WireMessage{round, MessageKind::Control, kMasterId, {payload.begin(), payload.end()}});
}

std::vector<WireMessage> Transport::collect(std::uint32_t round, bool inject_latency) {
  auto msgs = receive_round(round);
  if (inject_latency) precise_sleep(options_.injected_latency - options_.injected_latency / 2);
  return msgs;
}

std::vector<WireMessage> Transport::receive_round(std::uint32_t round) {
  std::vector<WireMessage> msgs;
  msgs.reserve(workers());
  for (std::size_t k = 0; k < workers(); ++k) {
    WireMessage msg = receive_from(k);
    const std::string who = "worker " + std::to_string(k);
    if (msg.kind == MessageKind::Control) throw TransportError(who + " reported a failure");
    if (msg.kind != MessageKind::Update) throw ProtocolError(who + " sent a non-update message");
    if (msg.worker_id != k) throw ProtocolError(who + " sent a message tagged with another id");
    if (msg.round != round)
      throw ProtocolError(who + " answered round " + std::to_string(msg.round) + ", expected " +
                          std::to_string(round));
    msgs.push_back(std::move(msg));
  }
  for (std::size_t k = 0; k < workers(); ++k)
    if (has_pending(k))
      throw ProtocolError("worker " + std::to_string(k) + " submitted more than one update");
  return msgs;
}

std::vector<double> sum_payloads(std::span<const WireMessage> messages) {
  if (messages.empty()) return {};
  std::vector<double> sum(messages.front().payload);
  for (std::size_t k = 1; k < messages.size(); ++k) {
    const auto& p = messages[k].payload;
    if (p.size() != sum.size())
      throw ProtocolError("update dimension mismatch: " + std::to_string(p.size()) + " vs " +
                          std::to_string(sum.size()));
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += p[i];
  }
  return sum;
}

namespace {

class Mailbox {
 public:
  void push(WireMessage msg) {
    {
      std::lock_guard lock(mu_);
      queue_.push_back(std::move(msg));
    }
    cv_.notify_one();
  }

  std::optional<WireMessage> pop(std::optional<std::chrono::milliseconds> timeout) {
    std::unique_lock lock(mu_);
    auto ready = [&] { return !queue_.empty(); };
    if (timeout) {
      if (!cv_.wait_for(lock, *timeout, ready)) return std::nullopt;
    } else {
      cv_.wait(lock, ready);
    }
    WireMessage msg = std::move(queue_.front());
    queue_.pop_front();
    return msg;
  }

  bool empty() {
    std::lock_guard lock(mu_);
    return queue_.empty();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<WireMessage> queue_;
};

struct InprocLinks {
  explicit InprocLinks(std::size_t k) : to_worker(k), to_master(k) {}
  std::vector<Mailbox> to_worker;
  std::vector<Mailbox> to_master;
};

class InprocTransport final : public Transport {
 public:
  InprocTransport(const TransportOptions& options, std::shared_ptr<InprocLinks> links)
      : Transport(options), links_(std::move(links)) {}

  Backend backend() const override { return Backend::InProc; }

 protected:
  void deliver_all(const WireMessage& msg) override {
    for (auto& box : links_->to_worker) box.push(msg);
  }

  WireMessage receive_from(std::size_t worker) override {
    auto msg = links_->to_master[worker].pop(timeout());
    if (!msg)
      throw TransportError("timed out waiting for worker " + std::to_string(worker));
    return std::move(*msg);
  }

  bool has_pending(std::size_t worker) override { return !links_->to_master[worker].empty(); }

 private:
  std::shared_ptr<InprocLinks> links_;
};

class InprocWorkerChannel final : public WorkerChannel {
 public:
  InprocWorkerChannel(std::uint16_t id, std::shared_ptr<InprocLinks> links,
                      std::shared_ptr<EventLog> events)
      : id_(id), links_(std::move(links)), events_(std::move(events)) {}

  std::uint16_t id() const override { return id_; }

  WireMessage receive() override {
    WireMessage msg = *links_->to_worker[id_].pop(std::nullopt);
    if (msg.kind == MessageKind::Broadcast)
      events_->record(EventKind::BroadcastReceived, msg.round, id_);
    return msg;
  }

  void send(WireMessage msg) override {
    msg.worker_id = id_;
    if (msg.kind == MessageKind::Update) events_->record(EventKind::UpdateSent, msg.round, id_);
    links_->to_master[id_].push(std::move(msg));
  }

 private:
  std::uint16_t id_;
  std::shared_ptr<InprocLinks> links_;
  std::shared_ptr<EventLog> events_;
};

}  // namespace

Endpoints make_inproc(const TransportOptions& options) {
  auto links = std::make_shared<InprocLinks>(options.workers);
  Endpoints ep;
  ep.master = std::make_unique<InprocTransport>(options, links);
  for (std::size_t k = 0; k < options.workers; ++k)
    ep.workers.push_back(std::make_unique<InprocWorkerChannel>(
        static_cast<std::uint16_t>(k), links, ep.master->shared_events()));
  return ep;
}

}  // namespace syncml
