#include <cmath>
#include <iostream>
#include <optional>
#include <string>

#include "protocol.hpp"
#include "syncml/engine.hpp"
#include "syncml/error.hpp"

namespace syncml {

namespace {

struct Session {
  Algorithm algorithm = Algorithm::CoCoA;
  std::size_t workers = 1;
  std::size_t h = 1;
  double lambda = 1.0;
  double gamma = 1.0;
  double sigma_prime = 1.0;
  std::uint64_t seed = 0;
};

std::size_t as_count(double x, const char* what) {
  if (!(x >= 0.0) || x != std::floor(x)) throw ProtocolError(std::string("bad ") + what);
  return static_cast<std::size_t>(x);
}

class Worker {
 public:
  Worker(WorkerChannel& channel, const Dataset& data) : channel_(channel), data_(data) {}

  // Returns false once shutdown has been requested.
  bool handle(const WireMessage& msg) {
    if (msg.kind == MessageKind::Control) return handle_control(msg);
    if (msg.kind != MessageKind::Broadcast) throw ProtocolError("worker received an update");
    if (echo_) {
      reply(msg.round, std::vector<double>(msg.payload.size(), 0.0));
      return true;
    }
    if (!state_) throw ProtocolError("round traffic before setup");
    compute_round(msg);
    return true;
  }

  void report_failure(std::uint32_t round) {
    channel_.send(WireMessage{round, MessageKind::Control, channel_.id(), {protocol::kFailure}});
  }

 private:
  bool handle_control(const WireMessage& msg) {
    const auto& p = msg.payload;
    if (p.empty()) throw ProtocolError("empty control message");
    switch (static_cast<int>(p[0])) {
      case protocol::kSetup:
        setup(p);
        reply(msg.round, {static_cast<double>(state_->local_count())});
        return true;
      case protocol::kEcho:
        echo_ = true;
        reply(msg.round, {});
        return true;
      case protocol::kCollectAlpha: {
        std::vector<double> out{0.0};
        if (state_ && state_->mode() == PartitionMode::ByColumn) {
          state_->commit_staged();
          const auto ids = state_->global_ids();
          const auto a = state_->alpha_local();
          out[0] = static_cast<double>(ids.size());
          for (Index i : ids) out.push_back(static_cast<double>(i));
          out.insert(out.end(), a.begin(), a.end());
        }
        reply(msg.round, std::move(out));
        return true;
      }
      case protocol::kShutdown:
        return false;
      default:
        throw ProtocolError("unknown control opcode " + std::to_string(p[0]));
    }
  }

  void setup(const std::vector<double>& p) {
    if (p.size() != protocol::kSetupSize) throw ProtocolError("malformed setup message");
    const auto alg = as_count(p[1], "algorithm");
    if (alg > static_cast<std::size_t>(Algorithm::MiniBatchSgd))
      throw ProtocolError("unknown algorithm code");
    Session s{static_cast<Algorithm>(alg), as_count(p[2], "K"), as_count(p[3], "H"), p[4], p[5],
              p[6], as_count(p[7], "seed")};
    if (channel_.id() >= s.workers) throw ProtocolError("worker id beyond K");
    const auto mode = partition_mode(s.algorithm);
    if (!block_ || block_mode_ != mode || block_workers_ != s.workers) {
      const auto plan = partition(data_.features, s.workers, mode);
      block_ = local_block(data_.features, plan, channel_.id());
      block_mode_ = mode;
      block_workers_ = s.workers;
    }
    const auto seed = s.seed + channel_.id();
    state_ = mode == PartitionMode::ByColumn
                 ? WorkerState::for_columns(*block_, seed)
                 : WorkerState::for_rows(*block_, data_.labels, seed);
    session_ = s;
    echo_ = false;
  }

  void compute_round(const WireMessage& msg) {
    auto& w = *state_;
    const auto& s = session_;
    const auto t0 = Clock::now();
    LocalUpdate u;
    double alpha_sq = 0.0;
    switch (s.algorithm) {
      case Algorithm::CoCoA:
        u = cocoa_local_scd(w, {s.lambda, s.sigma_prime, s.gamma}, msg.payload, data_.labels, s.h);
        alpha_sq = w.alpha_sqnorm();
        break;
      case Algorithm::MiniBatchScd:
        // The coordinator has applied last round's update, so staged values are final.
        w.commit_staged();
        u = minibatch_scd_local(w, {s.lambda, s.gamma}, msg.payload, data_.labels, s.h);
        alpha_sq = w.alpha_sqnorm_after_commit();
        break;
      case Algorithm::MiniBatchSgd:
        u = minibatch_sgd_local(w, msg.payload, s.h);
        break;
    }
    const auto ns = std::chrono::duration_cast<Nanos>(Clock::now() - t0).count();
    auto out = std::move(u.values);
    out.push_back(alpha_sq);
    out.push_back(static_cast<double>(ns));
    out.push_back(static_cast<double>(u.steps_done));
    out.push_back(u.flagged ? 1.0 : 0.0);
    reply(msg.round, std::move(out));
  }

  void reply(std::uint32_t round, std::vector<double> payload) {
    channel_.send(WireMessage{round, MessageKind::Update, channel_.id(), std::move(payload)});
  }

  WorkerChannel& channel_;
  const Dataset& data_;
  Session session_;
  std::optional<LocalBlock> block_;
  PartitionMode block_mode_ = PartitionMode::ByColumn;
  std::size_t block_workers_ = 0;
  std::optional<WorkerState> state_;
  bool echo_ = false;
};

}  // namespace

void serve_worker(WorkerChannel& channel, const Dataset& data) {
  Worker worker(channel, data);
  for (;;) {
    const WireMessage msg = channel.receive();
    try {
      if (!worker.handle(msg)) return;
    } catch (const TransportError&) {
      throw;
    } catch (const std::exception& e) {
      std::cerr << "worker " << channel.id() << ": " << e.what() << '\n';
      worker.report_failure(msg.round);
    }
  }
}

LocalCluster::LocalCluster(const Dataset& data, Backend backend, TransportOptions options) {
  auto ep = backend == Backend::InProc ? make_inproc(options) : make_tcp_loopback(options);
  master_ = std::move(ep.master);
  channels_ = std::move(ep.workers);
  for (auto& ch : channels_)
    threads_.emplace_back([&data, c = ch.get()] {
      try {
        serve_worker(*c, data);
      } catch (const std::exception& e) {
        std::cerr << "worker " << c->id() << " stopped: " << e.what() << '\n';
      }
    });
}

LocalCluster::~LocalCluster() {
  try {
    shutdown_workers(*master_);
  } catch (const std::exception&) {
    // Closing the master side unblocks socket workers that missed the message.
    master_.reset();
  }
  for (auto& t : threads_) t.join();
}

}  // namespace syncml
