#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <thread>
#include <vector>

#include "syncml/ridge.hpp"
#include "syncml/solvers.hpp"
#include "syncml/timings.hpp"
#include "syncml/transport.hpp"

namespace syncml {

struct AlgorithmConfig {
  Algorithm algorithm = Algorithm::CoCoA;
  std::size_t h = 1;  // local units processed per worker per round
  double gamma = 1.0;
  std::size_t workers = 1;
  std::size_t max_rounds = 1000;
  double target_suboptimality = 1e-3;
  std::uint64_t seed = 0;  // worker k uses seed + k
  // CoCoA subproblem scaling; γ·K when unset.
  std::optional<double> sigma_prime;
  // Pull every worker's α after each round and check v == Aα (slow).
  bool check_consistency = false;

  double effective_sigma_prime() const;
  void validate() const;  // throws ConfigError
};

// Mean local count n_k for the algorithm's partition mode.
double mean_local_count(const RidgeProblem& p, Algorithm a, std::size_t workers);

// H given as an absolute count or as a multiple of n_k ("0.2x"). The result is
// max(1, round(f·n_k)) in the latter case.
struct HSpec {
  double value = 1.0;
  bool relative = false;

  static HSpec parse(std::string_view text);  // "5000" or "0.2x"
  std::size_t resolve(double n_k) const;
};

struct RoundRecord {
  std::uint32_t round = 0;
  RoundTimings timings;
  double objective = 0.0;
  double suboptimality = 0.0;
  Nanos t_instrumentation{0};  // objective evaluation, excluded from timings
  std::size_t steps_done = 0;  // summed over workers
};

enum class RunStatus { Converged, Unreached, Diverged };
std::string_view to_string(RunStatus s);

struct RunResult {
  RunStatus status = RunStatus::Unreached;
  std::vector<RoundRecord> rounds;
  double f_star = 0.0;
  double initial_objective = 0.0;
  double initial_suboptimality = 0.0;
  std::vector<double> alpha;   // global model at the end
  std::vector<double> shared;  // v = Aα for column algorithms, empty for mb-sgd
  bool clamped = false;        // some worker had H clamped to its local count
  std::vector<std::size_t> local_counts;

  Nanos total_time() const;
};

// One worker's contribution to a round as seen by the coordinator.
struct WorkerReport {
  std::uint16_t worker_id = 0;
  LocalUpdate update;
  double alpha_sqnorm = 0.0;
  Nanos compute{0};
};

struct AggregateParams {
  Algorithm algorithm = Algorithm::CoCoA;
  double gamma = 1.0;
  double lambda = 0.0;
  std::span<const double> alpha;  // current model, mb-sgd only
};

// cocoa: γ Σ Δv_k; mb-scd: Σ Δv_k; mb-sgd: Σ g_k + λα. Summation runs in
// worker-id order. Throws ProtocolError unless ids are exactly 0..K-1.
std::vector<double> aggregate(std::span<const WorkerReport> reports, std::size_t workers,
                              const AggregateParams& params);

// Drives the synchronous rounds. Workers behind `transport` must run
// serve_worker on the same dataset.
RunResult run(const AlgorithmConfig& cfg, const RidgeProblem& problem, Transport& transport,
              double f_star);
RunResult run(const AlgorithmConfig& cfg, const RidgeProblem& problem, Transport& transport);

// Zero-work rounds: a broadcast of `dim` zeros, answered by every worker with
// zeros of the same size, then summed. Returns one round-trip time per trial.
std::vector<Nanos> probe_round_trips(Transport& transport, std::size_t dim, std::size_t trials);

// Worker loop: answers setup, round and control traffic until shutdown.
void serve_worker(WorkerChannel& channel, const Dataset& data);

// Sends the shutdown message to every worker.
void shutdown_workers(Transport& transport);

// K worker threads in this process, connected over `backend`. The destructor
// shuts them down.
class LocalCluster {
 public:
  LocalCluster(const Dataset& data, Backend backend, TransportOptions options);
  ~LocalCluster();
  LocalCluster(const LocalCluster&) = delete;
  LocalCluster& operator=(const LocalCluster&) = delete;

  Transport& transport() { return *master_; }

 private:
  std::unique_ptr<Transport> master_;
  std::vector<std::unique_ptr<WorkerChannel>> channels_;
  std::vector<std::thread> threads_;
};

}  // namespace syncml
