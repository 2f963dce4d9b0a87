#include "syncml/engine.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <string>

#include "protocol.hpp"
#include "syncml/error.hpp"

namespace syncml {

namespace {

double sqnorm(std::span<const double> x) {
  return std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
}

Nanos since(Clock::time_point t0, Clock::time_point t1) {
  return std::chrono::duration_cast<Nanos>(t1 - t0);
}

WorkerReport decode_report(WireMessage& msg, UpdateKind kind) {
  auto& p = msg.payload;
  if (p.size() < protocol::kTrailerSize)
    throw ProtocolError("update from worker " + std::to_string(msg.worker_id) + " is truncated");
  const std::size_t n = p.size() - protocol::kTrailerSize;
  WorkerReport r;
  r.worker_id = msg.worker_id;
  r.alpha_sqnorm = p[n];
  r.compute = Nanos(static_cast<Nanos::rep>(p[n + 1]));
  r.update.kind = kind;
  r.update.steps_done = static_cast<std::size_t>(p[n + 2]);
  r.update.flagged = p[n + 3] != 0.0;
  p.resize(n);
  r.update.values = std::move(p);
  return r;
}

// Gathers every worker's α shard into a global vector.
std::vector<double> collect_alpha(Transport& t, std::uint32_t round, std::size_t n) {
  const double op = protocol::kCollectAlpha;
  t.send_control(round, std::span(&op, 1));
  std::vector<double> alpha(n, 0.0);
  for (const auto& msg : t.collect(round)) {
    const auto& p = msg.payload;
    const auto count = p.empty() ? std::size_t{0} : static_cast<std::size_t>(p[0]);
    if (p.size() != 1 + 2 * count)
      throw ProtocolError("malformed alpha shard from worker " + std::to_string(msg.worker_id));
    for (std::size_t i = 0; i < count; ++i) {
      const auto id = static_cast<std::size_t>(p[1 + i]);
      if (id >= n) throw ProtocolError("alpha shard index out of range");
      alpha[id] = p[1 + count + i];
    }
  }
  return alpha;
}

void check_shared(const RidgeProblem& p, std::span<const double> alpha,
                  std::span<const double> shared, std::uint32_t round) {
  std::vector<double> av(p.samples());
  p.matrix().multiply(alpha, av);
  double diff = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) diff += (av[i] - shared[i]) * (av[i] - shared[i]);
  const double scale = std::max(1.0, std::sqrt(sqnorm(av)));
  if (std::sqrt(diff) > 1e-10 * scale)
    throw Error("round " + std::to_string(round) + ": shared vector drifted from A*alpha by " +
                std::to_string(std::sqrt(diff)));
}

}  // namespace

double AlgorithmConfig::effective_sigma_prime() const {
  return sigma_prime ? *sigma_prime : gamma * static_cast<double>(workers);
}

void AlgorithmConfig::validate() const {
  if (h == 0) throw ConfigError("H must be at least 1");
  if (workers == 0) throw ConfigError("K must be at least 1");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be nonnegative");
  if (!(target_suboptimality > 0.0 && target_suboptimality <= 1.0))
    throw ConfigError("target suboptimality must lie in (0, 1]");
  if (sigma_prime && !(*sigma_prime > 0.0)) throw ConfigError("sigma' must be positive");
  if (algorithm == Algorithm::CoCoA && !(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (seed > (std::uint64_t{1} << 52)) throw ConfigError("seed must be below 2^52");
}

double mean_local_count(const RidgeProblem& p, Algorithm a, std::size_t workers) {
  if (workers == 0) throw ConfigError("K must be at least 1");
  const auto total = partition_mode(a) == PartitionMode::ByColumn ? p.dims() : p.samples();
  return static_cast<double>(total) / static_cast<double>(workers);
}

HSpec HSpec::parse(std::string_view text) {
  HSpec s;
  std::string_view num = text;
  if (!num.empty() && (num.back() == 'x' || num.back() == 'X')) {
    s.relative = true;
    num.remove_suffix(1);
  }
  const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), s.value);
  if (num.empty() || ec != std::errc() || ptr != num.data() + num.size() || !(s.value > 0.0) ||
      !std::isfinite(s.value))
    throw ConfigError("invalid H '" + std::string(text) + "' (expected e.g. 5000 or 0.2x)");
  if (!s.relative && s.value != std::floor(s.value))
    throw ConfigError("absolute H must be an integer: '" + std::string(text) + "'");
  return s;
}

std::size_t HSpec::resolve(double n_k) const {
  const double h = relative ? std::round(value * n_k) : value;
  return static_cast<std::size_t>(std::max(1.0, h));
}

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Converged: return "converged";
    case RunStatus::Unreached: return "unreached";
    case RunStatus::Diverged: return "diverged";
  }
  return "?";
}

Nanos RunResult::total_time() const {
  Nanos t{0};
  for (const auto& r : rounds) t += r.timings.t_tot;
  return t;
}

std::vector<double> aggregate(std::span<const WorkerReport> reports, std::size_t workers,
                              const AggregateParams& params) {
  if (reports.size() != workers)
    throw ProtocolError("expected " + std::to_string(workers) + " updates, got " +
                        std::to_string(reports.size()));
  std::vector<const WorkerReport*> by_id(workers, nullptr);
  for (const auto& r : reports) {
    if (r.worker_id >= workers)
      throw ProtocolError("update from unknown worker " + std::to_string(r.worker_id));
    if (by_id[r.worker_id])
      throw ProtocolError("duplicate update from worker " + std::to_string(r.worker_id));
    by_id[r.worker_id] = &r;
  }
  const bool sgd = params.algorithm == Algorithm::MiniBatchSgd;
  const auto expected = sgd ? UpdateKind::Gradient : UpdateKind::SharedVector;
  std::vector<double> sum;
  for (const auto* r : by_id) {
    if (r->update.kind != expected) throw ProtocolError("update kind does not match the algorithm");
    const auto& x = r->update.values;
    if (sum.empty()) {
      sum = x;
      continue;
    }
    if (x.size() != sum.size()) throw ProtocolError("update dimension mismatch across workers");
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += x[i];
  }
  switch (params.algorithm) {
    case Algorithm::CoCoA:
      if (params.gamma != 1.0)
        for (double& s : sum) s *= params.gamma;
      break;
    case Algorithm::MiniBatchScd:
      break;
    case Algorithm::MiniBatchSgd:
      if (params.alpha.size() != sum.size())
        throw DimensionError("model and gradient dimensions differ");
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += params.lambda * params.alpha[i];
      break;
  }
  return sum;
}

RunResult run(const AlgorithmConfig& cfg, const RidgeProblem& problem, Transport& transport) {
  return run(cfg, problem, transport, optimal_objective(problem));
}

RunResult run(const AlgorithmConfig& cfg, const RidgeProblem& problem, Transport& transport,
              double f_star) {
  cfg.validate();
  if (cfg.workers != transport.workers())
    throw ConfigError("config asks for " + std::to_string(cfg.workers) +
                      " workers but the transport has " + std::to_string(transport.workers()));
  const bool sgd = cfg.algorithm == Algorithm::MiniBatchSgd;
  const auto units = sgd ? problem.samples() : problem.dims();
  if (cfg.workers > units)
    throw ConfigError("K=" + std::to_string(cfg.workers) + " exceeds the " +
                      std::to_string(units) + (sgd ? " samples" : " features") + " to split");

  transport.events().clear();
  const std::vector<double> setup{static_cast<double>(protocol::kSetup),
                                  static_cast<double>(cfg.algorithm),
                                  static_cast<double>(cfg.workers),
                                  static_cast<double>(cfg.h),
                                  problem.lambda(),
                                  cfg.gamma,
                                  cfg.effective_sigma_prime(),
                                  static_cast<double>(cfg.seed)};
  transport.send_control(0, setup);

  RunResult result;
  result.f_star = f_star;
  for (const auto& msg : transport.collect(0)) {
    if (msg.payload.size() != 1) throw ProtocolError("malformed setup reply");
    result.local_counts.push_back(static_cast<std::size_t>(msg.payload[0]));
  }

  const auto labels = problem.labels();
  result.initial_objective = 0.5 * sqnorm(labels);
  result.initial_suboptimality = relative_suboptimality(result.initial_objective, f_star);
  const double diverge_above = 1e3 * result.initial_objective;

  std::vector<double> v(sgd ? 0 : problem.samples(), 0.0);
  std::vector<double> alpha(sgd ? problem.dims() : 0, 0.0);
  const auto kind = sgd ? UpdateKind::Gradient : UpdateKind::SharedVector;
  std::vector<WorkerReport> reports;
  reports.reserve(cfg.workers);
  result.rounds.reserve(std::min<std::size_t>(cfg.max_rounds, 1u << 16));

  for (std::uint32_t t = 1; t <= cfg.max_rounds; ++t) {
    const auto t0 = Clock::now();
    transport.broadcast(t, sgd ? std::span<const double>(alpha) : std::span<const double>(v));
    auto msgs = transport.gather(t);

    const auto a0 = Clock::now();
    reports.clear();
    for (auto& m : msgs) reports.push_back(decode_report(m, kind));
    const auto inc =
        aggregate(reports, cfg.workers, {cfg.algorithm, cfg.gamma, problem.lambda(), alpha});
    if (sgd) {
      if (inc.size() != alpha.size()) throw ProtocolError("gradient has the wrong dimension");
      for (std::size_t i = 0; i < alpha.size(); ++i) alpha[i] -= cfg.gamma * inc[i];
    } else {
      if (inc.size() != v.size()) throw ProtocolError("shared update has the wrong dimension");
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += inc[i];
    }
    const auto a1 = Clock::now();

    RoundRecord rec;
    rec.round = t;
    Nanos slowest{0};
    double alpha_sq = 0.0;
    for (const auto& r : reports) {
      slowest = std::max(slowest, r.compute);
      alpha_sq += r.alpha_sqnorm;
      rec.steps_done += r.update.steps_done;
      result.clamped = result.clamped || r.update.flagged;
    }
    rec.timings = RoundTimings::from_measured(since(t0, a1), slowest, since(a0, a1));

    rec.objective = sgd ? objective_value(problem, alpha)
                        : objective_from_shared(v, labels, problem.lambda(), alpha_sq);
    const bool finite = std::isfinite(rec.objective);
    rec.suboptimality = finite ? relative_suboptimality(rec.objective, f_star) : rec.objective;
    rec.t_instrumentation = since(a1, Clock::now());
    result.rounds.push_back(rec);

    if (cfg.check_consistency && !sgd) check_shared(problem, collect_alpha(transport, t, problem.dims()), v, t);

    if (!finite || rec.objective > diverge_above) {
      result.status = RunStatus::Diverged;
      break;
    }
    if (rec.suboptimality <= cfg.target_suboptimality) {
      result.status = RunStatus::Converged;
      break;
    }
  }

  if (sgd) {
    result.alpha = std::move(alpha);
  } else {
    const auto last = static_cast<std::uint32_t>(result.rounds.size());
    result.alpha = collect_alpha(transport, last, problem.dims());
    result.shared = std::move(v);
  }
  return result;
}

std::vector<Nanos> probe_round_trips(Transport& transport, std::size_t dim, std::size_t trials) {
  if (trials == 0) throw ConfigError("at least one trial is required");
  const double op = protocol::kEcho;
  transport.send_control(0, std::span(&op, 1));
  transport.collect(0);
  const std::vector<double> zeros(dim, 0.0);
  std::vector<Nanos> out;
  out.reserve(trials);
  for (std::size_t i = 0; i < trials; ++i) {
    const auto round = static_cast<std::uint32_t>(i + 1);
    const auto t0 = Clock::now();
    transport.broadcast(round, zeros);
    const auto sum = transport.reduce_sum(round);
    out.push_back(since(t0, Clock::now()));
    if (sum.size() != dim) throw ProtocolError("probe reply has the wrong dimension");
  }
  return out;
}

void shutdown_workers(Transport& transport) {
  const double op = protocol::kShutdown;
  transport.send_control(0, std::span(&op, 1));
}

}  // namespace syncml
