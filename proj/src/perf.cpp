#include "syncml/perf.hpp"

#include <algorithm>
#include <cmath>
#include <latch>
#include <set>
#include <string>
#include <thread>

#include "syncml/error.hpp"

namespace syncml {

namespace {

template <class T>
T median(std::vector<T> xs) {
  const auto mid = xs.begin() + static_cast<std::ptrdiff_t>(xs.size() / 2);
  std::nth_element(xs.begin(), mid, xs.end());
  return *mid;
}

}  // namespace

ConvergenceFit fit_convergence(std::span<const ConvergenceSample> samples) {
  if (samples.size() < 3)
    throw ConfigError("need at least 3 (H, rounds) points to fit, got " +
                      std::to_string(samples.size()));
  std::set<double> distinct;
  for (const auto& s : samples) {
    if (!(s.h > 0.0) || !(s.rounds >= 1.0)) throw ConfigError("samples need H > 0 and N >= 1");
    distinct.insert(s.h);
  }
  if (distinct.size() < 2) throw RankError("all samples share one H; the fit is rank-deficient");

  const double n = static_cast<double>(samples.size());
  double mx = 0, my = 0;
  for (const auto& s : samples) {
    mx += 1.0 / s.h;
    my += s.rounds;
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& s : samples) {
    const double dx = 1.0 / s.h - mx, dy = s.rounds - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }

  ConvergenceFit fit;
  fit.points = samples.size();
  fit.a = sxy / sxx;
  fit.b = my - fit.a * mx;
  if (fit.b < 0.0) {
    double xx = 0, xy = 0;
    for (const auto& s : samples) {
      xx += 1.0 / (s.h * s.h);
      xy += s.rounds / s.h;
    }
    fit.a = xy / xx;
    fit.b = 0.0;
    fit.intercept_clamped = true;
  }
  if (!(fit.a > 1e-12 * std::max(1.0, my))) {
    fit.a = 0.0;
    fit.b = my;
    fit.intercept_clamped = false;
    fit.degenerate = true;
  }

  double ss_res = 0;
  for (const auto& s : samples) {
    const double r = s.rounds - (fit.a / s.h + fit.b);
    ss_res += r * r;
  }
  if (syy > 0.0)
    fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  else
    fit.r_squared = ss_res <= 1e-24 ? 1.0 : 0.0;
  return fit;
}

double predicted_time(const ConvergenceFit& fit, double t1, double t2, double h) {
  return (fit.a / h + fit.b) * (t1 + t2 * h);
}

HPrediction predict_h_opt(const ConvergenceFit& fit, double t1, double t2) {
  if (!(fit.a > 0.0)) throw ConfigError("fit is degenerate (a = 0); H has no optimum");
  if (!(fit.b >= 0.0)) throw ConfigError("fit intercept must be nonnegative");
  if (!(t1 > 0.0) || !(t2 > 0.0)) throw ConfigError("t1 and t2 must be positive");
  HPrediction p;
  if (fit.b == 0.0) {
    p.unbounded = true;
    p.h = 0;
    p.h_exact = INFINITY;
    p.predicted_time = fit.a * t2;
    return p;
  }
  p.h_exact = std::sqrt(fit.a * t1 / (fit.b * t2));
  p.h = static_cast<std::size_t>(std::max(1.0, std::round(p.h_exact)));
  p.predicted_time = fit.a * t2 + fit.b * t1 + 2.0 * std::sqrt(fit.a * fit.b * t1 * t2);
  return p;
}

std::optional<TargetCrossing> time_to_target(double initial_suboptimality,
                                             std::span<const RoundRecord> rounds, double target) {
  if (initial_suboptimality <= target) return TargetCrossing{0, 0.0};
  double prev_sub = initial_suboptimality;
  double elapsed = 0.0;
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    const double dt = seconds(rounds[i].timings.t_tot);
    const double sub = rounds[i].suboptimality;
    if (sub <= target) {
      double frac = 1.0;
      if (prev_sub > sub) {
        frac = sub > 0.0 ? (std::log(prev_sub) - std::log(target)) /
                               (std::log(prev_sub) - std::log(sub))
                         : (prev_sub - target) / (prev_sub - sub);
      }
      return TargetCrossing{i + 1, elapsed + std::clamp(frac, 0.0, 1.0) * dt};
    }
    elapsed += dt;
    prev_sub = sub;
  }
  return std::nullopt;
}

std::vector<SweepPoint> sweep_h(const AlgorithmConfig& base, std::span<const std::size_t> h_grid,
                                const RidgeProblem& problem, Transport& transport, double f_star) {
  if (h_grid.empty()) throw ConfigError("H grid is empty");
  std::vector<SweepPoint> out;
  for (std::size_t i = 0; i < h_grid.size(); ++i) {
    AlgorithmConfig cfg = base;
    cfg.h = h_grid[i];
    cfg.seed = base.seed + i;
    const auto r = run(cfg, problem, transport, f_star);
    SweepPoint p;
    p.h = cfg.h;
    p.status = r.status;
    p.rounds = r.rounds.size();
    p.final_suboptimality = r.rounds.empty() ? r.initial_suboptimality : r.rounds.back().suboptimality;
    if (r.status == RunStatus::Converged) {
      if (auto c = time_to_target(r.initial_suboptimality, r.rounds, cfg.target_suboptimality)) {
        p.rounds_to_target = c->rounds;
        p.time_to_target = c->time;
      }
    }
    out.push_back(p);
  }
  return out;
}

std::vector<ConvergenceSample> convergence_samples(std::span<const SweepPoint> sweep) {
  std::vector<ConvergenceSample> out;
  for (const auto& p : sweep)
    if (p.rounds_to_target && *p.rounds_to_target >= 1)
      out.push_back({static_cast<double>(p.h), static_cast<double>(*p.rounds_to_target)});
  return out;
}

std::optional<SweepPoint> measured_argmin(std::span<const SweepPoint> sweep) {
  std::optional<SweepPoint> best;
  for (const auto& p : sweep)
    if (p.time_to_target && (!best || *p.time_to_target < *best->time_to_target)) best = p;
  return best;
}

Nanos measure_t1(Transport& transport, std::size_t payload_dim, std::size_t trials) {
  if (trials == 0) throw ConfigError("at least one trial is required");
  auto times = probe_round_trips(transport, payload_dim, trials + 1);
  times.erase(times.begin());  // warm-up
  return median(std::move(times));
}

std::size_t round_payload_dim(const RidgeProblem& problem, Algorithm algorithm) {
  return algorithm == Algorithm::MiniBatchSgd ? problem.dims() : problem.samples();
}

double measure_t2(const RidgeProblem& problem, Algorithm algorithm, std::size_t workers,
                 std::size_t trials) {
  if (trials == 0) throw ConfigError("at least one trial is required");
  if (workers == 0) throw ConfigError("K must be at least 1");
  const auto& a = problem.matrix();
  if (a.rows() == 0 || a.cols() == 0 || a.nnz() == 0)
    throw ConfigError("matrix is empty; there are no updates to time");
  constexpr std::size_t kBatch = 1000;
  const auto mode = partition_mode(algorithm);
  const auto plan = partition(a, workers, mode);
  const auto labels = problem.labels();
  const std::vector<double> v(problem.samples(), 0.0);
  const std::vector<double> alpha(problem.dims(), 0.0);

  // All K blocks run at once so that workers sharing cores are timed the way
  // they execute inside a round. Each block reports its mean over the whole
  // run; a per-batch median would hide time slicing between batches.
  std::vector<double> per_worker(workers, 0.0);
  std::latch ready(static_cast<std::ptrdiff_t>(workers));
  auto bench = [&](std::size_t k) {
    auto block = local_block(a, plan, k);
    auto w = mode == PartitionMode::ByColumn ? WorkerState::for_columns(std::move(block), k)
                                             : WorkerState::for_rows(std::move(block), labels, k);
    ready.arrive_and_wait();
    std::size_t steps = 0;
    const auto t0 = Clock::now();
    for (std::size_t t = 0; t < trials; ++t) {
      LocalUpdate u;
      switch (algorithm) {
        case Algorithm::CoCoA:
          u = cocoa_local_scd(w, {problem.lambda(), static_cast<double>(workers), 1.0}, v, labels,
                              kBatch);
          break;
        case Algorithm::MiniBatchScd:
          u = minibatch_scd_local(w, {problem.lambda(), 1.0}, v, labels,
                                  std::min(kBatch, w.local_count()));
          w.discard_staged();
          break;
        case Algorithm::MiniBatchSgd:
          u = minibatch_sgd_local(w, alpha, std::min(kBatch, w.local_count()));
          break;
      }
      steps += u.steps_done;
    }
    const std::chrono::duration<double> dt = Clock::now() - t0;
    per_worker[k] = dt.count() / static_cast<double>(std::max<std::size_t>(1, steps));
  };
  {
    std::vector<std::jthread> threads;
    for (std::size_t k = 1; k < workers; ++k) threads.emplace_back(bench, k);
    bench(0);
  }
  return *std::max_element(per_worker.begin(), per_worker.end());
}

}  // namespace syncml
