#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "syncml/engine.hpp"

namespace syncml {

// Rounds needed to reach the target at a given H.
struct ConvergenceSample {
  double h;
  double rounds;
};

// N(H) ≈ a/H + b by least squares on (1/H, 1).
struct ConvergenceFit {
  double a = 0.0;
  double b = 0.0;
  double r_squared = 0.0;
  bool intercept_clamped = false;  // raw intercept was negative; refit through the origin
  bool degenerate = false;         // a == 0: rounds do not depend on H
  std::size_t points = 0;
};

ConvergenceFit fit_convergence(std::span<const ConvergenceSample> samples);

struct HPrediction {
  std::size_t h = 1;          // nearest positive integer to h_exact
  double h_exact = 0.0;       // √(a·t1 / (b·t2))
  double predicted_time = 0;  // T(H*) = a·t2 + b·t1 + 2√(a·b·t1·t2), seconds
  bool unbounded = false;     // b == 0: larger H is always better under the model
};

// Minimizer of T(H) = (a/H + b)(t1 + t2·H). t1 and t2 in seconds.
HPrediction predict_h_opt(const ConvergenceFit& fit, double t1, double t2);

// (a/H + b)(t1 + t2·H)
double predicted_time(const ConvergenceFit& fit, double t1, double t2, double h);

struct PerfFit {
  ConvergenceFit convergence;
  double t1 = 0.0;  // seconds per round
  double t2 = 0.0;  // seconds per local update
  HPrediction h_opt;
};

// Time at which the suboptimality trace first reaches `target`, interpolating
// log-linearly in suboptimality inside the crossing round (round 0 is the
// start at time 0). Empty when never reached.
struct TargetCrossing {
  std::size_t rounds = 0;  // first round with suboptimality <= target
  double time = 0.0;       // seconds, interpolated
};
std::optional<TargetCrossing> time_to_target(double initial_suboptimality,
                                             std::span<const RoundRecord> rounds, double target);

struct SweepPoint {
  std::size_t h = 0;
  RunStatus status = RunStatus::Unreached;
  std::size_t rounds = 0;           // rounds executed
  std::optional<std::size_t> rounds_to_target;
  std::optional<double> time_to_target;  // seconds
  double final_suboptimality = 0.0;
};

// One engine run per H. Run i uses seed base.seed + i.
std::vector<SweepPoint> sweep_h(const AlgorithmConfig& base, std::span<const std::size_t> h_grid,
                                const RidgeProblem& problem, Transport& transport, double f_star);

// Samples usable by fit_convergence: the converged points.
std::vector<ConvergenceSample> convergence_samples(std::span<const SweepPoint> sweep);

// Converged point with the least time to target.
std::optional<SweepPoint> measured_argmin(std::span<const SweepPoint> sweep);

// Median zero-work round trip at the given payload dimension.
Nanos measure_t1(Transport& transport, std::size_t payload_dim, std::size_t trials);

// Mean per-update time of the algorithm's local step over `trials` batches of
// 1000 updates, taking the slowest of the K local blocks. The K blocks run
// concurrently, as they do in a round. Seconds.
double measure_t2(const RidgeProblem& problem, Algorithm algorithm, std::size_t workers,
                 std::size_t trials);

// Payload size of a round: m for column algorithms, n for mb-sgd.
std::size_t round_payload_dim(const RidgeProblem& problem, Algorithm algorithm);

}  // namespace syncml
