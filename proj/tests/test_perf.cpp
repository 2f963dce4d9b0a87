#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "helpers.hpp"
#include "syncml/error.hpp"
#include "syncml/perf.hpp"

using namespace syncml;
using namespace std::chrono_literals;

namespace {

RoundRecord record(std::uint32_t round, double seconds_taken, double sub) {
  RoundRecord r;
  r.round = round;
  const auto total = Nanos(static_cast<Nanos::rep>(seconds_taken * 1e9));
  r.timings = RoundTimings::from_measured(total, Nanos{0}, Nanos{0});
  r.suboptimality = sub;
  return r;
}

std::vector<ConvergenceSample> exact_samples(double a, double b, std::initializer_list<double> hs) {
  std::vector<ConvergenceSample> out;
  for (double h : hs) out.push_back({h, a / h + b});
  return out;
}

std::size_t brute_force_h(const ConvergenceFit& f, double t1, double t2) {
  std::size_t best = 1;
  double best_t = std::numeric_limits<double>::infinity();
  for (std::size_t h = 1; h <= 1000000; ++h) {
    const double t = (f.a / double(h) + f.b) * (t1 + t2 * double(h));
    if (t < best_t) {
      best_t = t;
      best = h;
    }
  }
  return best;
}

AlgorithmConfig cocoa(std::size_t k) {
  AlgorithmConfig c;
  c.workers = k;
  c.max_rounds = 5000;
  c.seed = 11;
  return c;
}

}  // namespace

TEST(FitConvergence, ExactModel) {
  const auto f = fit_convergence(exact_samples(100, 1, {1, 10, 100}));
  EXPECT_NEAR(f.a, 100, 1e-9);
  EXPECT_NEAR(f.b, 1, 1e-9);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  EXPECT_FALSE(f.intercept_clamped);
  EXPECT_FALSE(f.degenerate);
  EXPECT_EQ(f.points, 3u);
}

TEST(FitConvergence, FlatDataIsDegenerate) {
  const std::vector<ConvergenceSample> s{{1, 7}, {10, 7}, {100, 7}, {1000, 7}};
  const auto f = fit_convergence(s);
  EXPECT_TRUE(f.degenerate);
  EXPECT_EQ(f.a, 0.0);
  EXPECT_NEAR(f.b, 7.0, 1e-12);
  EXPECT_THROW(predict_h_opt(f, 1.0, 1.0), ConfigError);
}

TEST(FitConvergence, NegativeInterceptIsClamped) {
  // N = 100/H - 5 has a negative intercept; the refit goes through the origin.
  const auto f = fit_convergence(exact_samples(100, -5, {1, 2, 4, 8}));
  EXPECT_TRUE(f.intercept_clamped);
  EXPECT_EQ(f.b, 0.0);
  double xx = 0, xy = 0;
  for (double h : {1.0, 2.0, 4.0, 8.0}) {
    xx += 1 / (h * h);
    xy += (100 / h - 5) / h;
  }
  EXPECT_NEAR(f.a, xy / xx, 1e-9);
  EXPECT_TRUE(predict_h_opt(f, 1e-3, 1e-6).unbounded);
}

TEST(FitConvergence, Errors) {
  EXPECT_THROW(fit_convergence(exact_samples(10, 1, {1, 2})), ConfigError);
  const std::vector<ConvergenceSample> same{{5, 10}, {5, 11}, {5, 12}};
  EXPECT_THROW(fit_convergence(same), RankError);
  const std::vector<ConvergenceSample> bad{{1, 0.5}, {2, 3}, {3, 4}};
  EXPECT_THROW(fit_convergence(bad), ConfigError);
}

TEST(FitConvergence, NoisyDataMatchesClosedForm) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0, 2);
  std::vector<ConvergenceSample> s;
  for (double h : {1.0, 2.0, 5.0, 10.0, 20.0, 50.0}) s.push_back({h, 300 / h + 20 + noise(rng)});
  const auto f = fit_convergence(s);
  // Normal equations for (1/H, 1) solved by Cramer's rule.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : s) {
    sx += 1 / p.h;
    sy += p.rounds;
    sxx += 1 / (p.h * p.h);
    sxy += p.rounds / p.h;
  }
  const double n = double(s.size()), det = n * sxx - sx * sx;
  EXPECT_NEAR(f.a, (n * sxy - sx * sy) / det, 1e-9);
  EXPECT_NEAR(f.b, (sxx * sy - sx * sxy) / det, 1e-9);
  EXPECT_GT(f.r_squared, 0.95);
  EXPECT_LE(f.r_squared, 1.0);
}

TEST(PredictH, Examples) {
  ConvergenceFit f;
  f.a = f.b = 1;
  EXPECT_EQ(predict_h_opt(f, 0.5, 0.5).h, 1u);
  f.a = 100;
  const auto p = predict_h_opt(f, 10e-3, 0.1e-3);
  EXPECT_EQ(p.h, 100u);
  EXPECT_NEAR(p.h_exact, 100.0, 1e-9);
  EXPECT_NEAR(p.predicted_time, predicted_time(f, 10e-3, 0.1e-3, 100.0), 1e-12);
  EXPECT_NEAR(predict_h_opt(f, 40e-3, 0.1e-3).h_exact, 200.0, 1e-9);
}

TEST(PredictH, Errors) {
  ConvergenceFit f;
  f.a = 1;
  f.b = 1;
  EXPECT_THROW(predict_h_opt(f, 0.0, 1.0), ConfigError);
  EXPECT_THROW(predict_h_opt(f, 1.0, 0.0), ConfigError);
  f.b = 0;
  const auto p = predict_h_opt(f, 1.0, 1.0);
  EXPECT_TRUE(p.unbounded);
  EXPECT_EQ(p.h, 0u);
}

TEST(PredictH, MatchesBruteForce) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> lg(-3, 3);
  for (int t = 0; t < 30; ++t) {
    ConvergenceFit f;
    f.a = std::pow(10, 2 + lg(rng));
    f.b = std::pow(10, lg(rng) / 3);
    const double t2 = 1e-6 * std::pow(10, lg(rng) / 3);
    double t1 = 1e-3 * std::pow(10, lg(rng));
    // Keep the optimum inside the brute-force range.
    while (std::sqrt(f.a * t1 / (f.b * t2)) > 5e5) t1 /= 10;
    const auto p = predict_h_opt(f, t1, t2);
    const auto want = brute_force_h(f, t1, t2);
    EXPECT_LE(std::abs(double(p.h) - double(want)), 1.0) << f.a << " " << f.b << " " << t1 << " " << t2;
  }
}

TEST(TimeToTarget, Interpolates) {
  const std::vector<RoundRecord> r{record(1, 1.0, 0.1), record(2, 1.0, 0.01), record(3, 1.0, 0.001)};
  auto c = time_to_target(1.0, r, 0.1);
  ASSERT_TRUE(c);
  EXPECT_EQ(c->rounds, 1u);
  EXPECT_NEAR(c->time, 1.0, 1e-12);
  c = time_to_target(1.0, r, std::sqrt(0.1 * 0.01));
  ASSERT_TRUE(c);
  EXPECT_EQ(c->rounds, 2u);
  EXPECT_NEAR(c->time, 1.5, 1e-9);
  EXPECT_FALSE(time_to_target(1.0, r, 1e-4));
  c = time_to_target(1e-5, r, 1e-3);
  ASSERT_TRUE(c);
  EXPECT_EQ(c->rounds, 0u);
  EXPECT_EQ(c->time, 0.0);
}

TEST(TimeToTarget, ExactZeroSuboptimality) {
  const std::vector<RoundRecord> r{record(1, 2.0, 0.0)};
  const auto c = time_to_target(1.0, r, 0.5);
  ASSERT_TRUE(c);
  EXPECT_NEAR(c->time, 1.0, 1e-9);  // linear fallback when the log is undefined
}

TEST(Sweep, SinglePointEqualsDirectRun) {
  const auto data = testing_util::tiny();
  const RidgeProblem p(data, 1.0);
  const double f_star = optimal_objective(p);
  LocalCluster cluster(data, Backend::InProc, {2, 0ns, 10000ms});
  auto base = cocoa(2);
  const std::vector<std::size_t> grid{10};
  const auto sweep = sweep_h(base, grid, p, cluster.transport(), f_star);
  base.h = 10;
  const auto direct = run(base, p, cluster.transport(), f_star);
  ASSERT_EQ(sweep.size(), 1u);
  EXPECT_EQ(sweep[0].status, direct.status);
  EXPECT_EQ(sweep[0].rounds, direct.rounds.size());
  EXPECT_EQ(sweep[0].final_suboptimality, direct.rounds.back().suboptimality);
  ASSERT_TRUE(sweep[0].rounds_to_target);
  EXPECT_EQ(*sweep[0].rounds_to_target, direct.rounds.size());
}

TEST(Sweep, UnreachedPointsCarryNoTime) {
  const auto data = testing_util::tiny();
  const RidgeProblem p(data, 1.0);
  LocalCluster cluster(data, Backend::InProc, {1, 0ns, 10000ms});
  auto base = cocoa(1);
  base.max_rounds = 2;
  const std::vector<std::size_t> grid{1, 2};
  const auto sweep = sweep_h(base, grid, p, cluster.transport(), optimal_objective(p));
  for (const auto& s : sweep) {
    EXPECT_EQ(s.status, RunStatus::Unreached);
    EXPECT_FALSE(s.time_to_target);
  }
  EXPECT_TRUE(convergence_samples(sweep).empty());
  EXPECT_FALSE(measured_argmin(sweep));
  EXPECT_THROW(sweep_h(base, std::span<const std::size_t>{}, p, cluster.transport(), 0.0), ConfigError);
}

TEST(Sweep, LatencyMovesTheOptimumUp) {
  const auto data = testing_util::tiny();
  const RidgeProblem p(data, 1.0);
  const double f_star = optimal_objective(p);
  const std::vector<std::size_t> grid{100, 10000};
  std::vector<std::size_t> best;
  for (auto latency : {0ms, 20ms}) {
    LocalCluster cluster(data, Backend::InProc, {2, latency, 10000ms});
    const auto sweep = sweep_h(cocoa(2), grid, p, cluster.transport(), f_star);
    const auto arg = measured_argmin(sweep);
    ASSERT_TRUE(arg);
    best.push_back(arg->h);
  }
  EXPECT_GT(best[1], best[0]);
}

TEST(Sweep, ModelPredictsMeasuredTimes) {
  const auto data = testing_util::tiny();
  const RidgeProblem p(data, 1.0);
  const double f_star = optimal_objective(p);
  LocalCluster cluster(data, Backend::InProc, {2, 2ms, 10000ms});
  const std::vector<std::size_t> grid{5, 10, 20, 50, 100, 200};
  const auto sweep = sweep_h(cocoa(2), grid, p, cluster.transport(), f_star);
  const auto samples = convergence_samples(sweep);
  ASSERT_EQ(samples.size(), grid.size());
  const auto fit = fit_convergence(samples);
  const double t1 = seconds(measure_t1(cluster.transport(), round_payload_dim(p, Algorithm::CoCoA), 20));
  const double t2 = measure_t2(p, Algorithm::CoCoA, 2, 5);
  for (const auto& s : sweep) {
    const double model = predicted_time(fit, t1, t2, double(s.h));
    EXPECT_LE(std::abs(model - *s.time_to_target), 0.3 * *s.time_to_target)
        << "H=" << s.h << " N=" << *s.rounds_to_target << " a=" << fit.a << " b=" << fit.b
        << " t1=" << t1 << " t2=" << t2;
  }
}

TEST(MeasureT1, LatencyFloorAndStability) {
  const auto data = testing_util::tiny();
  LocalCluster cluster(data, Backend::InProc, {2, 3ms, 10000ms});
  EXPECT_GE(measure_t1(cluster.transport(), 10, 10), Nanos(3ms));
  cluster.transport().set_injected_latency(0ns);
  const auto a = measure_t1(cluster.transport(), 10, 50);
  const auto b = measure_t1(cluster.transport(), 10, 50);
  EXPECT_GT(a.count(), 0);
  EXPECT_LT(std::max(a, b).count(), 5 * std::min(a, b).count());
  EXPECT_THROW(measure_t1(cluster.transport(), 10, 0), ConfigError);
}

TEST(MeasureT1, LargePayloadCostsMoreOverTcp) {
  const auto data = testing_util::tiny();
  LocalCluster cluster(data, Backend::Tcp, {1, 0ns, 30000ms});
  const auto small = measure_t1(cluster.transport(), 10, 10);
  const auto large = measure_t1(cluster.transport(), 1000000, 3);
  EXPECT_GE(large, small);
}

TEST(MeasureT2, StableAndScalesWithColumnLength) {
  std::vector<double> t2;
  for (double density : {0.0005, 0.005, 0.05}) {
    // 2000 rows, so the mean column holds 1, 10 and 100 nonzeros.
    const auto data = make_synthetic({2000, 400, density, 0.1, 5});
    const RidgeProblem p(data, 1.0);
    const double a = measure_t2(p, Algorithm::CoCoA, 1, 5);
    const double b = measure_t2(p, Algorithm::CoCoA, 1, 5);
    EXPECT_GT(a, 0.0);
    EXPECT_LT(std::max(a, b), 2 * std::min(a, b)) << density;
    t2.push_back(std::min(a, b));
  }
  EXPECT_GT(t2[1], t2[0]);
  EXPECT_GT(t2[2], 3 * t2[1]);
}

TEST(MeasureT2, Errors) {
  const RidgeProblem empty(testing_util::to_dataset({3, 3, std::vector<double>(9, 0.0)}, {1, 2, 3}), 1.0);
  EXPECT_THROW(measure_t2(empty, Algorithm::CoCoA, 1, 3), ConfigError);
  const RidgeProblem ok(testing_util::tiny(), 1.0);
  EXPECT_THROW(measure_t2(ok, Algorithm::CoCoA, 1, 0), ConfigError);
  for (auto alg : {Algorithm::MiniBatchScd, Algorithm::MiniBatchSgd})
    EXPECT_GT(measure_t2(ok, alg, 2, 2), 0.0);
}

TEST(Timings, IdentityIsExact) {
  const auto t = RoundTimings::from_measured(Nanos(1000), Nanos(300), Nanos(200));
  EXPECT_EQ(t.t_overhead, Nanos(500));
  EXPECT_EQ(t.t_tot, t.t_worker + t.t_master + t.t_overhead);
  EXPECT_TRUE(t.consistent());
}
