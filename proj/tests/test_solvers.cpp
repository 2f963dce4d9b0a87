#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "syncml/error.hpp"
#include "syncml/solvers.hpp"

using namespace syncml;

namespace {

const oracle::Dense kScalar{1, 1, {1}};
const oracle::Dense kDiag{2, 2, {1, 0, 0, 2}};

WorkerState column_worker(const oracle::Dense& d, std::size_t k_total, std::size_t k,
                          std::uint64_t seed = 1) {
  const auto a = SparseMatrix::from_dense(d.m, d.n, d.a);
  return WorkerState::for_columns(local_block(a, partition(a, k_total, PartitionMode::ByColumn), k),
                                  seed);
}

WorkerState row_worker(const oracle::Dense& d, const std::vector<double>& y, std::size_t k_total,
                       std::size_t k, std::uint64_t seed = 1) {
  const auto a = SparseMatrix::from_dense(d.m, d.n, d.a);
  return WorkerState::for_rows(local_block(a, partition(a, k_total, PartitionMode::ByRow), k), y,
                               seed);
}

// A_local · x for the worker's columns, computed from the dense matrix.
std::vector<double> local_matvec(const oracle::Dense& d, const WorkerState& w,
                                 std::span<const double> x) {
  std::vector<double> out(d.m, 0.0);
  const auto ids = w.global_ids();
  for (std::size_t l = 0; l < ids.size(); ++l)
    for (std::size_t i = 0; i < d.m; ++i) out[i] += d.at(i, ids[l]) * x[l];
  return out;
}

std::vector<double> zeros(std::size_t n) { return std::vector<double>(n, 0.0); }

}  // namespace

TEST(CocoaLocal, ScalarReachesOptimum) {
  auto w = column_worker(kScalar, 1, 0);
  const auto u = cocoa_local_scd(w, {1.0, 1.0, 1.0}, zeros(1), std::vector<double>{1}, 1);
  ASSERT_EQ(u.delta_v().size(), 1u);
  EXPECT_DOUBLE_EQ(u.delta_v()[0], 0.5);
  EXPECT_DOUBLE_EQ(w.alpha_local()[0], 0.5);
  EXPECT_EQ(u.steps_done, 1u);
  EXPECT_FALSE(u.flagged);
}

TEST(CocoaLocal, SigmaPrimeTwo) {
  auto w = column_worker(kScalar, 1, 0);
  const auto u = cocoa_local_scd(w, {1.0, 2.0, 1.0}, zeros(1), std::vector<double>{1}, 1);
  EXPECT_NEAR(u.delta_v()[0], 1.0 / 3.0, 1e-16);
  EXPECT_NEAR(w.alpha_local()[0], 1.0 / 3.0, 1e-16);
}

TEST(CocoaLocal, ZeroStepsIsFlaggedNoOp) {
  auto w = column_worker(kDiag, 1, 0);
  const auto u = cocoa_local_scd(w, {1.0, 1.0, 1.0}, zeros(2), std::vector<double>{1, 2}, 0);
  EXPECT_TRUE(u.flagged);
  EXPECT_EQ(u.delta_v().size(), 2u);
  for (double x : u.delta_v()) EXPECT_EQ(x, 0.0);
  for (double x : w.alpha_local()) EXPECT_EQ(x, 0.0);
}

TEST(CocoaLocal, EmptyColumnShrinksAlpha) {
  auto w = column_worker({1, 1, {0}}, 1, 0);
  w.alpha_local()[0] = 3.0;
  cocoa_local_scd(w, {2.0, 1.0, 1.0}, zeros(1), std::vector<double>{1}, 1);
  EXPECT_EQ(w.alpha_local()[0], 0.0);
}

TEST(CocoaLocal, DeltaVMatchesAlphaChange) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto d = oracle::random_dense(15, 12, 0.4, rng);
    const auto y = oracle::random_vector(15, rng);
    for (std::size_t k = 0; k < 3; ++k) {
      auto w = column_worker(d, 3, k, 10 + t);
      const auto v = oracle::random_vector(15, rng);
      const std::vector<double> before(w.alpha_local().begin(), w.alpha_local().end());
      const auto u = cocoa_local_scd(w, {0.5, 3.0, 1.0}, v, y, 25);
      std::vector<double> change(before.size());
      for (std::size_t i = 0; i < change.size(); ++i) change[i] = w.alpha_local()[i] - before[i];
      const auto want = local_matvec(d, w, change);
      EXPECT_LT(oracle::rel_diff(std::vector<double>(u.delta_v().begin(), u.delta_v().end()), want),
                1e-12);
    }
  }
}

TEST(CocoaLocal, GammaScalesAlphaStep) {
  std::mt19937_64 rng(4);
  const auto d = oracle::random_dense(8, 6, 0.6, rng);
  const auto y = oracle::random_vector(8, rng);
  auto full = column_worker(d, 1, 0, 5);
  auto half = column_worker(d, 1, 0, 5);
  const auto u1 = cocoa_local_scd(full, {1.0, 1.0, 1.0}, zeros(8), y, 10);
  const auto u2 = cocoa_local_scd(half, {1.0, 1.0, 0.5}, zeros(8), y, 10);
  EXPECT_EQ(u1.values, u2.values);
  for (std::size_t i = 0; i < 6; ++i)
    EXPECT_NEAR(half.alpha_local()[i], 0.5 * full.alpha_local()[i], 1e-15);
}

TEST(CocoaLocal, SingleWorkerDescends) {
  std::mt19937_64 rng(6);
  const auto d = oracle::random_dense(10, 10, 0.5, rng);
  const auto y = oracle::random_vector(10, rng);
  const double lambda = 0.3;
  auto w = column_worker(d, 1, 0, 7);
  std::vector<double> v = zeros(10);
  double prev = oracle::objective(d, y, lambda, zeros(10));
  for (int round = 0; round < 30; ++round) {
    const auto u = cocoa_local_scd(w, {lambda, 1.0, 1.0}, v, y, 5);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += u.delta_v()[i];
    std::vector<double> alpha(10, 0.0);
    for (std::size_t l = 0; l < 10; ++l) alpha[w.global_ids()[l]] = w.alpha_local()[l];
    const double f = oracle::objective(d, y, lambda, alpha);
    EXPECT_LE(f, prev + 1e-12);
    prev = f;
  }
}

TEST(CocoaLocal, Deterministic) {
  std::mt19937_64 rng(8);
  const auto d = oracle::random_dense(9, 7, 0.5, rng);
  const auto y = oracle::random_vector(9, rng);
  auto a = column_worker(d, 2, 1, 42), b = column_worker(d, 2, 1, 42);
  for (int r = 0; r < 5; ++r) {
    const auto ua = cocoa_local_scd(a, {1.0, 2.0, 1.0}, zeros(9), y, 4);
    const auto ub = cocoa_local_scd(b, {1.0, 2.0, 1.0}, zeros(9), y, 4);
    EXPECT_EQ(ua.values, ub.values);
  }
}

TEST(CocoaLocal, RejectsRowWorker) {
  auto w = row_worker(kDiag, {1, 2}, 1, 0);
  EXPECT_THROW(cocoa_local_scd(w, {1.0, 1.0, 1.0}, zeros(2), std::vector<double>{1, 2}, 1),
               ConfigError);
}

TEST(MiniBatchScd, ScalarStep) {
  auto w = column_worker(kScalar, 1, 0);
  const auto u = minibatch_scd_local(w, {1.0, 0.5}, zeros(1), std::vector<double>{1}, 1);
  EXPECT_DOUBLE_EQ(u.delta_v()[0], 0.5);
  EXPECT_EQ(w.alpha_local()[0], 0.0);  // staged, not yet committed
  EXPECT_TRUE(w.has_staged());
  EXPECT_DOUBLE_EQ(w.alpha_sqnorm_after_commit(), 0.25);
  w.commit_staged();
  EXPECT_DOUBLE_EQ(w.alpha_local()[0], 0.5);
  EXPECT_FALSE(w.has_staged());
}

TEST(MiniBatchScd, ZeroGradientAtFit) {
  auto w = column_worker(kDiag, 1, 0);
  const std::vector<double> y{1, 2};
  const auto u = minibatch_scd_local(w, {0.0, 0.3}, y, y, 2);
  for (double x : u.delta_v()) EXPECT_EQ(x, 0.0);
}

TEST(MiniBatchScd, DiagonalExample) {
  auto w = column_worker(kDiag, 1, 0);
  const auto u = minibatch_scd_local(w, {1.0, 0.1}, zeros(2), std::vector<double>{1, 2}, 2);
  EXPECT_NEAR(u.delta_v()[0], 0.1, 1e-15);
  EXPECT_NEAR(u.delta_v()[1], 0.8, 1e-15);
  w.commit_staged();
  EXPECT_NEAR(w.alpha_local()[0], 0.1, 1e-15);
  EXPECT_NEAR(w.alpha_local()[1], 0.4, 1e-15);
}

TEST(MiniBatchScd, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(12);
  const auto d = oracle::random_dense(7, 5, 0.6, rng);
  const auto y = oracle::random_vector(7, rng);
  const double lambda = 0.4, gamma = 0.05;
  auto w = column_worker(d, 1, 0, 3);
  const auto u = minibatch_scd_local(w, {lambda, gamma}, zeros(7), y, 5);
  std::vector<double> step(5);
  for (std::size_t j = 0; j < 5; ++j) {
    const double eps = 1e-6;
    auto plus = zeros(5), minus = zeros(5);
    plus[j] = eps;
    minus[j] = -eps;
    const double g =
        (oracle::objective(d, y, lambda, plus) - oracle::objective(d, y, lambda, minus)) / (2 * eps);
    step[j] = -gamma * g;
  }
  const auto want = oracle::matvec(d, step);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR(u.delta_v()[i], want[i], 1e-7);
}

TEST(MiniBatchScd, ClampsOversizedBatch) {
  auto w = column_worker(kDiag, 1, 0);
  const auto u = minibatch_scd_local(w, {1.0, 0.1}, zeros(2), std::vector<double>{1, 2}, 5);
  EXPECT_TRUE(u.flagged);
  EXPECT_EQ(u.steps_done, 2u);
}

TEST(MiniBatchScd, UncommittedStageIsProtocolError) {
  auto w = column_worker(kDiag, 1, 0);
  minibatch_scd_local(w, {1.0, 0.1}, zeros(2), std::vector<double>{1, 2}, 1);
  EXPECT_THROW(minibatch_scd_local(w, {1.0, 0.1}, zeros(2), std::vector<double>{1, 2}, 1),
               ProtocolError);
}

TEST(MiniBatchScd, SamplesWithoutReplacement) {
  std::mt19937_64 rng(1);
  auto w = column_worker(oracle::random_dense(4, 20, 1.0, rng), 1, 0, 9);
  for (int t = 0; t < 50; ++t) {
    const auto s = w.sample_without_replacement(7);
    std::vector<Index> ids(s.begin(), s.end());
    std::sort(ids.begin(), ids.end());
    EXPECT_EQ(std::adjacent_find(ids.begin(), ids.end()), ids.end());
    EXPECT_LT(ids.back(), 20u);
  }
}

TEST(MiniBatchSgd, SingleSample) {
  auto w = row_worker(kScalar, {1}, 1, 0);
  const auto u = minibatch_sgd_local(w, zeros(1), 1);
  ASSERT_EQ(u.partial_gradient().size(), 1u);
  EXPECT_EQ(u.partial_gradient()[0], -1.0);
}

TEST(MiniBatchSgd, ZeroAtInterpolatingAlpha) {
  const std::vector<double> alpha{0.5, -1.0};
  const auto y = oracle::matvec(kDiag, alpha);
  auto w = row_worker(kDiag, y, 1, 0);
  const auto u = minibatch_sgd_local(w, alpha, 1);
  for (double x : u.partial_gradient()) EXPECT_EQ(x, 0.0);
}

TEST(MiniBatchSgd, FullBatchIsExactGradientShare) {
  std::mt19937_64 rng(17);
  const auto d = oracle::random_dense(12, 6, 0.5, rng);
  const auto y = oracle::random_vector(12, rng);
  const auto alpha = oracle::random_vector(6, rng);
  auto r = oracle::matvec(d, alpha);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
  const auto want = oracle::matvec_t(d, r);
  std::vector<double> sum(6, 0.0);
  for (std::size_t k = 0; k < 3; ++k) {
    auto w = row_worker(d, y, 3, k);
    const auto u = minibatch_sgd_local(w, alpha, w.local_count());
    for (std::size_t j = 0; j < 6; ++j) sum[j] += u.partial_gradient()[j];
  }
  EXPECT_LT(oracle::rel_diff(sum, want), 1e-12);
}

// Exact expectation: every size-H subset of every worker is equally likely, so
// the mean over all subsets of the sum across workers must be the gradient.
TEST(MiniBatchSgd, UnbiasedOverAllSubsets) {
  const oracle::Dense d{4, 3, {1, 2, 0, 0, -1, 3, 2, 0, 1, -2, 1, 1}};
  const std::vector<double> y{1, -1, 2, 0.5};
  const std::vector<double> alpha{0.3, -0.7, 1.1};
  auto r = oracle::matvec(d, alpha);
  for (std::size_t i = 0; i < 4; ++i) r[i] -= y[i];
  const auto want = oracle::matvec_t(d, r);

  for (std::size_t k_total : {1u, 2u}) {
    for (std::size_t h = 1; h <= 4 / k_total; ++h) {
      std::vector<double> expectation(3, 0.0);
      for (std::size_t k = 0; k < k_total; ++k) {
        const auto w = row_worker(d, y, k_total, k);
        const std::size_t m_k = w.local_count();
        std::vector<double> mean(3, 0.0);
        std::size_t subsets = 0;
        for (unsigned mask = 0; mask < (1u << m_k); ++mask) {
          if (static_cast<std::size_t>(__builtin_popcount(mask)) != h) continue;
          std::vector<Index> s;
          for (std::size_t i = 0; i < m_k; ++i)
            if (mask & (1u << i)) s.push_back(i);
          const auto u = sgd_subset_gradient(w, alpha, s);
          for (std::size_t j = 0; j < 3; ++j) mean[j] += u.partial_gradient()[j];
          ++subsets;
        }
        for (std::size_t j = 0; j < 3; ++j) expectation[j] += mean[j] / subsets;
      }
      for (std::size_t j = 0; j < 3; ++j)
        EXPECT_NEAR(expectation[j], want[j], 1e-12 * std::max(1.0, std::abs(want[j])))
            << "K=" << k_total << " H=" << h;
    }
  }
}

TEST(MiniBatchSgd, RejectsColumnWorker) {
  auto w = column_worker(kDiag, 1, 0);
  EXPECT_THROW(minibatch_sgd_local(w, zeros(2), 1), ConfigError);
}

TEST(MiniBatchSgd, WrongAlphaLength) {
  auto w = row_worker(kDiag, {1, 2}, 1, 0);
  EXPECT_THROW(minibatch_sgd_local(w, zeros(3), 1), DimensionError);
}

TEST(LocalUpdate, KindMismatchThrows) {
  LocalUpdate u{UpdateKind::Gradient, {1.0}, 1, false};
  EXPECT_THROW(u.delta_v(), ProtocolError);
  u.kind = UpdateKind::SharedVector;
  EXPECT_THROW(u.partial_gradient(), ProtocolError);
}

TEST(WorkerState, ColumnNormsCached) {
  std::mt19937_64 rng(30);
  const auto d = oracle::random_dense(6, 8, 0.5, rng);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto w = column_worker(d, 2, k);
    ASSERT_EQ(w.alpha_local().size(), w.local_count());
    for (std::size_t l = 0; l < w.local_count(); ++l) {
      double s = 0;
      for (std::size_t i = 0; i < 6; ++i) s += d.at(i, w.global_ids()[l]) * d.at(i, w.global_ids()[l]);
      EXPECT_NEAR(w.column_sqnorms()[l], s, 1e-14);
    }
  }
}

TEST(AlgorithmNames, RoundTrip) {
  for (auto a : {Algorithm::CoCoA, Algorithm::MiniBatchScd, Algorithm::MiniBatchSgd})
    EXPECT_EQ(parse_algorithm(to_string(a)), a);
  EXPECT_THROW(parse_algorithm("adam"), ConfigError);
  EXPECT_EQ(partition_mode(Algorithm::MiniBatchSgd), PartitionMode::ByRow);
  EXPECT_EQ(partition_mode(Algorithm::CoCoA), PartitionMode::ByColumn);
}
