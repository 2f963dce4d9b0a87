#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "syncml/partition.hpp"

namespace syncml {

enum class Algorithm { CoCoA, MiniBatchScd, MiniBatchSgd };

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view name);  // "cocoa" | "mb-scd" | "mb-sgd"

// cocoa/mb-scd split features across workers, mb-sgd splits samples.
PartitionMode partition_mode(Algorithm a);

// One worker's resident state. In column mode the local units are feature
// columns and alpha_local persists across rounds; in row mode the units are
// samples (stored as columns of the transposed row block) and y_local holds
// their targets.
class WorkerState {
 public:
  static WorkerState for_columns(LocalBlock block, std::uint64_t seed);
  static WorkerState for_rows(LocalBlock block, std::span<const double> labels,
                              std::uint64_t seed);

  PartitionMode mode() const { return mode_; }
  std::size_t local_count() const { return units_.cols(); }
  const SparseMatrix& units() const { return units_; }
  std::span<const Index> global_ids() const { return global_ids_; }
  std::span<const double> column_sqnorms() const { return sqnorms_; }
  std::span<const double> y_local() const { return y_local_; }

  std::span<const double> alpha_local() const { return alpha_; }
  std::span<double> alpha_local() { return alpha_; }
  double alpha_sqnorm() const;

  // Mini-batch SCD two-phase commit.
  bool has_staged() const { return !staged_.empty(); }
  void stage(Index local_id, double value) { staged_.emplace_back(local_id, value); }
  void commit_staged();
  void discard_staged() { staged_.clear(); }
  // Σα² as it will be once the staged values are committed.
  double alpha_sqnorm_after_commit() const;

  std::mt19937_64& rng() { return rng_; }
  std::size_t sample_uniform();
  // H distinct local units, by a partial Fisher-Yates pass over a persistent
  // permutation.
  std::span<const Index> sample_without_replacement(std::size_t h);

 private:
  WorkerState(PartitionMode mode, SparseMatrix units, std::vector<Index> ids,
              std::vector<double> y_local, std::uint64_t seed);

  PartitionMode mode_;
  SparseMatrix units_;
  std::vector<Index> global_ids_;
  std::vector<double> sqnorms_;
  std::vector<double> y_local_;
  std::vector<double> alpha_;
  std::vector<std::pair<Index, double>> staged_;  // (local id, new value)
  std::vector<Index> order_;
  std::mt19937_64 rng_;
};

enum class UpdateKind { SharedVector, Gradient };

// What a worker ships to the coordinator after one round of local work:
// Δv_k (m-dimensional) for cocoa/mb-scd, a partial gradient (n-dimensional)
// for mb-sgd.
struct LocalUpdate {
  UpdateKind kind = UpdateKind::SharedVector;
  std::vector<double> values;
  std::size_t steps_done = 0;
  // H was 0 (no-op) or had to be clamped to the local count.
  bool flagged = false;

  std::span<const double> delta_v() const;
  std::span<const double> partial_gradient() const;
};

struct CocoaParams {
  double lambda = 1.0;
  double sigma_prime = 1.0;  // γ·K
  double gamma = 1.0;        // aggregation weight applied by the coordinator
};

// H steps of randomized coordinate descent (uniform, with replacement) on the
// worker's CoCoA subproblem
//   ∇ℓ(v)ᵀ A_k Δα + (σ′/2)‖A_k Δα‖² + (λ/2)‖α_k + Δα‖².
// Each step solves its coordinate exactly:
//   δ = (c_iᵀ(y − v − σ′Δv_k) − λα_i) / (σ′‖c_i‖² + λ).
// Returns Δv_k = A_k Δα. alpha_local advances by γΔα so that it stays
// consistent with the coordinator's v += γ Σ Δv_k.
LocalUpdate cocoa_local_scd(WorkerState& w, const CocoaParams& params,
                            std::span<const double> shared, std::span<const double> labels,
                            std::size_t h);

struct MiniBatchParams {
  double lambda = 1.0;
  double gamma = 1.0;  // step size
};

// H coordinate gradients g_i = c_iᵀ(v − y) + λα_i at the incoming v over a
// sample S_k drawn without replacement; returns Δv_k = −γ Σ g_i c_i and
// stages α_i ← α_i − γ g_i until commit_staged().
LocalUpdate minibatch_scd_local(WorkerState& w, const MiniBatchParams& params,
                                std::span<const double> shared, std::span<const double> labels,
                                std::size_t h);

// Unbiased estimate of this worker's share of Aᵀ(Aα − y):
//   (m_k/H) Σ_{i∈S_k} (r_iᵀα − y_i) r_i
// over H local samples drawn without replacement. The λα term is left to the
// coordinator.
LocalUpdate minibatch_sgd_local(WorkerState& w, std::span<const double> alpha, std::size_t h);

// The same estimate for an explicit set of local sample ids.
LocalUpdate sgd_subset_gradient(const WorkerState& w, std::span<const double> alpha,
                                std::span<const Index> subset);

}  // namespace syncml
