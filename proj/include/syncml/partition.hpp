#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "syncml/sparse_matrix.hpp"

namespace syncml {

enum class PartitionMode { ByColumn, ByRow };

const char* to_string(PartitionMode mode);

// Assignment of column (or row) indices to K workers. Construction checks that
// the parts are disjoint, cover 0..total-1 and that the recorded loads match.
class PartitionPlan {
 public:
  PartitionPlan(PartitionMode mode, std::size_t total, std::vector<std::vector<Index>> parts,
                std::vector<std::size_t> nnz_per_part, std::span<const std::size_t> unit_nnz);

  PartitionMode mode() const { return mode_; }
  std::size_t size() const { return parts_.size(); }
  std::size_t total() const { return total_; }
  std::span<const Index> part(std::size_t k) const { return parts_.at(k); }
  const std::vector<std::vector<Index>>& parts() const { return parts_; }
  std::span<const std::size_t> nnz_per_part() const { return nnz_; }

  std::size_t max_load() const;
  double mean_load() const;

 private:
  PartitionMode mode_;
  std::size_t total_;
  std::vector<std::vector<Index>> parts_;
  std::vector<std::size_t> nnz_;
};

struct PartitionOptions {
  std::uint64_t seed = 0;
  // Randomize the order within runs of equal load before assignment. Off by
  // default so the plan depends on the data only.
  bool shuffle_ties = false;
};

// Longest-processing-time greedy over per-index loads: indices sorted by load
// descending (ties by index ascending), each placed on the currently lightest
// part (ties to the part with fewer indices, then lower id). Indices inside a
// part are returned ascending.
PartitionPlan lpt_partition(std::span<const std::size_t> loads, std::size_t k, PartitionMode mode,
                            const PartitionOptions& options = {});

// Balances Σ nnz over columns (ByColumn) or rows (ByRow).
PartitionPlan partition(const SparseMatrix& mat, std::size_t k, PartitionMode mode,
                        const PartitionOptions& options = {});

// Worker k's slice. ByColumn keeps all m rows and the listed columns; ByRow
// keeps all n columns and the listed rows. global_ids maps local to global.
struct LocalBlock {
  SparseMatrix matrix;
  std::vector<Index> global_ids;
};

LocalBlock local_block(const SparseMatrix& mat, const PartitionPlan& plan, std::size_t k);

}  // namespace syncml
