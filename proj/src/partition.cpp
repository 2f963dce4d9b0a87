#include "syncml/partition.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <random>
#include <string>
#include <tuple>
#include <utility>

#include "syncml/error.hpp"

namespace syncml {

const char* to_string(PartitionMode mode) {
  return mode == PartitionMode::ByColumn ? "by-column" : "by-row";
}

PartitionPlan::PartitionPlan(PartitionMode mode, std::size_t total,
                             std::vector<std::vector<Index>> parts,
                             std::vector<std::size_t> nnz_per_part,
                             std::span<const std::size_t> unit_nnz)
    : mode_(mode), total_(total), parts_(std::move(parts)), nnz_(std::move(nnz_per_part)) {
  if (parts_.empty()) throw ConfigError("partition plan needs at least one part");
  if (nnz_.size() != parts_.size()) throw ConfigError("one load entry per part required");
  if (unit_nnz.size() != total_) throw ConfigError("per-index load vector has wrong length");
  std::vector<char> seen(total_, 0);
  std::size_t covered = 0;
  for (std::size_t k = 0; k < parts_.size(); ++k) {
    std::size_t load = 0;
    for (Index i : parts_[k]) {
      if (i >= total_) throw ConfigError("partition index out of range");
      if (seen[i]) throw ConfigError("index " + std::to_string(i) + " assigned twice");
      seen[i] = 1;
      ++covered;
      load += unit_nnz[i];
    }
    if (load != nnz_[k])
      throw ConfigError("recorded load of part " + std::to_string(k) + " is inconsistent");
  }
  if (covered != total_) throw ConfigError("partition does not cover every index");
}

std::size_t PartitionPlan::max_load() const { return *std::max_element(nnz_.begin(), nnz_.end()); }

double PartitionPlan::mean_load() const {
  return static_cast<double>(std::accumulate(nnz_.begin(), nnz_.end(), std::size_t{0})) /
         static_cast<double>(nnz_.size());
}

PartitionPlan lpt_partition(std::span<const std::size_t> loads, std::size_t k, PartitionMode mode,
                            const PartitionOptions& options) {
  if (k == 0) throw ConfigError("worker count must be at least 1");
  if (k > loads.size())
    throw ConfigError("cannot split " + std::to_string(loads.size()) + " indices across " +
                      std::to_string(k) + " workers");

  std::vector<Index> order(loads.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return loads[a] > loads[b]; });
  if (options.shuffle_ties) {
    std::mt19937_64 rng(options.seed);
    for (auto run = order.begin(); run != order.end();) {
      auto end = std::find_if(run, order.end(),
                              [&](Index i) { return loads[i] != loads[*run]; });
      std::shuffle(run, end, rng);
      run = end;
    }
  }

  // (load, index count, part id): equal loads go to the part holding fewer
  // indices, so zero-load indices still spread and no part stays empty.
  using Slot = std::tuple<std::size_t, std::size_t, std::size_t>;
  std::priority_queue<Slot, std::vector<Slot>, std::greater<>> lightest;
  for (std::size_t p = 0; p < k; ++p) lightest.emplace(0, 0, p);
  std::vector<std::vector<Index>> parts(k);
  std::vector<std::size_t> part_load(k, 0);
  for (Index i : order) {
    auto [load, count, p] = lightest.top();
    lightest.pop();
    parts[p].push_back(i);
    part_load[p] = load + loads[i];
    lightest.emplace(part_load[p], count + 1, p);
  }
  for (auto& part : parts) std::sort(part.begin(), part.end());
  return PartitionPlan(mode, loads.size(), std::move(parts), std::move(part_load), loads);
}

PartitionPlan partition(const SparseMatrix& mat, std::size_t k, PartitionMode mode,
                        const PartitionOptions& options) {
  std::vector<std::size_t> loads;
  if (mode == PartitionMode::ByColumn) {
    loads.resize(mat.cols());
    for (std::size_t j = 0; j < mat.cols(); ++j) loads[j] = mat.col_nnz(j);
  } else {
    loads = mat.row_nnz();
  }
  return lpt_partition(loads, k, mode, options);
}

LocalBlock local_block(const SparseMatrix& mat, const PartitionPlan& plan, std::size_t k) {
  if (k >= plan.size()) throw ConfigError("worker id " + std::to_string(k) + " out of range");
  const auto ids = plan.part(k);
  const std::size_t expected = plan.mode() == PartitionMode::ByColumn ? mat.cols() : mat.rows();
  if (plan.total() != expected) throw DimensionError("plan was built for a different matrix");
  LocalBlock block{plan.mode() == PartitionMode::ByColumn ? mat.select_columns(ids)
                                                          : mat.select_rows(ids),
                   std::vector<Index>(ids.begin(), ids.end())};
  return block;
}

}  // namespace syncml
