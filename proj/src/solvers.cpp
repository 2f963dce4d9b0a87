#include "syncml/solvers.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "syncml/error.hpp"
#include "syncml/ridge.hpp"

namespace syncml {

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::CoCoA:
      return "cocoa";
    case Algorithm::MiniBatchScd:
      return "mb-scd";
    case Algorithm::MiniBatchSgd:
      return "mb-sgd";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "cocoa") return Algorithm::CoCoA;
  if (name == "mb-scd") return Algorithm::MiniBatchScd;
  if (name == "mb-sgd") return Algorithm::MiniBatchSgd;
  throw ConfigError("unknown algorithm '" + std::string(name) + "' (cocoa, mb-scd, mb-sgd)");
}

PartitionMode partition_mode(Algorithm a) {
  return a == Algorithm::MiniBatchSgd ? PartitionMode::ByRow : PartitionMode::ByColumn;
}

WorkerState::WorkerState(PartitionMode mode, SparseMatrix units, std::vector<Index> ids,
                         std::vector<double> y_local, std::uint64_t seed)
    : mode_(mode),
      units_(std::move(units)),
      global_ids_(std::move(ids)),
      sqnorms_(units_.column_sqnorms()),
      y_local_(std::move(y_local)),
      alpha_(mode == PartitionMode::ByColumn ? units_.cols() : 0, 0.0),
      order_(units_.cols()),
      rng_(seed) {
  std::iota(order_.begin(), order_.end(), Index{0});
}

WorkerState WorkerState::for_columns(LocalBlock block, std::uint64_t seed) {
  if (block.global_ids.size() != block.matrix.cols())
    throw DimensionError("local block ids do not match its columns");
  return WorkerState(PartitionMode::ByColumn, std::move(block.matrix), std::move(block.global_ids),
                     {}, seed);
}

WorkerState WorkerState::for_rows(LocalBlock block, std::span<const double> labels,
                                  std::uint64_t seed) {
  if (block.global_ids.size() != block.matrix.rows())
    throw DimensionError("local block ids do not match its rows");
  std::vector<double> y;
  y.reserve(block.global_ids.size());
  for (Index i : block.global_ids) {
    if (i >= labels.size()) throw DimensionError("sample id beyond label vector");
    y.push_back(labels[i]);
  }
  return WorkerState(PartitionMode::ByRow, block.matrix.transposed(), std::move(block.global_ids),
                     std::move(y), seed);
}

double WorkerState::alpha_sqnorm() const {
  return std::inner_product(alpha_.begin(), alpha_.end(), alpha_.begin(), 0.0);
}

void WorkerState::commit_staged() {
  for (const auto& [i, value] : staged_) alpha_[i] = value;
  staged_.clear();
}

double WorkerState::alpha_sqnorm_after_commit() const {
  if (staged_.empty()) return alpha_sqnorm();
  std::vector<double> next = alpha_;
  for (const auto& [i, value] : staged_) next[i] = value;
  return std::inner_product(next.begin(), next.end(), next.begin(), 0.0);
}

std::size_t WorkerState::sample_uniform() {
  std::uniform_int_distribution<std::size_t> pick(0, local_count() - 1);
  return pick(rng_);
}

std::span<const Index> WorkerState::sample_without_replacement(std::size_t h) {
  h = std::min(h, order_.size());
  for (std::size_t s = 0; s < h; ++s) {
    std::uniform_int_distribution<std::size_t> pick(s, order_.size() - 1);
    std::swap(order_[s], order_[pick(rng_)]);
  }
  return std::span<const Index>(order_).first(h);
}

std::span<const double> LocalUpdate::delta_v() const {
  if (kind != UpdateKind::SharedVector) throw ProtocolError("update carries a gradient, not Δv");
  return values;
}

std::span<const double> LocalUpdate::partial_gradient() const {
  if (kind != UpdateKind::Gradient) throw ProtocolError("update carries Δv, not a gradient");
  return values;
}

namespace {

void require_column_mode(const WorkerState& w, std::span<const double> shared,
                         std::span<const double> labels) {
  if (w.mode() != PartitionMode::ByColumn)
    throw ConfigError("coordinate solvers need a column-partitioned worker");
  if (shared.size() != w.units().rows() || labels.size() != w.units().rows())
    throw DimensionError("shared vector / labels must have length m");
}

}  // namespace

LocalUpdate cocoa_local_scd(WorkerState& w, const CocoaParams& params,
                            std::span<const double> shared, std::span<const double> labels,
                            std::size_t h) {
  require_column_mode(w, shared, labels);
  const std::size_t m = shared.size();
  LocalUpdate update{UpdateKind::SharedVector, std::vector<double>(m, 0.0), 0, false};
  if (h == 0 || w.local_count() == 0) {
    update.flagged = true;
    return update;
  }

  const double lambda = params.lambda;
  const double sigma = params.sigma_prime;
  auto alpha = w.alpha_local();
  const auto sq = w.column_sqnorms();
  const auto& units = w.units();

  // residual = y − v − σ′Δv_k, maintained alongside Δv_k.
  std::vector<double> residual(m);
  for (std::size_t i = 0; i < m; ++i) residual[i] = labels[i] - shared[i];
  std::vector<double> before;
  if (params.gamma != 1.0) before.assign(alpha.begin(), alpha.end());

  auto& dv = update.values;
  for (std::size_t step = 0; step < h; ++step) {
    const std::size_t i = w.sample_uniform();
    const auto c = units.column(i);
    const double delta = (dot(c, residual) - lambda * alpha[i]) / (sigma * sq[i] + lambda);
    alpha[i] += delta;
    for (std::size_t p = 0; p < c.nnz(); ++p) {
      const double d = delta * c.values[p];
      dv[c.rows[p]] += d;
      residual[c.rows[p]] -= sigma * d;
    }
  }
  if (params.gamma != 1.0)
    for (std::size_t i = 0; i < alpha.size(); ++i)
      alpha[i] = before[i] + params.gamma * (alpha[i] - before[i]);
  update.steps_done = h;
  return update;
}

LocalUpdate minibatch_scd_local(WorkerState& w, const MiniBatchParams& params,
                                std::span<const double> shared, std::span<const double> labels,
                                std::size_t h) {
  require_column_mode(w, shared, labels);
  if (w.has_staged()) throw ProtocolError("previous mini-batch was neither committed nor discarded");
  LocalUpdate update{UpdateKind::SharedVector, std::vector<double>(shared.size(), 0.0), 0, false};
  const std::size_t batch = std::min(h, w.local_count());
  update.flagged = batch != h || h == 0;

  const auto alpha = w.alpha_local();
  const auto& units = w.units();
  // alpha_local is untouched until commit, so every g_i sees the same α.
  for (Index i : w.sample_without_replacement(batch)) {
    const auto c = units.column(i);
    const double g = coordinate_gradient(c, shared, labels, params.lambda, alpha[i]);
    axpy(-params.gamma * g, c, update.values);
    w.stage(i, alpha[i] - params.gamma * g);
  }
  update.steps_done = batch;
  return update;
}

LocalUpdate sgd_subset_gradient(const WorkerState& w, std::span<const double> alpha,
                                std::span<const Index> subset) {
  if (w.mode() != PartitionMode::ByRow)
    throw ConfigError("mini-batch SGD needs a row-partitioned worker");
  if (alpha.size() != w.units().rows()) throw DimensionError("alpha must have length n");
  LocalUpdate update{UpdateKind::Gradient, std::vector<double>(alpha.size(), 0.0), 0, false};
  if (subset.empty()) return update;

  const double scale = static_cast<double>(w.local_count()) / static_cast<double>(subset.size());
  const auto y = w.y_local();
  for (Index i : subset) {
    if (i >= w.local_count()) throw DimensionError("sample id beyond the local block");
    const auto r = w.units().column(i);
    axpy(scale * (dot(r, alpha) - y[i]), r, update.values);
  }
  update.steps_done = subset.size();
  return update;
}

LocalUpdate minibatch_sgd_local(WorkerState& w, std::span<const double> alpha, std::size_t h) {
  if (w.mode() != PartitionMode::ByRow)
    throw ConfigError("mini-batch SGD needs a row-partitioned worker");
  const std::size_t batch = std::min(h, w.local_count());
  auto update = sgd_subset_gradient(w, alpha, w.sample_without_replacement(batch));
  update.flagged = batch != h || h == 0;
  return update;
}

}  // namespace syncml
