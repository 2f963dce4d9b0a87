#include "syncml/ridge.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "syncml/error.hpp"

namespace syncml {

namespace {

double sqnorm(std::span<const double> x) {
  return std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
}

double residual_sqnorm(std::span<const double> shared, std::span<const double> labels) {
  double s = 0.0;
  for (std::size_t i = 0; i < shared.size(); ++i) {
    const double r = shared[i] - labels[i];
    s += r * r;
  }
  return s;
}

// Σ_j c_j c_jᵀ over the columns of `m`, i.e. m mᵀ as a dense matrix.
Eigen::MatrixXd outer_gram(const SparseMatrix& m) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.rows()),
                                            static_cast<Eigen::Index>(m.rows()));
  for (std::size_t j = 0; j < m.cols(); ++j) {
    const auto c = m.column(j);
    for (std::size_t p = 0; p < c.nnz(); ++p)
      for (std::size_t q = 0; q <= p; ++q) g(c.rows[p], c.rows[q]) += c.values[p] * c.values[q];
  }
  return g.selfadjointView<Eigen::Lower>();
}

// (AᵀA + λI) x
void normal_apply(const RidgeProblem& p, std::span<const double> x, std::span<double> out,
                  std::vector<double>& scratch) {
  p.matrix().multiply(x, scratch);
  p.matrix().multiply_transpose(scratch, out);
  for (std::size_t j = 0; j < x.size(); ++j) out[j] += p.lambda() * x[j];
}

// Conjugate gradient on (AᵀA + λI)α = Aᵀy, warm-started from `alpha`.
void conjugate_gradient(const RidgeProblem& p, std::vector<double>& alpha, double abs_tol,
                        std::size_t max_iter) {
  const std::size_t n = p.dims();
  std::vector<double> scratch(p.samples()), r(n), d(n), q(n);
  p.matrix().multiply_transpose(p.labels(), r);
  normal_apply(p, alpha, q, scratch);
  for (std::size_t j = 0; j < n; ++j) r[j] -= q[j];
  d = r;
  double rr = sqnorm(r);
  for (std::size_t it = 0; it < max_iter && std::sqrt(rr) > abs_tol; ++it) {
    normal_apply(p, d, q, scratch);
    const double step = rr / std::inner_product(d.begin(), d.end(), q.begin(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      alpha[j] += step * d[j];
      r[j] -= step * q[j];
    }
    // Recompute the true residual now and then to keep rounding drift out.
    if (it % 50 == 49) {
      p.matrix().multiply_transpose(p.labels(), r);
      normal_apply(p, alpha, q, scratch);
      for (std::size_t j = 0; j < n; ++j) r[j] -= q[j];
    }
    const double rr_next = sqnorm(r);
    const double beta = rr_next / rr;
    rr = rr_next;
    for (std::size_t j = 0; j < n; ++j) d[j] = r[j] + beta * d[j];
  }
}

}  // namespace

RidgeProblem::RidgeProblem(Dataset data, double lambda) : data_(std::move(data)), lambda_(lambda) {
  if (!(lambda_ > 0.0) || !std::isfinite(lambda_)) throw ConfigError("lambda must be positive");
  if (data_.labels.size() != data_.features.rows())
    throw DimensionError("label count " + std::to_string(data_.labels.size()) +
                         " differs from sample count " + std::to_string(data_.features.rows()));
}

double objective_from_shared(std::span<const double> shared, std::span<const double> labels,
                             double lambda, double alpha_sqnorm) {
  if (shared.size() != labels.size()) throw DimensionError("shared vector length != m");
  return 0.5 * residual_sqnorm(shared, labels) + 0.5 * lambda * alpha_sqnorm;
}

double objective_value(const RidgeProblem& p, std::span<const double> alpha,
                       std::optional<std::span<const double>> shared) {
  if (alpha.size() != p.dims()) throw DimensionError("alpha length != n");
  if (shared) {
    if (shared->size() != p.samples()) throw DimensionError("shared vector length != m");
#ifndef NDEBUG
    std::vector<double> check(p.samples());
    p.matrix().multiply(alpha, check);
    for (std::size_t i = 0; i < check.size(); ++i)
      if (std::abs(check[i] - (*shared)[i]) > 1e-8 * std::max(1.0, std::abs(check[i])))
        throw DimensionError("supplied shared vector is not A·alpha");
#endif
    return objective_from_shared(*shared, p.labels(), p.lambda(), sqnorm(alpha));
  }
  std::vector<double> v(p.samples());
  p.matrix().multiply(alpha, v);
  return objective_from_shared(v, p.labels(), p.lambda(), sqnorm(alpha));
}

std::vector<double> gradient(const RidgeProblem& p, std::span<const double> alpha) {
  if (alpha.size() != p.dims()) throw DimensionError("alpha length != n");
  std::vector<double> v(p.samples());
  p.matrix().multiply(alpha, v);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= p.labels()[i];
  std::vector<double> g(p.dims());
  p.matrix().multiply_transpose(v, g);
  for (std::size_t j = 0; j < g.size(); ++j) g[j] += p.lambda() * alpha[j];
  return g;
}

double coordinate_gradient(SparseMatrix::Column c, std::span<const double> shared,
                           std::span<const double> labels, double lambda, double alpha_i) {
  double s = 0.0;
  for (std::size_t q = 0; q < c.nnz(); ++q) s += c.values[q] * (shared[c.rows[q]] - labels[c.rows[q]]);
  return s + lambda * alpha_i;
}

double coordinate_gradient(const RidgeProblem& p, std::size_t i, std::span<const double> shared,
                           double alpha_i) {
  if (i >= p.dims()) throw DimensionError("coordinate out of range");
  if (shared.size() != p.samples()) throw DimensionError("shared vector length != m");
  return coordinate_gradient(p.matrix().column(i), shared, p.labels(), p.lambda(), alpha_i);
}

std::vector<double> solve_exact(const RidgeProblem& p, const ExactSolveOptions& options) {
  const std::size_t m = p.samples();
  const std::size_t n = p.dims();
  std::vector<double> alpha(n, 0.0);
  if (n == 0) return alpha;

  std::vector<double> aty(n);
  p.matrix().multiply_transpose(p.labels(), aty);
  const double scale = std::max(1.0, std::sqrt(sqnorm(aty)));

  const bool dense = std::min(m, n) <= options.dense_cap;
  if (dense) {
    if (n <= m) {
      // (AᵀA + λI) α = Aᵀy
      Eigen::MatrixXd g = outer_gram(p.matrix().transposed());
      g.diagonal().array() += p.lambda();
      Eigen::Map<const Eigen::VectorXd> rhs(aty.data(), static_cast<Eigen::Index>(n));
      Eigen::Map<Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(n)) = g.llt().solve(rhs);
    } else {
      // α = Aᵀ (AAᵀ + λI)⁻¹ y
      Eigen::MatrixXd g = outer_gram(p.matrix());
      g.diagonal().array() += p.lambda();
      Eigen::Map<const Eigen::VectorXd> y(p.labels().data(), static_cast<Eigen::Index>(m));
      Eigen::VectorXd beta = g.llt().solve(y);
      p.matrix().multiply_transpose(std::span<const double>(beta.data(), m), alpha);
    }
  } else if (!options.allow_iterative) {
    throw ConfigError("problem exceeds the dense oracle cap (" + std::to_string(options.dense_cap) +
                      ") and iterative fallback is disabled");
  }

  const std::size_t max_iter =
      options.cg_max_iterations ? options.cg_max_iterations : 10 * n + 1000;
  const double tol = dense ? 1e-10 * scale : options.cg_relative_tolerance * scale;
  auto grad_norm = [&] {
    const auto g = gradient(p, alpha);
    return std::sqrt(sqnorm(g));
  };
  // The dense route is polished by a few CG steps when rounding left it short.
  if (!dense || grad_norm() > tol) conjugate_gradient(p, alpha, tol, max_iter);
  if (grad_norm() > 1e-8 * scale)
    throw Error("exact solve failed to reach stationarity (|grad| = " +
                std::to_string(grad_norm()) + ")");
  return alpha;
}

double optimal_objective(const RidgeProblem& p, const ExactSolveOptions& options) {
  return objective_value(p, solve_exact(p, options));
}

double relative_suboptimality(double objective, double f_star) {
  const double denom = std::max(1.0, std::abs(f_star));
  if (objective < f_star - 1e-6 * denom)
    throw OracleError("objective " + std::to_string(objective) + " below reference optimum " +
                      std::to_string(f_star));
  const double value = (objective - f_star) / denom;
  // Gaps within a few ulps of the objective are rounding noise of its evaluation.
  const double noise =
      16 * std::numeric_limits<double>::epsilon() * std::max(std::abs(objective), std::abs(f_star)) / denom;
  return value >= -1e-10 && value <= noise ? 0.0 : value;
}

Suboptimality suboptimality(const RidgeProblem& p, std::span<const double> alpha, double f_star) {
  return {relative_suboptimality(objective_value(p, alpha), f_star), f_star};
}

}  // namespace syncml
