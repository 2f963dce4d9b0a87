#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "syncml/dataset.hpp"

namespace syncml {

// F(α) = ½‖Aα − y‖² + (λ/2)‖α‖², with no 1/m factor on the loss.
class RidgeProblem {
 public:
  RidgeProblem(Dataset data, double lambda);

  const Dataset& data() const { return data_; }
  const SparseMatrix& matrix() const { return data_.features; }
  std::span<const double> labels() const { return data_.labels; }
  double lambda() const { return lambda_; }
  std::size_t samples() const { return data_.samples(); }
  std::size_t dims() const { return data_.dims(); }

 private:
  Dataset data_;
  double lambda_;
};

// F(α). When `shared` is supplied it must equal Aα and the matrix product is
// skipped; debug builds verify that.
double objective_value(const RidgeProblem& p, std::span<const double> alpha,
                       std::optional<std::span<const double>> shared = std::nullopt);

// F from the shared vector v = Aα and Σα², the quantities the coordinator holds.
double objective_from_shared(std::span<const double> shared, std::span<const double> labels,
                             double lambda, double alpha_sqnorm);

// ∇F(α) = Aᵀ(Aα − y) + λα.
std::vector<double> gradient(const RidgeProblem& p, std::span<const double> alpha);

// ∂F/∂α_i = c_iᵀ(v − y) + λα_i, evaluated at the shared vector v = Aα.
double coordinate_gradient(SparseMatrix::Column c, std::span<const double> shared,
                           std::span<const double> labels, double lambda, double alpha_i);
double coordinate_gradient(const RidgeProblem& p, std::size_t i, std::span<const double> shared,
                           double alpha_i);

struct ExactSolveOptions {
  // Dense Cholesky is used when min(m, n) is at most this; otherwise
  // conjugate gradient on the normal equations.
  std::size_t dense_cap = 2048;
  bool allow_iterative = true;
  double cg_relative_tolerance = 1e-12;
  std::size_t cg_max_iterations = 0;  // 0: 10·n + 1000
};

// α* = argmin F. Guarantees ‖∇F(α*)‖ ≤ 1e-8·max(1, ‖Aᵀy‖).
std::vector<double> solve_exact(const RidgeProblem& p, const ExactSolveOptions& options = {});

// F* = F(solve_exact(p)).
double optimal_objective(const RidgeProblem& p, const ExactSolveOptions& options = {});

struct Suboptimality {
  double value;
  double reference_optimum;
};

// (F − F*)/max(1, |F*|); values in [−1e-10, 16 ulps of the objective] read
// as 0 (rounding noise). OracleError when F < F* − 1e-6·max(1, |F*|).
double relative_suboptimality(double objective, double f_star);
Suboptimality suboptimality(const RidgeProblem& p, std::span<const double> alpha, double f_star);

}  // namespace syncml
