#pragma once

// Independent reference computations for the tests. Everything here works on
// plain dense row-major arrays and shares no code with the library.

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

struct Dense {
  std::size_t m = 0, n = 0;
  std::vector<double> a;  // row-major m x n

  double at(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

inline std::vector<double> matvec(const Dense& d, const std::vector<double>& x) {
  std::vector<double> out(d.m, 0.0);
  for (std::size_t i = 0; i < d.m; ++i)
    for (std::size_t j = 0; j < d.n; ++j) out[i] += d.at(i, j) * x[j];
  return out;
}

inline std::vector<double> matvec_t(const Dense& d, const std::vector<double>& x) {
  std::vector<double> out(d.n, 0.0);
  for (std::size_t i = 0; i < d.m; ++i)
    for (std::size_t j = 0; j < d.n; ++j) out[j] += d.at(i, j) * x[i];
  return out;
}

inline double objective(const Dense& d, const std::vector<double>& y, double lambda,
                        const std::vector<double>& alpha) {
  const auto av = matvec(d, alpha);
  double loss = 0.0, reg = 0.0;
  for (std::size_t i = 0; i < d.m; ++i) loss += (av[i] - y[i]) * (av[i] - y[i]);
  for (double x : alpha) reg += x * x;
  return 0.5 * loss + 0.5 * lambda * reg;
}

// Gaussian elimination with partial pivoting on a square system.
inline std::vector<double> solve(std::vector<double> m, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(m[r * n + c]) > std::abs(m[piv * n + c])) piv = r;
    if (m[piv * n + c] == 0.0) throw std::runtime_error("singular system");
    if (piv != c) {
      for (std::size_t k = 0; k < n; ++k) std::swap(m[c * n + k], m[piv * n + k]);
      std::swap(b[c], b[piv]);
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = m[r * n + c] / m[c * n + c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) m[r * n + k] -= f * m[c * n + k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t k = r + 1; k < n; ++k) s -= m[r * n + k] * x[k];
    x[r] = s / m[r * n + r];
  }
  return x;
}

// argmin ½‖Aα − y‖² + (λ/2)‖α‖² from the normal equations (AᵀA + λI)α = Aᵀy.
inline std::vector<double> ridge_optimum(const Dense& d, const std::vector<double>& y,
                                         double lambda) {
  std::vector<double> g(d.n * d.n, 0.0);
  for (std::size_t i = 0; i < d.m; ++i)
    for (std::size_t j = 0; j < d.n; ++j)
      for (std::size_t k = 0; k < d.n; ++k) g[j * d.n + k] += d.at(i, j) * d.at(i, k);
  for (std::size_t j = 0; j < d.n; ++j) g[j * d.n + j] += lambda;
  return solve(std::move(g), matvec_t(d, y));
}

inline Dense random_dense(std::size_t m, std::size_t n, double density, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  Dense d{m, n, std::vector<double>(m * n, 0.0)};
  for (auto& x : d.a)
    if (u(rng) < density) x = g(rng);
  return d;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

inline double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(1.0, std::sqrt(den));
}

}  // namespace oracle
