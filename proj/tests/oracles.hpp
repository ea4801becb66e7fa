// Test-only oracles.  Each one recomputes a quantity by a route that does not
// share code with the library function it checks.
#pragma once

#include "blc/gauss_opt.hpp"
#include "blc/random.hpp"

#include <cmath>

namespace blc::oracle {

/// Young datum ([1 0], [0 1], [1 -1], p = 2/3) at diagonal inputs, by the
/// hand-expanded determinant det M = p^2 (a1 a2 + a1 a3 + a2 a3).
inline double young_diagonal_quotient(double a1, double a2, double a3) {
  const double p = 2.0 / 3.0;
  const double det = p * p * (a1 * a2 + a1 * a3 + a2 * a3);
  return std::pow(a1 * a2 * a3, p / 2.0) / std::sqrt(det);
}

/// Exhaustive search over a log grid of diagonal inputs (a3 = 1 by scale
/// invariance), a1, a2 in [1e-3, 1e3].
inline double young_grid_search(int points = 601) {
  double best = 0.0;
  for (int i = 0; i < points; ++i)
    for (int k = 0; k < points; ++k) {
      const double a1 = std::pow(10.0, -3.0 + 6.0 * i / (points - 1));
      const double a2 = std::pow(10.0, -3.0 + 6.0 * k / (points - 1));
      best = std::max(best, young_diagonal_quotient(a1, a2, 1.0));
    }
  return best;
}

/// Random datum on R^n with m maps whose stack has full rank, exponents in (0.1, 1].
inline BLDatum random_datum(Rng& rng, int n, int m) {
  std::vector<LinearMap> maps;
  std::vector<double> p;
  int total = 0;
  for (int j = 0; j < m; ++j) {
    int nj = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    if (j == m - 1 && total + nj < n) nj = n;
    total += nj;
    maps.emplace_back(rng.gaussian(nj, n));
    p.push_back(rng.uniform(0.1, 1.0));
  }
  return BLDatum(n, std::move(maps), std::move(p));
}

/// log Q by an independent dense evaluation (determinants via LU).
inline double log_quotient_direct(const BLDatum& d, const GaussianInput& a, const Matrix& g) {
  Matrix m = g;
  double num = 0.0;
  for (int j = 0; j < d.m(); ++j) {
    const Matrix& b = a.blocks[static_cast<std::size_t>(j)];
    m += d.p(j) * d.map(j).rows().transpose() * b * d.map(j).rows();
    num += 0.5 * d.p(j) * std::log(b.determinant());
  }
  return num - 0.5 * std::log(m.determinant());
}

/// Worst relative mismatch between the analytic gradient and central
/// differences of log Q along a few random symmetric directions.
inline double gradient_fd_relative_error(const BLDatum& d, const GaussianInput& a,
                                         const LocalizationMode& mode,
                                         const std::vector<Matrix>& grad, Rng& rng,
                                         double step) {
  const Matrix g = mode.weight(d.n());
  double worst = 0.0;
  for (int dir = 0; dir < 3; ++dir) {
    GaussianInput plus = a, minus = a;
    double analytic = 0.0, scale = 0.0;
    for (std::size_t j = 0; j < a.blocks.size(); ++j) {
      Matrix e = rng.gaussian(a.blocks[j].rows(), a.blocks[j].cols());
      e = 0.5 * (e + e.transpose());
      e /= std::max(1.0, e.norm());
      plus.blocks[j] += step * e;
      minus.blocks[j] -= step * e;
      analytic += (grad[j].array() * e.array()).sum();
      scale += grad[j].norm() * e.norm();
    }
    const double fd =
        (log_quotient_direct(d, plus, g) - log_quotient_direct(d, minus, g)) / (2.0 * step);
    worst = std::max(worst, std::abs(fd - analytic) / std::max(scale, 1e-3));
  }
  return worst;
}

}  // namespace blc::oracle
