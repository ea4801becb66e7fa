// Seeded randomness.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard.  The standard distributions are not, so uniforms are built from
// the top 53 bits and normals by Box-Muller.  Sub-streams for parallel work
// are derived with SplitMix64 from (master seed, index), which makes every
// sample independent of scheduling and makes prefixes of sample sets nested.
#pragma once

#include "blc/linalg.hpp"

#include <cstdint>
#include <random>

namespace blc {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  /// Independent generator for sub-task `index`.
  Rng stream(std::uint64_t index) const { return Rng(derive_seed(seed_, index)); }

  /// Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

  Matrix gaussian(Eigen::Index rows, Eigen::Index cols) {
    Matrix g(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = normal();
    return g;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Haar-distributed n x k matrix with orthonormal columns (QR of a Gaussian
/// matrix with the sign of diag(R) fixed positive).
inline Matrix random_stiefel(Rng& rng, Eigen::Index n, Eigen::Index k) {
  if (k == 0) return Matrix(n, 0);
  Matrix g = rng.gaussian(n, k);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, k);
  const Matrix& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < k; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

/// Random SPD matrix exp(S) with S symmetric Gaussian scaled by `spread`.
inline Matrix random_spd(Rng& rng, Eigen::Index n, double spread = 1.0) {
  Matrix s = rng.gaussian(n, n);
  s = 0.5 * spread * (s + s.transpose()) / std::sqrt(2.0);
  return spectral_apply(s, [](double x) { return std::exp(x); });
}

}  // namespace blc
