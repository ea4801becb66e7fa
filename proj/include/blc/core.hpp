// Brascamp-Lieb data: linear maps, exponents, validation and numeric policy.
#pragma once

#include "blc/linalg.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace blc {

/// Malformed input: inconsistent shapes, counts or non-finite entries.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Tolerances and limits shared by every numerical routine.
struct NumericPolicy {
  double rank_tol = 1e-9;      // relative singular-value threshold
  double conv_tol = 1e-10;     // relative objective-change stopping threshold
  int max_iter = 100000;
  double diverge_norm = 1e12;  // magnitude declaring blow-up
  int grid_res = 400;          // default quadrature points per axis

  /// Throws std::invalid_argument unless every field is strictly positive.
  void check() const;
};

/// A linear map R^n -> R^{n_j}, stored as its n_j x n matrix.
class LinearMap {
 public:
  explicit LinearMap(Matrix rows);

  const Matrix& rows() const { return rows_; }
  int ambient_dim() const { return static_cast<int>(rows_.cols()); }
  int target_dim() const { return static_cast<int>(rows_.rows()); }
  /// n_j' = n - n_j, the dimension of the kernel of a surjective map.
  int kernel_dim() const { return ambient_dim() - target_dim(); }
  double norm() const { return operator_norm(rows_); }

 private:
  Matrix rows_;
};

/// The pair (L, p).  Construction checks shapes only; the mathematical
/// invariants (surjectivity, exponent range, trivial common kernel) are
/// reported by validate_datum so degenerate data can still be studied.
class BLDatum {
 public:
  BLDatum(int n, std::vector<LinearMap> maps, std::vector<double> exponents);

  int n() const { return n_; }
  int m() const { return static_cast<int>(maps_.size()); }
  const std::vector<LinearMap>& maps() const { return maps_; }
  const LinearMap& map(int j) const { return maps_.at(static_cast<std::size_t>(j)); }
  const std::vector<double>& exponents() const { return exponents_; }
  double p(int j) const { return exponents_.at(static_cast<std::size_t>(j)); }
  /// q_j = 1 / p_j.
  double q(int j) const { return 1.0 / p(j); }
  /// All maps stacked vertically: (sum n_j) x n.
  Matrix stacked() const;
  /// sum_j p_j n_j.
  double weighted_target_dim() const;
  /// max_j n_j.
  int max_target_dim() const;

  BLDatum with_maps(std::vector<LinearMap> maps) const {
    return BLDatum(n_, std::move(maps), exponents_);
  }

 private:
  int n_;
  std::vector<LinearMap> maps_;
  std::vector<double> exponents_;
};

struct Violation {
  std::string code;
  std::optional<int> j;
  std::string detail;
};

struct ValidationReport {
  bool ok = true;
  std::vector<Violation> violations;
  /// Non-fatal findings (p_j = 0).
  std::vector<Violation> warnings;
};

ValidationReport validate_datum(const BLDatum& datum, const NumericPolicy& policy);

/// Orthonormal n x (n - n_j) basis of ker L_j.
Matrix kernel_basis(const LinearMap& map, const NumericPolicy& policy);

/// Throws std::invalid_argument naming the first violation, if any.
void require_valid(const BLDatum& datum, const NumericPolicy& policy);

/// Throws std::invalid_argument if some p_j is not strictly positive.
void require_positive_exponents(const BLDatum& datum);

// Frequently used data.
namespace data {
/// Loomis-Whitney: the n coordinate-hyperplane projections, p_j = 1/(n-1).
BLDatum loomis_whitney(int n);
/// Young's convolution datum on R^2: [1 0], [0 1], [1 -1], p_j = 2/3.
BLDatum young2();
/// Hoelder: `count` identity maps on R^n with equal exponents summing to 1.
BLDatum holder(int n, int count);
/// Two rank-one rows on R^2 with p = (1, 1).
BLDatum rank_one_pair(const Vector& u, const Vector& v);
}  // namespace data

}  // namespace blc
