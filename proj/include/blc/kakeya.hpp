// Tube-overlap experiments for the multilinear Kakeya form of the
// Brascamp-Lieb inequality, and the induction-on-scales constant.
//
// A tube of width delta around an affine subspace c + span(D) is the set of
// points at Euclidean distance <= delta from it, so its cross-section has
// thickness 2 delta.
#pragma once

#include "blc/core.hpp"

#include <cstdint>
#include <vector>

namespace blc {

struct Tube {
  Vector center;
  Matrix directions;  // n x n_j', orthonormal columns
  double width = 0.0;
  int j = 0;

  bool contains(const Vector& x) const;
};

struct TubeFamily {
  std::vector<Tube> tubes;
  double nu = 0.0;
  Matrix reference_kernel;
  int j = 0;

  /// Largest Grassmann distance from a tube direction to the reference kernel.
  double max_direction_distance() const;
};

struct GridSpec {
  int resolution = 400;  // midpoints per axis of [-1, 1]^n

  void check() const;
};

struct KakeyaResult {
  double lhs = 0.0;
  double rhs_base = 0.0;  // delta^n prod (#T_j)^{p_j}
  double ratio = 0.0;
};

/// Midpoint-rule value of the integral over [-1,1]^n of prod_j (number of
/// tubes of family j containing x)^{p_j}.
double kakeya_lhs(const std::vector<TubeFamily>& families, const std::vector<double>& p,
                  const GridSpec& grid);

/// kakeya_lhs against delta^n prod (#T_j)^{p_j}; every tube must share one width.
KakeyaResult kakeya_ratio(const std::vector<TubeFamily>& families, const std::vector<double>& p,
                          const GridSpec& grid);

/// One family per map: kernel bases tilted by Gaussian noise of scale nu,
/// re-orthonormalised and rejected when farther than nu from ker L_j;
/// centres uniform in [-1,1]^n.
std::vector<TubeFamily> random_families(const BLDatum& datum, double delta, double nu,
                                        const std::vector<int>& counts, std::uint64_t seed,
                                        const NumericPolicy& policy = {});

/// Same cores, widths delta + factor * delta / nu.
TubeFamily coarsen_tubes(const TubeFamily& family, double factor, double nu);

struct KappaTrial {
  int trial = 0;
  double delta = 0.0;
  double lhs = 0.0;
  double ratio = 0.0;
};

struct KappaResult {
  double c_fine = 0.0;
  double c_coarse = 0.0;
  double kappa_hat = 0.0;
  std::vector<KappaTrial> rows;  // fine and coarse rows per trial
};

/// Largest ratio over `trials` random configurations at width delta and,
/// with the same cores, at width delta / nu.
KappaResult measure_kappa(const BLDatum& datum, double delta, double nu, int trials,
                          const std::vector<int>& counts, const GridSpec& grid, std::uint64_t seed,
                          const NumericPolicy& policy = {});

/// Greedy complete-linkage clustering of tube directions into sub-families of
/// Grassmann diameter <= nu.  Each sub-family uses its first tube's direction
/// as reference.
std::vector<TubeFamily> partition_by_direction(const TubeFamily& family, double nu);

}  // namespace blc
