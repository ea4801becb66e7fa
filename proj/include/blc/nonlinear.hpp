// Nonlinear Brascamp-Lieb probes: functions that are essentially constant at
// scale delta, Poisson smoothing, integrals of prod_j (f_j o B_j)^{p_j} for
// smooth submersions B_j, and the Taylor linearisation of B_j on small cubes.
#pragma once

#include "blc/core.hpp"
#include "blc/kakeya.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace blc {

/// Axis-parallel box [lo, hi].
struct Box {
  Vector lo;
  Vector hi;

  static Box cube(int dim, double half_width);
  int dim() const { return static_cast<int>(lo.size()); }
  double volume() const { return (hi - lo).prod(); }
  bool contains(const Vector& x, double slack = 0.0) const;
};

/// Nonnegative samples on the nodes lo + i h, i in [0, shape_d) per axis.
/// Off-grid values are multilinear interpolants.  The last axis varies
/// fastest in `values`.
class GridFunction {
 public:
  GridFunction(Vector lo, double spacing, std::vector<int> shape);
  /// Nodes covering `box` with the given spacing, all values zero.
  static GridFunction zeros(const Box& box, double spacing);
  static GridFunction sample(const Box& box, double spacing,
                             const std::function<double(const Vector&)>& f);

  int dim() const { return static_cast<int>(lo_.size()); }
  double spacing() const { return h_; }
  const Vector& lo() const { return lo_; }
  Vector hi() const;
  Box box() const { return {lo_, hi()}; }
  const std::vector<int>& shape() const { return shape_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }
  double operator[](std::size_t i) const { return values_(static_cast<Eigen::Index>(i)); }
  double& operator[](std::size_t i) { return values_(static_cast<Eigen::Index>(i)); }

  std::vector<int> multi_index(std::size_t flat) const;
  std::size_t flat_index(const std::vector<int>& idx) const;
  Vector node(std::size_t flat) const;
  /// Nearest node to x, clamped to the grid.
  std::size_t nearest(const Vector& x) const;

  /// Multilinear interpolant at x.  Throws std::out_of_range outside the box.
  double operator()(const Vector& x) const;
  /// Riemann sum h^d sum values, which is also the exact integral of the
  /// interpolant when the boundary values vanish.
  double mass() const;
  /// The nodes lying in `box`.
  GridFunction window(const Box& box) const;

  /// Throws std::invalid_argument on a negative or non-finite value.
  void check() const;

 private:
  Vector lo_;
  double h_;
  std::vector<int> shape_;
  std::vector<std::size_t> stride_;
  Eigen::VectorXd values_;
};

struct DeltaPair {
  Vector x;
  Vector y;
  double ratio = 1.0;  // max(f(x)/f(y), f(y)/f(x)); +inf for a zero/nonzero pair
};

struct DeltaClassReport {
  bool member = true;
  DeltaPair worst_pair;
  long long pairs_checked = 0;
};

/// Checks f(y)/2 <= f(x) <= 2 f(y) over every pair of nodes at distance <= delta.
/// Requires delta >= spacing.
DeltaClassReport l1delta_check(const GridFunction& f, double delta);

/// c_d t / (t^2 + |x|^2)^{(d+1)/2} with c_d = Gamma((d+1)/2) / pi^{(d+1)/2}.
double poisson_kernel(int d, double t, double r);

/// Discrete convolution with P_t truncated at radius 40 t and renormalised to
/// unit discrete mass.  The output grid extends the input by the truncation
/// radius on every side, so the discrete mass is preserved.
GridFunction poisson_smooth(const GridFunction& f, double t);

/// Largest ratio P_t(x) / P_t(y) over |x - y| <= delta, for t = c delta in
/// dimension d.  Depends on c and d only.
double poisson_ratio_bound(int d, double c);

/// Smallest c with poisson_ratio_bound(d, c) <= 2, by bisection.
double poisson_sufficient_constant(int d);

/// B: R^n -> R^{n_j}, B_i(x) = (L x)_i + x^T Q_i x / 2, with dB(0) = L.
class Submersion {
 public:
  static Submersion linear(const LinearMap& map);
  /// One symmetric n x n matrix per output coordinate.
  static Submersion quadratic(const LinearMap& map, std::vector<Matrix> hessians);

  int ambient_dim() const { return static_cast<int>(linear_.cols()); }
  int target_dim() const { return static_cast<int>(linear_.rows()); }
  const std::string& family() const { return family_; }
  const Matrix& linear_part() const { return linear_; }
  const std::vector<Matrix>& hessians() const { return hessians_; }

  Vector operator()(const Vector& x) const;
  Matrix derivative(const Vector& x) const;

 private:
  Submersion(std::string family, Matrix linear, std::vector<Matrix> hessians);
  std::string family_;
  Matrix linear_;
  std::vector<Matrix> hessians_;
};

/// The submersions of a datum with no quadratic part.
std::vector<Submersion> linear_submersions(const BLDatum& datum);

/// Points of `box` on a uniform lattice with `per_axis` points per axis,
/// corners included.
std::vector<Vector> lattice_points(const Box& box, int per_axis);

/// Largest ||dB(x) - dB(0)|| (operator 2-norm) over a 17^n lattice of U.
double derivative_drift(const Submersion& b, const Box& u);

/// Smallest singular value of dB(x) over a 17^n lattice of U; zero means
/// B fails to be a submersion somewhere on U.
double min_singular_value(const Submersion& b, const Box& u);

/// Bounding box of B(U) from a 17^n lattice, padded by `pad`.
Box image_box(const Submersion& b, const Box& u, double pad);

/// Midpoint rule on `grid.resolution` points per axis of U for
/// int_U prod_j f_j(B_j(x))^{p_j}.  Throws std::out_of_range when some B_j(x)
/// leaves the box of f_j.
double nonlinear_lhs(const std::vector<Submersion>& b, const std::vector<GridFunction>& f,
                     const std::vector<double>& p, const Box& u, const GridSpec& grid);

struct SweepOptions {
  int draws = 8;
  int max_atoms = 5;
  double smoothing_constant = 0.0;  // c in P_{c delta}; 0 selects the sufficient constant
  double cells_per_delta = 8.0;     // grid spacing delta / cells_per_delta
  double drift_limit = 0.05;
  GridSpec grid{};
};

struct SweepRow {
  double delta = 0.0;
  int draw = 0;
  double ratio = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<double> deltas;
  std::vector<double> max_ratio;  // per delta
  /// Least-squares slope of log(max ratio) against log log(1/delta).
  double slope = 0.0;
  double smoothing_constant = 0.0;  // largest c used
};

/// Random inputs f_j = P_{c delta} * (1..max_atoms atoms placed in B_j(U)),
/// one set per draw, and the ratio nonlinear_lhs / prod_j (int f_j)^{p_j}.
/// Throws std::invalid_argument when the derivative drift on U exceeds
/// options.drift_limit.
SweepResult nonlinear_ratio_sweep(const std::vector<Submersion>& b, const BLDatum& datum,
                                  const Box& u, const std::vector<double>& deltas,
                                  std::uint64_t seed, const SweepOptions& options = {});

/// sup over a 17^n lattice of the cube of |B(x) - B(c) - dB(c)(x - c)|.
double linearization_defect(const Submersion& b, const Vector& center, double side);

/// Least-squares slope of ys against xs.
double regression_slope(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace blc
