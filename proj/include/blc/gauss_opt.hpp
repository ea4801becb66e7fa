// Lieb's Gaussian quotient and its maximisation.
//
// For positive-definite A_j the quotient is
//
//   Q(A) = prod_j det(A_j)^{p_j/2} / det(M + G)^{1/2},   M = sum_j p_j L_j^T A_j L_j,
//
// with G = 0 (global constant), G = I (unit-ball localisation) or an
// arbitrary positive semi-definite G (partial localisation).  The BL constant
// is the supremum of Q over all inputs.
#pragma once

#include "blc/core.hpp"
#include "blc/random.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace blc {

/// One positive-definite n_j x n_j matrix per map.
struct GaussianInput {
  std::vector<Matrix> blocks;

  static GaussianInput identity(const BLDatum& datum);
  static GaussianInput random(const BLDatum& datum, Rng& rng, double spread = 1.0);
  GaussianInput scaled(double t) const;
  /// Throws std::invalid_argument if a block is not SPD or has the wrong size.
  void check(const BLDatum& datum) const;
};

enum class LocalizationKind { global, unit_ball, partial };

class LocalizationMode {
 public:
  static LocalizationMode global() { return LocalizationMode(LocalizationKind::global, {}); }
  static LocalizationMode unit_ball() {
    return LocalizationMode(LocalizationKind::unit_ball, {});
  }
  /// G must be symmetric positive semi-definite.
  static LocalizationMode partial(Matrix g);

  LocalizationKind kind() const { return kind_; }
  /// The weight matrix G as an n x n matrix.
  Matrix weight(int n) const;
  std::string name() const;

 private:
  LocalizationMode(LocalizationKind k, Matrix g) : kind_(k), g_(std::move(g)) {}
  LocalizationKind kind_;
  Matrix g_;
};

struct QuotientBreakdown {
  Matrix M;
  double log_numerator = 0.0;
  double log_denominator = 0.0;
  double log_quotient = 0.0;
  /// False when M + G is numerically singular; log_quotient is then +inf.
  bool finite = true;
  std::string note;

  double quotient() const;
};

QuotientBreakdown lieb_quotient(const BLDatum& datum, const GaussianInput& a,
                                const LocalizationMode& mode);

/// d/dA_j log Q = (p_j/2) (A_j^{-1} - L_j (M+G)^{-1} L_j^T).
std::vector<Matrix> gradient_log_quotient(const BLDatum& datum, const GaussianInput& a,
                                          const LocalizationMode& mode);

/// Raised when L_j (M+G)^{-1} L_j^T is singular, i.e. the update blows up.
class BlowUpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A_j <- (1 - damping) A_j + damping (L_j (M+G)^{-1} L_j^T)^{-1}.
GaussianInput fixed_point_step(const BLDatum& datum, const GaussianInput& a,
                               const LocalizationMode& mode, double damping = 1.0);

enum class OptimizerStatus { converged, boundary_plateau, diverging };
std::string to_string(OptimizerStatus s);

struct OptimizerResult {
  OptimizerStatus status = OptimizerStatus::converged;
  /// Quotient value (not its log); +inf when diverging.
  double value = 0.0;
  double log_value = 0.0;
  int iterations = 0;
  GaussianInput final_input;
  /// Scale-invariant gradient norm sqrt(sum_j ||A_j^{1/2} grad_j A_j^{1/2}||_F^2).
  double grad_norm = 0.0;
  /// Largest of ||A_j|| and ||A_j^{-1}|| at the final iterate.
  double magnitude = 0.0;
  /// Number of accepted steps whose plain (undamped) update decreased the objective.
  int nonmonotone_plain_steps = 0;
};

/// The iteration cap was reached before the run could be classified, or
/// multi-start runs disagreed.
class UndeterminedError : public std::runtime_error {
 public:
  UndeterminedError(const std::string& what, std::vector<double> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  /// log-quotient history of the run.
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

/// Maximises the quotient by the stationarity iteration A_j <- (L_j (M+G)^{-1} L_j^T)^{-1}.
///
/// Steps are taken along the affine-invariant geodesic from A_j towards the
/// update, with length lambda: halved whenever the objective would decrease,
/// doubled while consecutive steps point the same way (so escapes to the
/// boundary take logarithmically many iterations), lambda = 1 being the plain
/// update.  Global-mode iterates are rescaled to det(M) = 1, which leaves the
/// quotient unchanged under the scaling condition.
OptimizerResult compute_bl(const BLDatum& datum, const LocalizationMode& mode,
                           const NumericPolicy& policy,
                           const GaussianInput* start = nullptr);

/// Runs compute_bl from the identity and `starts - 1` random inputs in
/// parallel.  Returns the best run (ties to the lowest start index).  Throws
/// UndeterminedError if finite runs disagree by more than 1e-4 relative.
OptimizerResult compute_bl_multistart(const BLDatum& datum, const LocalizationMode& mode,
                                      const NumericPolicy& policy, int starts,
                                      std::uint64_t seed);

/// 1 / |u_1 v_2 - u_2 v_1| for two rows u, v on R^2 with p = (1, 1); +inf if
/// the determinant is below rank_tol.
double rank_one_2d_oracle(const BLDatum& datum, double rank_tol = 1e-9);

}  // namespace blc
