// Scaling, dimension and codimension conditions, and a search for subspaces
// that violate them.
//
// The conditions quantify over every subspace of R^n, so the search below is
// sound only in one direction: a reported witness is a genuine violation, while
// "no violation found" is not a proof of finiteness.
#pragma once

#include "blc/core.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace blc {

/// A subspace of R^n given by an orthonormal basis (n x k).
class Subspace {
 public:
  explicit Subspace(Matrix orthonormal_basis);
  /// Orthonormal basis of the span of arbitrary vectors.
  static Subspace span(const Matrix& vectors, double rank_tol);
  static Subspace zero(int n) { return Subspace(Matrix(n, 0)); }
  static Subspace whole(int n) { return Subspace(Matrix::Identity(n, n)); }

  const Matrix& basis() const { return basis_; }
  int dim() const { return static_cast<int>(basis_.cols()); }
  int ambient_dim() const { return static_cast<int>(basis_.rows()); }
  int codim() const { return ambient_dim() - dim(); }
  Matrix projector() const { return basis_ * basis_.transpose(); }
  bool contains(const Subspace& other, double tol) const;

 private:
  Matrix basis_;
};

Subspace subspace_sum(const Subspace& a, const Subspace& b, double rank_tol);
Subspace subspace_intersection(const Subspace& a, const Subspace& b, double rank_tol);

/// A positive semi-definite weight G together with an orthonormal basis of H_0 = ker G.
struct PartialLocalization {
  Matrix G;
  Matrix H0_basis;

  static PartialLocalization from_weight(const Matrix& g, const NumericPolicy& policy);
  /// Orthogonal projection onto (ker G)^perp.
  Matrix normalized_projection() const;
};

enum class Verdict { witnessed_infinite, no_violation_found, certified_finite_special_case };
enum class SearchMethod { kernel_lattice, coordinate, random_search };
enum class FinitenessMode { global, localized };

std::string to_string(Verdict v);
std::string to_string(SearchMethod m);

struct FinitenessReport {
  double scaling_slack = 0.0;
  Verdict verdict = Verdict::no_violation_found;
  double min_slack = 0.0;
  /// Present exactly when the verdict is witnessed_infinite.
  std::optional<Subspace> witness;
  /// Subspace attaining min_slack (whether or not it violates).
  std::optional<Subspace> argmin;
  SearchMethod method = SearchMethod::kernel_lattice;
  /// Which condition min_slack refers to: "dimension", "codimension" or "scaling".
  std::string condition;
  int candidates = 0;
};

nlohmann::json to_json(const FinitenessReport& report);

/// sum_j p_j n_j - n.
double check_scaling(const BLDatum& datum);

/// sum_j p_j dim(L_j V) - dim V.
double dimension_slack(const BLDatum& datum, const Subspace& v, const NumericPolicy& policy);

/// (n - dim V) - sum_j p_j (n_j - dim(L_j V)).
double codimension_slack(const BLDatum& datum, const Subspace& v, const NumericPolicy& policy);

/// Closure of `generators` under sums and intersections, with {0} and R^n,
/// capped at `cap` distinct subspaces.
std::vector<Subspace> lattice_closure(const std::vector<Subspace>& generators,
                                      const NumericPolicy& policy, std::size_t cap = 4096);

/// Searches kernel-lattice, coordinate (n <= 12) and `budget` random subspaces
/// per dimension for the smallest slack of the dimension condition (global
/// mode, together with the scaling condition) or the codimension condition
/// (localized mode).
FinitenessReport search_critical_subspaces(const BLDatum& datum, FinitenessMode mode,
                                           int budget, std::uint64_t seed,
                                           const NumericPolicy& policy = {});

/// Partially localised conditions: the dimension condition over V inside H_0
/// and the codimension condition over all V.
FinitenessReport check_partial(const BLDatum& datum, const PartialLocalization& loc, int budget,
                               std::uint64_t seed, const NumericPolicy& policy = {});

}  // namespace blc
