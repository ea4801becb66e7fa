// Wedge-product machinery on ordered bases: greedy index sets, admissible
// index tuples, the h-functions, sampled lower constants and step-by-step
// traces of the determinant bounds behind local boundedness.
#pragma once

#include "blc/core.hpp"
#include "blc/finiteness.hpp"
#include "blc/gauss_opt.hpp"
#include "blc/random.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace blc {

/// Sorted 0-based column indices.
using IndexSet = std::vector<int>;

/// One index set per map, |I_j| = n_j.
struct IndexTuple {
  std::vector<IndexSet> sets;

  bool empty() const { return sets.empty(); }
  /// a_i = sum_j p_j [i in I_j] for i = 0..n-1.
  std::vector<double> weights(const BLDatum& datum) const;
  /// sum of a_i over the 0-based indices i >= from.
  double tail_weight(const BLDatum& datum, int from) const;
  /// sum of a_i over the 0-based indices i < upto.
  double head_weight(const BLDatum& datum, int upto) const;
  std::string to_string() const;  // 1-based, e.g. "({1},{2})"
  auto operator<=>(const IndexTuple&) const = default;
};

/// Ordered basis with columns of norm at most 1 and |det| >= alpha whose
/// columns after the first `ell` lie in H_0.
struct NearBasis {
  Matrix vectors;
  double alpha = 1.0;
  int ell = 0;
};

/// Checks the NearBasis invariants against an orthonormal basis of H_0.
bool is_near_basis(const NearBasis& v, const Matrix& h0_basis, double tol);

/// Backwards greedy selection: scanning columns from last to first, keep
/// index i when L e_i is not in the span of the images of the later columns.
/// For a full frame (k = n) the result has exactly n_j elements.
IndexSet greedy_index_set(const LinearMap& map, const Matrix& frame, const NumericPolicy& policy);

/// All tuples with |I_j| = n_j and prefix weights sum_j p_j |I_j n {1..k}| <= k.
/// With `ell`, also the tail condition sum_j p_j |I_j n {k+1..n}| >= n - k
/// for ell <= k <= n.  Lexicographic order.  Requires n <= 14.
std::vector<IndexTuple> enumerate_admissible(const BLDatum& datum, std::optional<int> ell);

/// True when `t` satisfies the prefix condition (and the tail condition from `ell`).
bool is_admissible(const BLDatum& datum, const IndexTuple& t, std::optional<int> ell);

/// min_j |wedge_{i in I_j} L_j v_i|.
double tuple_wedge(const BLDatum& datum, const Matrix& basis, const IndexTuple& t);

struct HValue {
  double value = 0.0;
  IndexTuple tuple;  // empty when no tuple is admissible
};

/// max over admissible tuples of tuple_wedge; ties go to the lexicographically first tuple.
HValue h_value(const BLDatum& datum, const Matrix& basis, std::optional<int> ell);
HValue h_value(const BLDatum& datum, const Matrix& basis, const std::vector<IndexTuple>& tuples);

struct CEstimate {
  double c_hat = 0.0;
  Matrix worst;
  int samples = 0;
  std::optional<int> ell;
  std::string sampler;
};

/// Monte-Carlo minimum of h.  Without `ell`, over Haar-random orthonormal
/// frames.  With `ell`, over random members of the near-basis class for
/// (alpha, ell, H_0).  Sample i depends only on (seed, i), so larger sample
/// counts extend smaller ones.
CEstimate estimate_c(const BLDatum& datum, std::optional<int> ell, double alpha, int samples,
                     std::uint64_t seed, const Matrix& h0_basis = Matrix());

/// Minimum of estimate_c over every ell from n - dim H_0 to n.
CEstimate estimate_c_partial(const BLDatum& datum, const PartialLocalization& loc, double alpha,
                             int samples, std::uint64_t seed);

/// One random member of the near-basis class, or nothing after `tries` rejections.
std::optional<NearBasis> sample_near_basis(Rng& rng, int n, int ell, double alpha,
                                           const Matrix& h0_basis, int tries);

/// min over sampled, coordinate and kernel-lattice k-frames of
/// sum_j p_j rank(L_j e_1..e_k) - k.
double openness_margin(const BLDatum& datum, int k, int samples, std::uint64_t seed,
                       const NumericPolicy& policy = {});

struct TraceStep {
  std::string label;
  double lhs = 0.0;
  double rhs = 0.0;
  bool ok = false;
};

struct CertificateTrace {
  std::vector<TraceStep> steps;
  bool overall_ok = true;
  double constant_used = 0.0;
  std::string branch;

  /// Records lhs <= rhs, allowing a relative slack of 1e-9.
  bool check_le(std::string label, double lhs, double rhs);
  /// Records a step whose outcome was decided by the caller.
  void record(std::string label, double lhs, double rhs, bool ok);
  /// One JSON object per line: {"label", "lhs", "rhs", "ok"}.
  std::string to_jsonl() const;
};

/// Replays the determinant bound prod det(A_j)^{p_j} <= C det(M + I) at the
/// input A, with C = (c^{2 sum p} prod p_j^{p_j n_j})^{-1}.
CertificateTrace certify_localized(const BLDatum& datum, const GaussianInput& a, double c_hat,
                                   const NumericPolicy& policy = {});

/// Replays prod det(A_j)^{p_j} <= C det(M + G) for G the projection onto
/// (ker G)^perp, through the small- and large-eigenvalue branches.
CertificateTrace certify_partial(const BLDatum& datum, const PartialLocalization& loc,
                                 const GaussianInput& a, double alpha, double c_hat,
                                 double deltahat, const NumericPolicy& policy = {});

}  // namespace blc
