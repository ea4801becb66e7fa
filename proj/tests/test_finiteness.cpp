#include "blc/finiteness.hpp"
#include "blc/random.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

namespace blc {
namespace {

const NumericPolicy kPolicy{};

BLDatum infinite_datum() {
  return BLDatum(2, {LinearMap(Matrix{{1.0, 0.0}}), LinearMap(Matrix::Identity(2, 2))},
                 {0.6, 0.7});
}

Subspace line(double x, double y) { return Subspace::span(Matrix{{x}, {y}}, 1e-12); }

TEST(Scaling, Examples) {
  EXPECT_NEAR(check_scaling(data::loomis_whitney(3)), 0.0, 1e-12);
  EXPECT_NEAR(check_scaling(data::holder(3, 4)), 0.0, 1e-12);
  EXPECT_NEAR(check_scaling(BLDatum(2, {LinearMap(Matrix{{1.0, 0.0}})}, {1.0})), -1.0, 1e-12);
}

TEST(Slack, DimensionAndCodimensionExamples) {
  const auto d = infinite_datum();
  EXPECT_NEAR(dimension_slack(d, line(0, 1), kPolicy), -0.3, 1e-12);
  EXPECT_NEAR(dimension_slack(d, line(1, 0), kPolicy), 0.3, 1e-12);
  EXPECT_NEAR(dimension_slack(d, line(1, 1), kPolicy), 0.3, 1e-12);
  EXPECT_NEAR(codimension_slack(d, line(0, 1), kPolicy), -0.3, 1e-12);
  EXPECT_NEAR(codimension_slack(d, line(1, 0), kPolicy), 0.3, 1e-12);
  EXPECT_NEAR(codimension_slack(d, line(1, 1), kPolicy), 0.3, 1e-12);
  const auto lw = data::loomis_whitney(3);
  Subspace plane(Matrix{{1, 0}, {0, 1}, {0, 0}});
  // One projection keeps the plane, two squash it to a line: (2 + 1 + 1)/2 - 2.
  EXPECT_NEAR(dimension_slack(lw, plane, kPolicy), 0.0, 1e-12);
}

TEST(Slack, TrivialSubspaceIdentities) {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const auto d = oracle::random_datum(rng, 2 + t % 3, 3);
    const int n = d.n();
    const double s = check_scaling(d);
    EXPECT_NEAR(dimension_slack(d, Subspace::zero(n), kPolicy), 0.0, 1e-12);
    EXPECT_NEAR(dimension_slack(d, Subspace::whole(n), kPolicy), s, 1e-12);
    EXPECT_NEAR(codimension_slack(d, Subspace::zero(n), kPolicy), -s, 1e-12);
    EXPECT_NEAR(codimension_slack(d, Subspace::whole(n), kPolicy), 0.0, 1e-12);
  }
}

TEST(Slack, CodimensionDiffersByScaling) {
  // codim slack - dim slack = n - sum p_j n_j, so the two agree at critical scaling.
  Rng rng(12);
  const auto lw = data::loomis_whitney(4);
  for (int t = 0; t < 30; ++t) {
    const int k = 1 + static_cast<int>(rng.below(3));
    Subspace v(random_stiefel(rng, 4, k));
    EXPECT_NEAR(dimension_slack(lw, v, kPolicy), codimension_slack(lw, v, kPolicy), 1e-12);
  }
  for (int t = 0; t < 20; ++t) {
    const auto d = oracle::random_datum(rng, 3, 3);
    Subspace v(random_stiefel(rng, 3, 1 + static_cast<int>(rng.below(2))));
    EXPECT_NEAR(codimension_slack(d, v, kPolicy) - dimension_slack(d, v, kPolicy),
                -check_scaling(d), 1e-12);
  }
}

TEST(Slack, InvariantUnderChangeOfBasis) {
  Rng rng(13);
  for (int t = 0; t < 20; ++t) {
    const auto d = oracle::random_datum(rng, 4, 3);
    Subspace v(random_stiefel(rng, 4, 2));
    // Rotate the basis of V and replace each L_j by T_j L_j with T_j invertible.
    const Matrix rot = random_stiefel(rng, 2, 2);
    Subspace w(v.basis() * rot);
    std::vector<LinearMap> maps;
    for (const auto& l : d.maps())
      maps.emplace_back(random_spd(rng, l.target_dim(), 1.0) * l.rows());
    const auto e = d.with_maps(maps);
    EXPECT_NEAR(dimension_slack(d, v, kPolicy), dimension_slack(e, w, kPolicy), 1e-12);
    EXPECT_NEAR(codimension_slack(d, v, kPolicy), codimension_slack(e, w, kPolicy), 1e-12);
  }
}

TEST(Subspaces, SumAndIntersection) {
  Subspace xy(Matrix{{1, 0}, {0, 1}, {0, 0}});
  Subspace yz(Matrix{{0, 0}, {1, 0}, {0, 1}});
  EXPECT_EQ(subspace_sum(xy, yz, 1e-9).dim(), 3);
  const auto meet = subspace_intersection(xy, yz, 1e-9);
  ASSERT_EQ(meet.dim(), 1);
  EXPECT_NEAR(std::abs(meet.basis()(1, 0)), 1.0, 1e-12);
  EXPECT_TRUE(xy.contains(meet, 1e-9));
  EXPECT_FALSE(meet.contains(xy, 1e-9));
}

TEST(Lattice, LoomisWhitneyKernels) {
  // Kernels of the LW maps on R^3 are the three axes; the closure is every
  // coordinate subspace: {0}, R^3, 3 axes, 3 planes.
  const auto lw = data::loomis_whitney(3);
  std::vector<Subspace> gens;
  for (const auto& l : lw.maps()) gens.emplace_back(kernel_basis(l, kPolicy));
  EXPECT_EQ(lattice_closure(gens, kPolicy).size(), 8u);
  EXPECT_LE(lattice_closure(gens, kPolicy, 5).size(), 5u);
}

TEST(Search, LoomisWhitneyPlaneHasNoViolation) {
  const auto r = search_critical_subspaces(data::loomis_whitney(2), FinitenessMode::global, 50, 1);
  EXPECT_EQ(r.verdict, Verdict::no_violation_found);
  EXPECT_NEAR(r.min_slack, 0.0, 1e-12);
  EXPECT_FALSE(r.witness.has_value());
  EXPECT_NEAR(r.scaling_slack, 0.0, 1e-12);
}

TEST(Search, InfiniteDatumIsWitnessed) {
  const auto r = search_critical_subspaces(infinite_datum(), FinitenessMode::global, 50, 1);
  EXPECT_EQ(r.verdict, Verdict::witnessed_infinite);
  EXPECT_NEAR(r.min_slack, -0.3, 1e-12);
  ASSERT_TRUE(r.witness.has_value());
  EXPECT_EQ(r.witness->dim(), 1);
  EXPECT_NEAR(std::abs(r.witness->basis()(1, 0)), 1.0, 1e-9);
  const auto j = to_json(r);
  EXPECT_EQ(j["verdict"], "witnessed-infinite");
  EXPECT_FALSE(j["witness"].is_null());
}

TEST(Search, YoungHasNoViolation) {
  const auto r = search_critical_subspaces(data::young2(), FinitenessMode::global, 50, 2);
  EXPECT_EQ(r.verdict, Verdict::no_violation_found);
  EXPECT_GE(r.min_slack, -1e-12);
  EXPECT_TRUE(to_json(r)["witness"].is_null());
}

TEST(Search, ScalingFailureIsWitnessed) {
  // sum p_j n_j = 2.4 > 2: the trivial subspace fails the codimension form of scaling.
  BLDatum over(2, {LinearMap(Matrix::Identity(2, 2)), LinearMap(Matrix{{1.0, 1.0}})}, {1.0, 0.4});
  const auto r = search_critical_subspaces(over, FinitenessMode::global, 20, 3);
  EXPECT_EQ(r.verdict, Verdict::witnessed_infinite);
  EXPECT_EQ(r.condition, "scaling");
  EXPECT_NEAR(r.min_slack, -0.4, 1e-12);
  BLDatum under(2, {LinearMap(Matrix{{1.0, 0.0}})}, {1.0});
  const auto u = search_critical_subspaces(under, FinitenessMode::global, 20, 3);
  EXPECT_EQ(u.verdict, Verdict::witnessed_infinite);
  EXPECT_NEAR(u.min_slack, -1.0, 1e-12);
}

// Subcritical: sum p_j n_j = 3/2 < 2, so only the localised constant can be finite.
BLDatum subcritical_datum() {
  return BLDatum(2, {LinearMap(Matrix{{1.0, 0.0}}), LinearMap(Matrix{{0.0, 1.0}})}, {1.0, 0.5});
}

TEST(Search, LocalizedModeUsesCodimension) {
  const auto inf = search_critical_subspaces(infinite_datum(), FinitenessMode::localized, 50, 4);
  EXPECT_EQ(inf.verdict, Verdict::witnessed_infinite);
  EXPECT_EQ(inf.condition, "codimension");
  EXPECT_NEAR(inf.min_slack, -0.3, 1e-12);

  const auto sub = subcritical_datum();
  EXPECT_EQ(search_critical_subspaces(sub, FinitenessMode::global, 50, 4).verdict,
            Verdict::witnessed_infinite);
  const auto loc = search_critical_subspaces(sub, FinitenessMode::localized, 50, 4);
  EXPECT_EQ(loc.verdict, Verdict::no_violation_found);
  EXPECT_NEAR(loc.min_slack, 0.0, 1e-12);  // attained at the y-axis
}

TEST(Search, OneDimensionalIsCertified) {
  BLDatum d(1, {LinearMap(Matrix{{2.0}}), LinearMap(Matrix{{-1.0}})}, {0.5, 0.5});
  const auto r = search_critical_subspaces(d, FinitenessMode::global, 5, 1);
  EXPECT_EQ(r.verdict, Verdict::certified_finite_special_case);
}

TEST(Search, RejectsZeroBudget) {
  EXPECT_THROW(search_critical_subspaces(data::young2(), FinitenessMode::global, 0, 1),
               std::invalid_argument);
}

TEST(Search, MinimumBoundsEveryProbe) {
  // The reported minimum never exceeds the slack of an independently drawn subspace.
  Rng rng(21);
  for (int t = 0; t < 10; ++t) {
    const auto d = oracle::random_datum(rng, 3, 3);
    const auto r = search_critical_subspaces(d, FinitenessMode::global, 30, 5);
    for (int k = 0; k < 20; ++k) {
      Subspace v(random_stiefel(rng, 3, 1 + static_cast<int>(rng.below(2))));
      EXPECT_LE(r.min_slack, dimension_slack(d, v, kPolicy) + 1e-12);
    }
  }
}

TEST(Search, WitnessSurvivesPerturbation) {
  const auto r = search_critical_subspaces(infinite_datum(), FinitenessMode::global, 50, 1);
  ASSERT_TRUE(r.witness.has_value());
  Rng rng(31);
  NumericPolicy loose;
  loose.rank_tol = 1e-5;
  for (int t = 0; t < 10; ++t) {
    const Matrix moved = r.witness->basis() + 1e-6 * rng.gaussian(2, 1);
    const auto w = Subspace::span(moved, 1e-12);
    EXPECT_NEAR(dimension_slack(infinite_datum(), w, loose), r.min_slack, 1e-12);
  }
}

TEST(Partial, FromWeight) {
  const auto loc = PartialLocalization::from_weight(Matrix{{1.0, 0.0}, {0.0, 0.0}}, kPolicy);
  ASSERT_EQ(loc.H0_basis.cols(), 1);
  EXPECT_NEAR(std::abs(loc.H0_basis(1, 0)), 1.0, 1e-12);
  EXPECT_TRUE(loc.normalized_projection().isApprox(Matrix{{1.0, 0.0}, {0.0, 0.0}}));
  EXPECT_THROW(PartialLocalization::from_weight(Matrix{{-1.0, 0.0}, {0.0, 1.0}}, kPolicy),
               std::invalid_argument);
  EXPECT_THROW(PartialLocalization::from_weight(Matrix{{1.0, 2.0}, {0.0, 1.0}}, kPolicy),
               std::invalid_argument);
}

TEST(Partial, Examples) {
  const auto xw = PartialLocalization::from_weight(Matrix{{1.0, 0.0}, {0.0, 0.0}}, kPolicy);
  const auto yw = PartialLocalization::from_weight(Matrix{{0.0, 0.0}, {0.0, 1.0}}, kPolicy);
  const auto full = PartialLocalization::from_weight(Matrix::Identity(2, 2), kPolicy);

  const auto lw = check_partial(data::loomis_whitney(2), xw, 20, 1);
  EXPECT_EQ(lw.verdict, Verdict::no_violation_found);
  EXPECT_NEAR(lw.min_slack, 0.0, 1e-12);

  // H_0 is the y-axis, which the first map kills.
  const auto bad = check_partial(subcritical_datum(), xw, 20, 1);
  EXPECT_EQ(bad.verdict, Verdict::witnessed_infinite);
  EXPECT_EQ(bad.condition, "dimension");
  EXPECT_NEAR(bad.min_slack, -0.5, 1e-12);

  const auto good = check_partial(subcritical_datum(), yw, 20, 1);
  EXPECT_EQ(good.verdict, Verdict::no_violation_found);
  EXPECT_NEAR(good.min_slack, 0.0, 1e-12);

  // G = I: only the codimension condition is left.
  const auto loc = check_partial(subcritical_datum(), full, 20, 1);
  const auto ref = search_critical_subspaces(subcritical_datum(), FinitenessMode::localized, 20, 1);
  EXPECT_EQ(loc.verdict, ref.verdict);
  EXPECT_NEAR(loc.min_slack, ref.min_slack, 1e-12);
  EXPECT_EQ(check_partial(infinite_datum(), full, 20, 1).verdict, Verdict::witnessed_infinite);
}

TEST(Partial, ZeroWeightMatchesGlobal) {
  const auto zero = PartialLocalization::from_weight(Matrix::Zero(2, 2), kPolicy);
  for (const auto& d : {infinite_datum(), data::young2(), data::loomis_whitney(2)}) {
    const auto g = search_critical_subspaces(d, FinitenessMode::global, 30, 2);
    const auto p = check_partial(d, zero, 30, 2);
    EXPECT_EQ(g.verdict, p.verdict);
    EXPECT_NEAR(g.min_slack, p.min_slack, 1e-12);
  }
}

TEST(Partial, RejectsWrongDimension) {
  const auto loc = PartialLocalization::from_weight(Matrix::Identity(3, 3), kPolicy);
  EXPECT_THROW(check_partial(data::young2(), loc, 5, 1), StructuralError);
}

}  // namespace
}  // namespace blc
