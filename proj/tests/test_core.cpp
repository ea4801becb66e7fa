#include "blc/core.hpp"
#include "blc/io.hpp"
#include "blc/random.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace blc {
namespace {

const NumericPolicy kPolicy{};

bool has_code(const ValidationReport& r, const std::string& code) {
  for (const auto& v : r.violations)
    if (v.code == code) return true;
  return false;
}

TEST(ValidateDatum, LoomisWhitneyPlaneIsValid) {
  const auto r = validate_datum(data::loomis_whitney(2), kPolicy);
  EXPECT_TRUE(r.ok);
  EXPECT_TRUE(r.violations.empty());
}

TEST(ValidateDatum, ZeroMapIsNotSurjective) {
  BLDatum d(2, {LinearMap(Matrix::Zero(1, 2)), LinearMap(Matrix::Identity(2, 2))}, {1.0, 0.5});
  const auto r = validate_datum(d, kPolicy);
  EXPECT_FALSE(r.ok);
  EXPECT_TRUE(has_code(r, "not-surjective"));
  EXPECT_EQ(r.violations.front().j, 0);
}

TEST(ValidateDatum, SingleProjectionHasCommonKernel) {
  BLDatum d(2, {LinearMap(Matrix{{1.0, 0.0}})}, {1.0});
  const auto r = validate_datum(d, kPolicy);
  EXPECT_FALSE(r.ok);
  EXPECT_TRUE(has_code(r, "common-kernel-nontrivial"));
}

TEST(ValidateDatum, ExponentRangeAndZeroWarning) {
  BLDatum d(2, {LinearMap(Matrix{{1.0, 0.0}}), LinearMap(Matrix{{0.0, 1.0}})}, {1.5, 0.0});
  const auto r = validate_datum(d, kPolicy);
  EXPECT_TRUE(has_code(r, "exponent-out-of-range"));
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(r.warnings[0].code, "zero-exponent");
  BLDatum ok(2, {LinearMap(Matrix{{1.0, 0.0}}), LinearMap(Matrix{{0.0, 1.0}})}, {1.0, 0.0});
  EXPECT_TRUE(validate_datum(ok, kPolicy).ok);
}

TEST(ValidateDatum, ShapeMismatchIsStructural) {
  EXPECT_THROW(BLDatum(2, {LinearMap(Matrix{{1.0, 0.0}})}, {1.0, 1.0}), StructuralError);
  EXPECT_THROW(BLDatum(3, {LinearMap(Matrix{{1.0, 0.0}})}, {1.0}), StructuralError);
}

TEST(ValidateDatum, InvariantUnderRowScaling) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3;
    std::vector<LinearMap> maps, scaled;
    for (int j = 0; j < 3; ++j) {
      Matrix rows = rng.gaussian(1 + static_cast<int>(rng.below(2)), n);
      if (trial % 4 == 0 && j == 0) rows.row(0).setZero();
      maps.emplace_back(rows);
      scaled.emplace_back(rows * (trial % 2 ? -1e3 : 1e-3));
    }
    BLDatum a(n, maps, {0.5, 0.5, 0.5}), b(n, scaled, {0.5, 0.5, 0.5});
    const auto ra = validate_datum(a, kPolicy), rb = validate_datum(b, kPolicy);
    EXPECT_EQ(ra.ok, rb.ok);
    ASSERT_EQ(ra.violations.size(), rb.violations.size());
    for (std::size_t i = 0; i < ra.violations.size(); ++i)
      EXPECT_EQ(ra.violations[i].code, rb.violations[i].code);
  }
}

TEST(KernelBasis, AxisProjection) {
  const Matrix k = kernel_basis(LinearMap(Matrix{{1.0, 0.0}}), kPolicy);
  ASSERT_EQ(k.cols(), 1);
  EXPECT_NEAR(std::abs(k(1, 0)), 1.0, 1e-14);
  EXPECT_NEAR(k(0, 0), 0.0, 1e-14);
}

TEST(KernelBasis, IdentityHasTrivialKernel) {
  EXPECT_EQ(kernel_basis(LinearMap(Matrix::Identity(2, 2)), kPolicy).cols(), 0);
}

TEST(KernelBasis, DifferenceMap) {
  const LinearMap l(Matrix{{1.0, -1.0}});
  const Matrix k = kernel_basis(l, kPolicy);
  ASSERT_EQ(k.cols(), 1);
  // Hand solution of x - y = 0 is (1,1)/sqrt(2); check via residual and alignment.
  EXPECT_LT((l.rows() * k).norm(), 1e-14);
  EXPECT_NEAR(std::abs(k.col(0).dot(Vector::Constant(2, 1.0 / std::sqrt(2.0)))), 1.0, 1e-14);
}

TEST(KernelBasis, ColumnCountAndOrthonormalityOnRandomMaps) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(4));
    const int nj = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    const LinearMap l(rng.gaussian(nj, n));
    const Matrix k = kernel_basis(l, kPolicy);
    ASSERT_EQ(k.cols(), n - nj);
    EXPECT_LT((k.transpose() * k - Matrix::Identity(n - nj, n - nj)).norm(), 1e-12);
    EXPECT_LT((l.rows() * k).norm(), 1e-12 * std::max(1.0, l.norm()));
  }
}

TEST(Datum, StackOfValidDatumHasFullRank) {
  for (const BLDatum& d : {data::loomis_whitney(2), data::loomis_whitney(3), data::young2(),
                           data::holder(3, 2)})
    EXPECT_EQ(numerical_rank(d.stacked(), kPolicy.rank_tol), d.n());
}

TEST(Datum, DerivedAccessors) {
  const BLDatum lw3 = data::loomis_whitney(3);
  EXPECT_DOUBLE_EQ(lw3.weighted_target_dim(), 3.0);
  EXPECT_EQ(lw3.map(0).kernel_dim(), 1);
  EXPECT_DOUBLE_EQ(lw3.q(0), 2.0);
}

TEST(DatumJson, ParsesAndRoundTrips) {
  const BLDatum d = io::parse_datum(
      R"({"n": 2, "maps": [{"p": 1, "rows": [[1, 0]]}, {"p": 1, "rows": [[0, 1]]}]})");
  EXPECT_EQ(d.n(), 2);
  EXPECT_EQ(d.m(), 2);
  const BLDatum back = io::datum_from_json(io::datum_to_json(data::young2()));
  for (int j = 0; j < 3; ++j) {
    EXPECT_EQ(back.map(j).rows(), data::young2().map(j).rows());
    EXPECT_EQ(back.p(j), data::young2().p(j));
  }
}

TEST(DatumJson, RejectsMalformedDocuments) {
  EXPECT_THROW(io::parse_datum(R"({"n": 2, "maps": [{"p": 1, "rows": [[1, 0], [1]]}]})"),
               StructuralError);
  EXPECT_THROW(io::parse_datum(R"({"n": 2, "maps": [{"p": 1, "rows": [[1, NaN]]}]})"),
               StructuralError);
  EXPECT_THROW(io::parse_datum(R"({"n": 2, "maps": [{"p": 1, "rows": [[1, 1e999]]}]})"),
               StructuralError);
  EXPECT_THROW(io::parse_datum(R"({"n": 2, "maps": [{"p": 1, "rows": [[1, 0]], "x": 1}]})"),
               StructuralError);
  EXPECT_THROW(io::parse_datum(R"({"n": 3, "maps": [{"p": 1, "rows": [[1, 0]]}]})"),
               StructuralError);
}

TEST(Random, StreamsAreReproducibleAndDistinct) {
  Rng a(42), b(42);
  EXPECT_EQ(a.normal(), b.normal());
  Rng s0 = Rng(42).stream(0), s1 = Rng(42).stream(1);
  EXPECT_NE(s0.uniform(), s1.uniform());
  const Matrix q = random_stiefel(a, 4, 2);
  EXPECT_LT((q.transpose() * q - Matrix::Identity(2, 2)).norm(), 1e-13);
}

}  // namespace
}  // namespace blc
