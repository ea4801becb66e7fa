#include "blc/stability.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace blc {
namespace {

// Smallest |det| of [e1 + r w; e2 + r z] over unit w, z, by a fine angle grid.
// Returns the worst case 1/|det| over the ball of radius r.
double lw_ball_sup_scan(double r) {
  double best = 0.0;
  const int steps = 720;
  for (int a = 0; a < steps; ++a)
    for (int b = 0; b < steps; ++b) {
      const double s = 2.0 * std::numbers::pi * a / steps, t = 2.0 * std::numbers::pi * b / steps;
      const double det = (1.0 + r * std::cos(s)) * (1.0 + r * std::sin(t)) - r * std::sin(s) * r * std::cos(t);
      best = std::max(best, 1.0 / std::abs(det));
    }
  return best;
}

TEST(Perturbation, SamplesStayInBall) {
  Rng rng(4);
  const auto young = data::young2();
  for (int k = 0; k < 200; ++k) {
    const auto d = sample_perturbation(young, 0.3, rng);
    EXPECT_LE(perturbation_norm(d), 0.3);
    ASSERT_EQ(d.size(), 3u);
    EXPECT_EQ(d[0].rows(), 1);
  }
  const auto zero = sample_perturbation(young, 0.0, rng);
  EXPECT_EQ(perturbation_norm(zero), 0.0);
}

TEST(Perturbation, ProjectionClipsSingularValues) {
  Rng rng(5);
  const Perturbation d{rng.gaussian(2, 3), rng.gaussian(1, 3)};
  const auto p = project_to_ball(d, 0.5);
  EXPECT_NEAR(perturbation_norm(p), 0.5, 1e-12);
  const auto again = project_to_ball(p, 0.5);
  for (std::size_t j = 0; j < p.size(); ++j) EXPECT_TRUE(again[j].isApprox(p[j], 1e-12));
}

TEST(Gradient, MatchesFiniteDifferences) {
  Rng rng(6);
  const NumericPolicy policy;
  for (const auto& base : {data::loomis_whitney(2), data::young2(), data::loomis_whitney(3)}) {
    const auto datum = perturbed(base, sample_perturbation(base, 0.1, rng));
    const auto res = compute_bl(datum, LocalizationMode::global(), policy);
    ASSERT_EQ(res.status, OptimizerStatus::converged);
    const auto g = log_bl_gradient(datum, res.final_input);
    const double h = 1e-5;
    for (int j = 0; j < datum.m(); ++j)
      for (Eigen::Index e = 0; e < g[static_cast<std::size_t>(j)].size(); ++e) {
        Perturbation up, down;
        for (int k = 0; k < datum.m(); ++k) {
          up.push_back(Matrix::Zero(datum.map(k).target_dim(), datum.n()));
          down.push_back(up.back());
        }
        up[static_cast<std::size_t>(j)](e) = h;
        down[static_cast<std::size_t>(j)](e) = -h;
        const double fd = (compute_bl(perturbed(datum, up), LocalizationMode::global(), policy).log_value -
                           compute_bl(perturbed(datum, down), LocalizationMode::global(), policy).log_value) /
                          (2 * h);
        EXPECT_NEAR(g[static_cast<std::size_t>(j)](e), fd, 1e-4);
      }
  }
}

TEST(Stability, ZeroRadiusReproducesBase) {
  const auto rep = stability_probe(data::young2(), 0.0, 1, NumericPolicy{}, {20, 3, 50});
  for (const auto& s : rep.samples) EXPECT_NEAR(s.value, rep.base_value, 1e-9);
  EXPECT_NEAR(rep.base_value, std::sqrt(3.0) / 2.0, 1e-6);
  EXPECT_NEAR(rep.sup, rep.base_value, 1e-9);
}

TEST(Stability, LoomisWhitneyBall) {
  const double r = 0.05;
  const auto lw = data::loomis_whitney(2);
  const auto rep = stability_probe(lw, r, 2024, NumericPolicy{});
  EXPECT_EQ(rep.nonfinite, 0);
  ASSERT_EQ(rep.samples.size(), 200u);
  for (const auto& s : rep.samples) {
    EXPECT_TRUE(std::isfinite(s.value));
    EXPECT_LE(s.norm, r);
    // Each sample agrees with the closed form 1 / |det|.
    const auto d = perturbed(lw, [&] {
      Rng rng = Rng(2024).stream(static_cast<std::uint64_t>(s.index));
      return sample_perturbation(lw, r, rng);
    }());
    EXPECT_NEAR(s.value, rank_one_2d_oracle(d), 1e-6);
  }
  const double exact = 1.0 / ((1.0 - r) * (1.0 - r));
  EXPECT_NEAR(lw_ball_sup_scan(r), exact, 1e-6);
  EXPECT_NEAR(rep.sup, exact, 1e-4);
  EXPECT_LE(perturbation_norm(rep.sup_perturbation), r * (1.0 + 1e-12));
  EXPECT_LE(rep.min, rep.median);
  EXPECT_LE(rep.median, rep.max);
  EXPECT_LE(rep.max, rep.sup);
}

TEST(Stability, RotatedFamilyIsSecant) {
  for (double theta : {0.0, std::numbers::pi / 6, std::numbers::pi / 3}) {
    const auto res = compute_bl(rotated_rank_one(theta), LocalizationMode::global(), NumericPolicy{});
    EXPECT_NEAR(res.value, 1.0 / std::cos(theta), 1e-6) << theta;
  }
}

TEST(Stability, Reproducible) {
  const StabilityOptions opt{30, 1, 20};
  const auto a = stability_probe(data::young2(), 0.1, 77, NumericPolicy{}, opt);
  const auto b = stability_probe(data::young2(), 0.1, 77, NumericPolicy{}, opt);
  for (std::size_t i = 0; i < a.samples.size(); ++i) EXPECT_EQ(a.samples[i].value, b.samples[i].value);
  EXPECT_EQ(a.sup, b.sup);
}

TEST(Stability, InfiniteBaseThrows) {
  const BLDatum inf(2, {LinearMap(Matrix{{1.0, 0.0}}), LinearMap(Matrix{{1.0, 0.0}})}, {1.0, 1.0});
  EXPECT_THROW(stability_probe(inf, 0.05, 1, NumericPolicy{}), std::invalid_argument);
}

}  // namespace
}  // namespace blc
