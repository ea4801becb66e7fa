// Acceptance suite: one PASS/FAIL line per criterion, with its runtime
// against the budget.  Exit status is nonzero when any criterion fails.
#include "blc/finiteness.hpp"
#include "blc/frames.hpp"
#include "blc/gauss_opt.hpp"
#include "blc/kakeya.hpp"
#include "blc/nonlinear.hpp"
#include "blc/random.hpp"
#include "blc/stability.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

using namespace blc;

namespace {

const NumericPolicy kPolicy;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Outcome exactness() {
  Outcome o;
  const auto lw2 = compute_bl(data::loomis_whitney(2), LocalizationMode::global(), kPolicy);
  const auto lw3 = compute_bl(data::loomis_whitney(3), LocalizationMode::global(), kPolicy);
  o.require(std::abs(lw2.value - 1.0) <= 1e-6, fmt("LW2 = %.12g", lw2.value));
  o.require(std::abs(lw3.value - 1.0) <= 1e-6, fmt("LW3 = %.12g", lw3.value));
  const auto holder = data::holder(2, 2);
  Rng rng(101);
  int above = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto a = GaussianInput::random(holder, rng, 1.5);
    if (lieb_quotient(holder, a, LocalizationMode::global()).log_quotient > 1e-12) ++above;
  }
  o.require(above == 0, fmt("%g Hoelder quotients above 1", above));
  if (o.pass) o.detail = fmt("LW2 %.12g, LW3 %.12g, Hoelder 1000/1000 <= 1", lw2.value, lw3.value);
  return o;
}

Outcome young() {
  Outcome o;
  const double exact = std::sqrt(3.0) / 2.0;
  const double v = compute_bl(data::young2(), LocalizationMode::global(), kPolicy).value;
  const double grid = oracle::young_grid_search();
  o.require(std::abs(v - exact) <= 1e-6, fmt("BL = %.12g", v));
  o.require(std::abs(v - grid) <= 1e-4, fmt("grid oracle %.12g", grid));
  if (o.pass) o.detail = fmt("BL %.12g, grid oracle %.12g", v, grid);
  return o;
}

Outcome rank_one() {
  Outcome o;
  Rng rng(303);
  double worst = 0.0;
  int checked = 0;
  while (checked < 100) {
    const Vector u = rng.gaussian(2, 1), v = rng.gaussian(2, 1);
    const double det = u(0) * v(1) - u(1) * v(0);
    if (std::abs(det) < 0.05) continue;
    ++checked;
    const auto r = compute_bl(data::rank_one_pair(u, v), LocalizationMode::global(), kPolicy);
    worst = std::max(worst, std::abs(r.value - 1.0 / std::abs(det)));
  }
  o.require(worst <= 1e-6, fmt("worst error %.3g", worst));
  if (o.pass) o.detail = fmt("100 data, worst error %.3g", worst);
  return o;
}

Outcome stability() {
  Outcome o;
  const double r = 0.05;
  const auto rep = stability_probe(data::loomis_whitney(2), r, 2024, kPolicy);
  const double exact = 1.0 / ((1.0 - r) * (1.0 - r));
  o.require(rep.samples.size() == 200 && rep.nonfinite == 0, fmt("%g nonfinite samples", rep.nonfinite));
  o.require(std::abs(rep.sup - exact) <= 1e-4, fmt("sup %.10g vs %.10g", rep.sup, exact));
  double worst = 0.0;
  for (double theta : {0.0, std::numbers::pi / 6, std::numbers::pi / 3}) {
    const double v = compute_bl(rotated_rank_one(theta), LocalizationMode::global(), kPolicy).value;
    worst = std::max(worst, std::abs(v - 1.0 / std::cos(theta)));
  }
  o.require(worst <= 1e-6, fmt("sec theta error %.3g", worst));
  if (o.pass) o.detail = fmt("sup %.10g vs %.10g, sec theta error %.3g", rep.sup, exact, worst);
  return o;
}

Outcome finiteness() {
  Outcome o;
  const BLDatum d(2, {LinearMap(Matrix{{1.0, 0.0}}), LinearMap(Matrix::Identity(2, 2))}, {0.6, 0.7});
  const auto rep = search_critical_subspaces(d, FinitenessMode::global, 200, 5, kPolicy);
  o.require(rep.verdict == Verdict::witnessed_infinite, "verdict " + to_string(rep.verdict));
  o.require(std::abs(rep.min_slack + 0.3) <= 1e-9, fmt("slack %.12g", rep.min_slack));
  o.require(rep.witness && rep.witness->dim() == 1 &&
                std::abs(std::abs(rep.witness->basis()(1, 0)) - 1.0) <= 1e-9,
            "witness is not the y-axis");
  OptimizerStatus status = OptimizerStatus::converged;
  try {
    status = compute_bl(d, LocalizationMode::global(), kPolicy).status;
  } catch (const BlowUpError&) {
    status = OptimizerStatus::diverging;
  }
  o.require(status == OptimizerStatus::diverging, "compute_bl status " + to_string(status));
  if (o.pass) o.detail = fmt("witnessed-infinite, slack %.12g, compute_bl diverging", rep.min_slack);
  return o;
}

Outcome localized_certificate() {
  Outcome o;
  int passed = 0, retried = 0;
  const std::vector<BLDatum> data{data::loomis_whitney(2), data::young2(), data::holder(2, 2)};
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto& d = data[k];
    const double c = estimate_c(d, std::nullopt, 1.0, 1000, 600 + k).c_hat;
    double c_fine = -1.0;
    Rng rng(610 + k);
    for (int t = 0; t < 100; ++t) {
      const auto a = GaussianInput::random(d, rng, 2.0);
      bool ok = certify_localized(d, a, c, kPolicy).overall_ok;
      if (!ok) {
        // A failed trace means the sampled c was too large: re-estimate with ten times the samples.
        if (c_fine < 0.0) c_fine = estimate_c(d, std::nullopt, 1.0, 10000, 600 + k).c_hat;
        ok = certify_localized(d, a, c_fine, kPolicy).overall_ok;
        ++retried;
      }
      if (ok) ++passed;
    }
  }
  o.require(passed == 300, fmt("%g/300 traces passed", passed));
  o.detail = fmt("%g/300 traces passed, %g re-estimated", passed, retried);
  return o;
}

Outcome partial_certificate() {
  Outcome o;
  const BLDatum d(2, {LinearMap(Matrix{{0.0, 1.0}})}, {1.0});
  const auto loc = PartialLocalization::from_weight(Matrix{{1.0, 0.0}, {0.0, 0.0}}, kPolicy);
  const double c = estimate_c_partial(d, loc, 0.5, 1000, 700).c_hat;
  int passed = 0, small = 0, large = 0;
  for (int k = -16; k <= 16; ++k) {
    const double a = std::pow(10.0, k / 4.0);
    const auto t = certify_partial(d, loc, GaussianInput{{Matrix::Constant(1, 1, a)}}, 0.5, c, 0.05, kPolicy);
    if (t.overall_ok) ++passed;
    if (t.branch == "small-eigenvalues") ++small;
    if (t.branch == "large-eigenvalues") ++large;
  }
  o.require(passed == 33, fmt("%g/33 traces passed", passed));
  o.require(small > 0 && large > 0, fmt("branches small %g, large %g", small, large));
  o.detail = fmt("%g/33 traces passed, small branch %g, large branch %g", passed, small, large);
  return o;
}

Tube strip(double offset, bool vertical, double width) {
  Tube t;
  t.center = vertical ? Vector{{offset, 0.0}} : Vector{{0.0, offset}};
  t.directions = vertical ? Matrix{{0.0}, {1.0}} : Matrix{{1.0}, {0.0}};
  t.width = width;
  t.j = vertical ? 0 : 1;
  return t;
}

Outcome kakeya() {
  Outcome o;
  const auto lw = data::loomis_whitney(2);
  const std::vector<double> p{1.0, 1.0};
  const GridSpec fine{800};

  TubeFamily v, h;
  v.j = 0;
  v.reference_kernel = Matrix{{0.0}, {1.0}};
  h.j = 1;
  h.reference_kernel = Matrix{{1.0}, {0.0}};
  for (double off : {-0.5, 0.0, 0.5}) {
    v.tubes.push_back(strip(off, true, 0.05));
    h.tubes.push_back(strip(off, false, 0.05));
  }
  const double axis = kakeya_ratio({v, h}, p, fine).ratio;
  o.require(std::abs(axis - 4.0) <= 0.02 * 4.0, fmt("axis ratio %.6g", axis));

  const auto kappa = measure_kappa(lw, 0.01, 0.1, 20, {10, 10}, fine, 800, kPolicy);
  o.require(kappa.kappa_hat <= 16.0, fmt("kappa_hat %.6g", kappa.kappa_hat));

  std::vector<double> xs, ys;
  for (double delta : {0.04, 0.02, 0.01}) {
    double best = 0.0;
    for (std::uint64_t trial = 0; trial < 5; ++trial)
      best = std::max(best, kakeya_ratio(random_families(lw, delta, 0.1, {10, 10}, 810 + trial, kPolicy),
                                         p, fine).ratio);
    xs.push_back(std::log(1.0 / delta));
    ys.push_back(std::log(best));
  }
  const double exponent = regression_slope(xs, ys);
  o.require(exponent < 0.5, fmt("growth exponent %.4g", exponent));
  o.detail = fmt("axis ratio %.6g, kappa_hat %.6g, growth exponent %.4g", axis, kappa.kappa_hat, exponent);
  return o;
}

Box interval(double a, double b) { return {Vector{{a}}, Vector{{b}}}; }

// Worst l1delta ratio over smoothed random atoms in dimensions 1 and 2.
double worst_atom_ratio(double c, bool& all_members) {
  Rng rng(901);
  double worst = 0.0;
  all_members = true;
  for (int d : {1, 2}) {
    const double delta = d == 1 ? 0.02 : 0.1;
    const double h = delta / (d == 1 ? 20.0 : 5.0);
    const Box box = Box::cube(d, 0.25);
    for (int trial = 0; trial < (d == 1 ? 10 : 3); ++trial) {
      GridFunction g = GridFunction::zeros(box, h);
      const int count = 1 + static_cast<int>(rng.below(5));
      for (int a = 0; a < count; ++a) g[rng.below(g.size())] += rng.uniform(0.5, 1.5) / std::pow(h, d);
      const auto r = l1delta_check(poisson_smooth(g, c * delta).window(box), delta);
      all_members = all_members && r.member;
      worst = std::max(worst, r.worst_pair.ratio);
    }
  }
  return worst;
}

Submersion lw_quadratic(double coefficient, int j) {
  const auto lw = data::loomis_whitney(2);
  if (j == 1) return Submersion::linear(lw.map(1));
  return Submersion::quadratic(lw.map(0), {Matrix{{0.0, 0.0}, {0.0, 2.0 * coefficient}}});
}

Outcome nonlinear() {
  Outcome o;
  bool members = false;
  const double unit = worst_atom_ratio(1.0, members);
  o.require(members, fmt("c = 1 smoothing leaves l1delta: worst ratio %.6g > 2", unit));
  bool sufficient_members = false;
  const double sufficient = worst_atom_ratio(1.05 * poisson_sufficient_constant(2), sufficient_members);
  std::printf("INFO  criterion 9: c = %.4g smoothing gives members=%s, worst ratio %.6g\n",
              1.05 * poisson_sufficient_constant(2), sufficient_members ? "yes" : "no", sufficient);

  // Linear maps against det(M)^{-1/2} for Gaussian inputs.
  const auto lw = data::loomis_whitney(2);
  const std::vector<double> a{0.7, 1.6};
  std::vector<GridFunction> f;
  Matrix m = Matrix::Zero(2, 2);
  for (int j = 0; j < 2; ++j) {
    const double aj = a[static_cast<std::size_t>(j)];
    f.push_back(GridFunction::sample(interval(-8.5, 8.5), 0.005, [aj](const Vector& y) {
      return std::exp(-std::numbers::pi * aj * y.squaredNorm());
    }));
    m += lw.p(j) * aj * lw.map(j).rows().transpose() * lw.map(j).rows();
  }
  const double closed = 1.0 / std::sqrt(m.determinant());
  const double lhs = nonlinear_lhs(linear_submersions(lw), f, lw.exponents(), Box::cube(2, 4.0), GridSpec{400});
  o.require(std::abs(lhs - closed) <= 0.01 * closed, fmt("Gaussian lhs %.6g vs %.6g", lhs, closed));

  const std::vector<double> deltas{0.125, 0.0625, 0.03125, 0.015625};
  const std::vector<Submersion> b{lw_quadratic(0.2, 0), lw_quadratic(0.2, 1)};
  const auto sweep = nonlinear_ratio_sweep(b, lw, Box::cube(2, 0.1), deltas, 17);
  bool finite = true;
  for (double r : sweep.max_ratio) finite = finite && std::isfinite(r) && r > 0.0;
  o.require(finite, "non-finite sweep ratio");
  double worst_defect = 0.0;
  for (double s : deltas) {
    const double ratio = linearization_defect(b[0], Vector::Zero(2), s) /
                         linearization_defect(b[0], Vector::Zero(2), s / 2.0);
    worst_defect = std::max(worst_defect, std::abs(ratio - 4.0) / 4.0);
  }
  o.require(worst_defect <= 0.05, fmt("defect ratio off by %.3g", worst_defect));
  o.detail += std::string(o.detail.empty() ? "" : " | ") + fmt("Gaussian lhs %.6g", lhs) +
              fmt(" vs %.6g, sweep slope %.4g, defect error %.3g", closed, sweep.slope, worst_defect);
  return o;
}

Outcome hygiene() {
  Outcome o;
  Rng rng(1001);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int n = 2 + static_cast<int>(rng.below(2));
    const BLDatum d = oracle::random_datum(rng, n, 2 + static_cast<int>(rng.below(2)));
    const auto a = GaussianInput::random(d, rng);
    const Matrix s = rng.gaussian(n, n);
    const std::vector<LocalizationMode> modes{LocalizationMode::global(), LocalizationMode::unit_ball(),
                                              LocalizationMode::partial(s * s.transpose())};
    const auto& mode = modes[static_cast<std::size_t>(t % 3)];
    const auto grad = gradient_log_quotient(d, a, mode);
    worst = std::max(worst, oracle::gradient_fd_relative_error(d, a, mode, grad, rng, 1e-5));
  }
  o.require(worst <= 1e-6, fmt("gradient relative error %.3g", worst));

  double scale = 0.0, orth = 0.0;
  for (const BLDatum& d : {data::loomis_whitney(3), data::young2(), data::holder(2, 3)}) {
    const auto a = GaussianInput::random(d, rng);
    const double base = lieb_quotient(d, a, LocalizationMode::global()).log_quotient;
    for (double t : {0.01, 0.1, 10.0, 100.0})
      scale = std::max(scale, std::abs(lieb_quotient(d, a.scaled(t), LocalizationMode::global()).log_quotient - base));
    const double bl = compute_bl(d, LocalizationMode::global(), kPolicy).value;
    for (int trial = 0; trial < 3; ++trial) {
      const Matrix q = random_stiefel(rng, d.n(), d.n());
      std::vector<LinearMap> maps;
      for (const auto& l : d.maps()) maps.emplace_back(random_stiefel(rng, l.target_dim(), l.target_dim()) * l.rows() * q);
      orth = std::max(orth, std::abs(compute_bl(d.with_maps(maps), LocalizationMode::global(), kPolicy).value - bl));
    }
  }
  o.require(scale <= 1e-9, fmt("scale drift %.3g", scale));
  o.require(orth <= 1e-6, fmt("orthogonal drift %.3g", orth));
  o.detail = fmt("gradient error %.3g, scale drift %.3g, orthogonal drift %.3g", worst, scale, orth);
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "Hoelder and Loomis-Whitney exactness", 5, exactness},
      {2, "Young datum", 10, young},
      {3, "rank-one oracle agreement", 10, rank_one},
      {4, "stability ball", 60, stability},
      {5, "finiteness witness", 5, finiteness},
      {6, "localized certificate", 30, localized_certificate},
      {7, "partial certificate", 30, partial_certificate},
      {8, "Kakeya exactness and recursion", 600, kakeya},
      {9, "nonlinear probe", 300, nonlinear},
      {10, "numerical hygiene", 30, hygiene},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_seconds) o.require(false, fmt("runtime %.1f s over %.0f s", secs, c.budget_seconds));
    if (!o.pass) ++failed;
    std::printf("%s  %2d %-38s %7.2f s  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
