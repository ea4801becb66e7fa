#include "blc/stability.hpp"

#include "blc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace blc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Run {
  double log_value = kInf;
  std::string status;
  GaussianInput input;
};

Run run_global(const BLDatum& datum, const NumericPolicy& policy) {
  Run r;
  try {
    const auto res = compute_bl(datum, LocalizationMode::global(), policy);
    r.status = to_string(res.status);
    r.log_value = res.status == OptimizerStatus::diverging ? kInf : res.log_value;
    r.input = res.final_input;
  } catch (const UndeterminedError&) {
    r.status = "undetermined";
  } catch (const BlowUpError&) {
    r.status = "diverging";
  }
  return r;
}

Perturbation axpy(const Perturbation& x, double t, const Perturbation& g) {
  Perturbation out = x;
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += t * g[j];
  return out;
}

}  // namespace

double perturbation_norm(const Perturbation& d) {
  double n = 0.0;
  for (const auto& b : d) n = std::max(n, operator_norm(b));
  return n;
}

Perturbation sample_perturbation(const BLDatum& datum, double radius, Rng& rng) {
  if (!(radius >= 0.0)) throw std::invalid_argument("radius must be non-negative");
  Perturbation d;
  for (const auto& m : datum.maps()) {
    Matrix b = Matrix::Zero(m.target_dim(), m.ambient_dim());
    if (radius > 0.0) {
      int attempts = 0;
      do {
        if (++attempts > 100000) throw std::runtime_error("perturbation sampler failed to accept");
        for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-radius, radius);
      } while (operator_norm(b) > radius);
    }
    d.push_back(std::move(b));
  }
  return d;
}

Perturbation project_to_ball(const Perturbation& d, double radius) {
  Perturbation out;
  for (const auto& b : d) {
    Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector s = svd.singularValues().cwiseMin(radius);
    out.push_back(svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose());
  }
  return out;
}

BLDatum perturbed(const BLDatum& datum, const Perturbation& d) {
  if (static_cast<int>(d.size()) != datum.m())
    throw std::invalid_argument("one perturbation block per map expected");
  std::vector<LinearMap> maps;
  for (int j = 0; j < datum.m(); ++j) {
    const auto& b = d[static_cast<std::size_t>(j)];
    if (b.rows() != datum.map(j).target_dim() || b.cols() != datum.n())
      throw std::invalid_argument("perturbation block has the wrong shape");
    maps.emplace_back(datum.map(j).rows() + b);
  }
  return datum.with_maps(std::move(maps));
}

Perturbation log_bl_gradient(const BLDatum& datum, const GaussianInput& extremiser) {
  const auto q = lieb_quotient(datum, extremiser, LocalizationMode::global());
  if (!q.finite) throw std::invalid_argument("gradient needs a positive-definite M");
  const Matrix m_inv = q.M.inverse();
  Perturbation g;
  for (int j = 0; j < datum.m(); ++j)
    g.push_back(-datum.p(j) * extremiser.blocks[static_cast<std::size_t>(j)] *
                datum.map(j).rows() * m_inv);
  return g;
}

StabilityReport stability_probe(const BLDatum& datum, double radius, std::uint64_t seed,
                                 const NumericPolicy& policy, const StabilityOptions& options) {
  if (!(radius >= 0.0)) throw std::invalid_argument("radius must be non-negative");
  if (options.samples < 1) throw std::invalid_argument("need at least one sample");
  const Run base = run_global(datum, policy);
  if (!std::isfinite(base.log_value))
    throw std::invalid_argument("base datum is not finite (status " + base.status + ")");

  StabilityReport rep;
  rep.base_value = std::exp(base.log_value);
  rep.radius = radius;
  const Rng master(seed);
  std::vector<Perturbation> draws(static_cast<std::size_t>(options.samples));
  std::vector<Run> runs(draws.size());
  parallel_for(
      options.samples,
      [&](int i) {
        Rng rng = master.stream(static_cast<std::uint64_t>(i));
        const auto u = static_cast<std::size_t>(i);
        draws[u] = sample_perturbation(datum, radius, rng);
        runs[u] = run_global(perturbed(datum, draws[u]), policy);
      },
      4);

  std::vector<double> values;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    StabilitySample s;
    s.index = static_cast<int>(i);
    s.norm = perturbation_norm(draws[i]);
    s.status = runs[i].status;
    s.value = std::isfinite(runs[i].log_value) ? std::exp(runs[i].log_value) : kInf;
    if (!std::isfinite(s.value)) ++rep.nonfinite;
    values.push_back(s.value);
    rep.samples.push_back(std::move(s));
  }
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  rep.min = sorted.front();
  rep.max = sorted.back();
  const std::size_t mid = sorted.size() / 2;
  rep.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);

  // Projected gradient ascent on log BL from the best finite samples.
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const bool fa = std::isfinite(values[a]), fb = std::isfinite(values[b]);
    if (fa != fb) return fa;
    return values[a] > values[b];
  });
  rep.sup = rep.max;
  if (!std::isfinite(rep.max)) {
    // An infinite sample settles the supremum; finite samples sort first.
    rep.sup_perturbation = draws[order.back()];
    return rep;
  }
  rep.sup_perturbation = draws[order.front()];
  const int starts = std::min<int>(options.ascent_starts, static_cast<int>(order.size()));
  for (int s = 0; s < starts && radius > 0.0; ++s) {
    Perturbation x = draws[order[static_cast<std::size_t>(s)]];
    Run cur = runs[order[static_cast<std::size_t>(s)]];
    double step = radius;
    for (int it = 0; it < options.ascent_iterations && step > 1e-12 * radius; ++it) {
      if (cur.status != "converged") break;
      const auto g = log_bl_gradient(perturbed(datum, x), cur.input);
      double gnorm = 0.0;
      for (const auto& b : g) gnorm = std::max(gnorm, b.norm());
      if (gnorm == 0.0) break;
      const Perturbation y = project_to_ball(axpy(x, step / gnorm, g), radius);
      const Run next = run_global(perturbed(datum, y), policy);
      if (next.log_value > cur.log_value) {
        x = y;
        cur = next;
        step *= 1.5;
      } else {
        step *= 0.5;
      }
    }
    const double v = std::exp(cur.log_value);
    if (v > rep.sup) {
      rep.sup = v;
      rep.sup_perturbation = x;
    }
  }
  return rep;
}

BLDatum rotated_rank_one(double theta) {
  return data::rank_one_pair(Vector{{1.0, 0.0}}, Vector{{std::sin(theta), std::cos(theta)}});
}

}  // namespace blc
