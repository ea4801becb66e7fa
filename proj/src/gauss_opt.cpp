#include "blc/gauss_opt.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <optional>

namespace blc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Longest accepted step, measured as the Frobenius norm of the log-space step.
constexpr double kMaxLogStep = 8.0;
constexpr double kMinDamping = 1e-12;

double log_det_spd(const Matrix& a) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

Matrix assemble_m(const BLDatum& datum, const GaussianInput& a) {
  Matrix m = Matrix::Zero(datum.n(), datum.n());
  for (int j = 0; j < datum.m(); ++j) {
    const Matrix& l = datum.map(j).rows();
    m.noalias() += datum.p(j) * l.transpose() * a.blocks[static_cast<std::size_t>(j)] * l;
  }
  return symmetrized(m);
}

// Pivot-ratio floors (squared) below which M + G counts as singular.  The
// optimizer legitimately visits inputs with magnitude up to diverge_norm, so it
// tolerates far worse conditioning than a one-off quotient evaluation.
constexpr double kSingularRatio = 1e-13;
constexpr double kOptimizerSingularRatio = 1e-40;

// Cholesky of M + G, or nothing if it is numerically singular.
std::optional<Eigen::LLT<Matrix>> factor_denominator(const Matrix& mg,
                                                     double ratio = kSingularRatio) {
  Eigen::LLT<Matrix> llt(mg);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Vector d = llt.matrixL().toDenseMatrix().diagonal();
  if (!(d.minCoeff() > 0.0) || d.minCoeff() * d.minCoeff() <= ratio * d.maxCoeff() * d.maxCoeff())
    return std::nullopt;
  return llt;
}

// L_j (M+G)^{-1} L_j^T for every j.
std::vector<Matrix> projected_inverses(const BLDatum& datum, const Eigen::LLT<Matrix>& llt) {
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(datum.m()));
  for (int j = 0; j < datum.m(); ++j) {
    const Matrix& l = datum.map(j).rows();
    out.push_back(symmetrized(l * llt.solve(l.transpose())));
  }
  return out;
}

double magnitude_of(const GaussianInput& a) {
  double mag = 0.0;
  for (const Matrix& b : a.blocks) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(b, Eigen::EigenvaluesOnly);
    mag = std::max({mag, es.eigenvalues().maxCoeff(), 1.0 / es.eigenvalues().minCoeff()});
  }
  return mag;
}

struct Evaluation {
  double log_q = kInf;
  bool finite = false;
  std::vector<Matrix> inv;  // L_j (M+G)^{-1} L_j^T
};

Evaluation evaluate(const BLDatum& datum, const GaussianInput& a, const Matrix& g) {
  Evaluation e;
  const Matrix m = assemble_m(datum, a);
  auto llt = factor_denominator(m + g, kOptimizerSingularRatio);
  if (!llt) return e;
  double num = 0.0;
  for (int j = 0; j < datum.m(); ++j)
    num += 0.5 * datum.p(j) * log_det_spd(a.blocks[static_cast<std::size_t>(j)]);
  const double den = llt->matrixL().toDenseMatrix().diagonal().array().log().sum();
  e.log_q = num - den;
  e.finite = std::isfinite(e.log_q);
  e.inv = projected_inverses(datum, *llt);
  return e;
}

// Rescale a global-mode input so that det(M) = 1.
void normalise(GaussianInput& a, const BLDatum& datum) {
  const Matrix m = assemble_m(datum, a);
  const double ld = log_det_spd(m);
  if (!std::isfinite(ld)) return;
  a = a.scaled(std::exp(-ld / datum.n()));
}

}  // namespace

GaussianInput GaussianInput::identity(const BLDatum& datum) {
  GaussianInput a;
  for (const auto& l : datum.maps())
    a.blocks.push_back(Matrix::Identity(l.target_dim(), l.target_dim()));
  return a;
}

GaussianInput GaussianInput::random(const BLDatum& datum, Rng& rng, double spread) {
  GaussianInput a;
  for (const auto& l : datum.maps()) a.blocks.push_back(random_spd(rng, l.target_dim(), spread));
  return a;
}

GaussianInput GaussianInput::scaled(double t) const {
  GaussianInput a = *this;
  for (Matrix& b : a.blocks) b *= t;
  return a;
}

void GaussianInput::check(const BLDatum& datum) const {
  if (static_cast<int>(blocks.size()) != datum.m())
    throw std::invalid_argument("gaussian input: one block per map required");
  for (int j = 0; j < datum.m(); ++j) {
    const Matrix& b = blocks[static_cast<std::size_t>(j)];
    const int nj = datum.map(j).target_dim();
    if (b.rows() != nj || b.cols() != nj)
      throw std::invalid_argument("gaussian input: block " + std::to_string(j) +
                                  " has the wrong size");
    if (!b.allFinite() || !is_spd(b, 1e-10))
      throw std::invalid_argument("gaussian input: block " + std::to_string(j) +
                                  " is not symmetric positive definite");
  }
}

LocalizationMode LocalizationMode::partial(Matrix g) {
  if (!is_symmetric(g, 1e-10))
    throw std::invalid_argument("partial localisation: G must be symmetric");
  if (min_eigenvalue(g) < -1e-10 * std::max(1.0, g.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("partial localisation: G must be positive semi-definite");
  return LocalizationMode(LocalizationKind::partial, symmetrized(g));
}

Matrix LocalizationMode::weight(int n) const {
  switch (kind_) {
    case LocalizationKind::global:
      return Matrix::Zero(n, n);
    case LocalizationKind::unit_ball:
      return Matrix::Identity(n, n);
    case LocalizationKind::partial:
      if (g_.rows() != n || g_.cols() != n)
        throw std::invalid_argument("partial localisation: G has the wrong dimension");
      return g_;
  }
  return {};
}

std::string LocalizationMode::name() const {
  switch (kind_) {
    case LocalizationKind::global:
      return "global";
    case LocalizationKind::unit_ball:
      return "unit-ball";
    case LocalizationKind::partial:
      return "partial";
  }
  return "?";
}

double QuotientBreakdown::quotient() const { return finite ? std::exp(log_quotient) : kInf; }

QuotientBreakdown lieb_quotient(const BLDatum& datum, const GaussianInput& a,
                                const LocalizationMode& mode) {
  require_positive_exponents(datum);
  a.check(datum);
  QuotientBreakdown out;
  out.M = assemble_m(datum, a);
  for (int j = 0; j < datum.m(); ++j)
    out.log_numerator += 0.5 * datum.p(j) * log_det_spd(a.blocks[static_cast<std::size_t>(j)]);
  auto llt = factor_denominator(out.M + mode.weight(datum.n()));
  if (!llt) {
    out.finite = false;
    out.log_denominator = -kInf;
    out.log_quotient = kInf;
    out.note = "M + G is numerically singular: the kernels of the maps meet the kernel of G";
    return out;
  }
  out.log_denominator = llt->matrixL().toDenseMatrix().diagonal().array().log().sum();
  out.log_quotient = out.log_numerator - out.log_denominator;
  return out;
}

std::vector<Matrix> gradient_log_quotient(const BLDatum& datum, const GaussianInput& a,
                                          const LocalizationMode& mode) {
  require_positive_exponents(datum);
  a.check(datum);
  const Matrix mg = assemble_m(datum, a) + mode.weight(datum.n());
  auto llt = factor_denominator(mg, kOptimizerSingularRatio);
  if (!llt) throw std::domain_error("gradient undefined: M + G is numerically singular");
  const auto inv = projected_inverses(datum, *llt);
  std::vector<Matrix> grad;
  for (int j = 0; j < datum.m(); ++j) {
    const Matrix& b = a.blocks[static_cast<std::size_t>(j)];
    const Matrix b_inv = b.llt().solve(Matrix::Identity(b.rows(), b.cols()));
    grad.push_back(0.5 * datum.p(j) * symmetrized(b_inv - inv[static_cast<std::size_t>(j)]));
  }
  return grad;
}

GaussianInput fixed_point_step(const BLDatum& datum, const GaussianInput& a,
                               const LocalizationMode& mode, double damping) {
  require_positive_exponents(datum);
  a.check(datum);
  if (!(damping > 0.0 && damping <= 1.0))
    throw std::invalid_argument("fixed_point_step: damping must lie in (0, 1]");
  const Matrix mg = assemble_m(datum, a) + mode.weight(datum.n());
  auto llt = factor_denominator(mg, kOptimizerSingularRatio);
  if (!llt) throw BlowUpError("M + G is singular; the update is undefined");
  const auto inv = projected_inverses(datum, *llt);
  GaussianInput next;
  for (int j = 0; j < datum.m(); ++j) {
    const Matrix& k = inv[static_cast<std::size_t>(j)];
    Eigen::LLT<Matrix> kl(k);
    if (kl.info() != Eigen::Success || !is_spd(k))
      throw BlowUpError("L_j (M+G)^{-1} L_j^T is singular for map " + std::to_string(j));
    const Matrix update = symmetrized(kl.solve(Matrix::Identity(k.rows(), k.cols())));
    next.blocks.push_back(
        symmetrized((1.0 - damping) * a.blocks[static_cast<std::size_t>(j)] + damping * update));
  }
  return next;
}

std::string to_string(OptimizerStatus s) {
  switch (s) {
    case OptimizerStatus::converged:
      return "converged";
    case OptimizerStatus::boundary_plateau:
      return "boundary_plateau";
    case OptimizerStatus::diverging:
      return "diverging";
  }
  return "?";
}

OptimizerResult compute_bl(const BLDatum& datum, const LocalizationMode& mode,
                           const NumericPolicy& policy, const GaussianInput* start) {
  policy.check();
  require_positive_exponents(datum);
  const bool global = mode.kind() == LocalizationKind::global;
  if (global) {
    const double slack = datum.weighted_target_dim() - datum.n();
    if (std::abs(slack) > 1e-9 * datum.n())
      throw std::invalid_argument(
          "global mode requires the scaling condition sum_j p_j n_j = n (slack " +
          std::to_string(slack) + "); the supremum is then 0 or infinite by scaling");
  }
  const Matrix g = mode.weight(datum.n());

  GaussianInput a = start ? *start : GaussianInput::identity(datum);
  a.check(datum);
  if (global) normalise(a, datum);

  OptimizerResult res;
  std::vector<double> trace;
  Evaluation cur = evaluate(datum, a, g);
  if (!cur.finite) {
    res.status = OptimizerStatus::diverging;
    res.value = kInf;
    res.log_value = kInf;
    res.final_input = a;
    res.magnitude = magnitude_of(a);
    return res;
  }
  trace.push_back(cur.log_q);

  double damping = 1.0;
  double last_change = kInf;
  std::vector<Matrix> prev_dir;

  for (int it = 1; it <= policy.max_iter; ++it) {
    // Geodesic data: A = S^2, step direction D_j = log(S^{-1} U S^{-1}) with U the update.
    std::vector<Matrix> root(a.blocks.size()), inv_root(a.blocks.size()), dir(a.blocks.size());
    double grad_sq = 0.0, dir_sq = 0.0;
    for (std::size_t j = 0; j < a.blocks.size(); ++j) {
      root[j] = spectral_apply(a.blocks[j], [](double x) { return std::sqrt(x); });
      inv_root[j] = spectral_apply(a.blocks[j], [](double x) { return 1.0 / std::sqrt(x); });
      // S K S = S U^{-1} S, whose log is -D.
      const Matrix sks = symmetrized(root[j] * cur.inv[j] * root[j]);
      if (min_eigenvalue(sks) <= 0.0)
        throw BlowUpError("L_j (M+G)^{-1} L_j^T lost positive definiteness");
      dir[j] = -spectral_apply(sks, [](double x) { return std::log(x); });
      const double half_p = 0.5 * datum.p(static_cast<int>(j));
      grad_sq += half_p * half_p *
                 (Matrix::Identity(sks.rows(), sks.cols()) - sks).squaredNorm();
      dir_sq += dir[j].squaredNorm();
    }
    res.grad_norm = std::sqrt(grad_sq);
    res.iterations = it - 1;
    res.magnitude = magnitude_of(a);

    if (res.grad_norm < 10.0 * policy.conv_tol && damping <= 1.0 &&
        (it == 1 || last_change < policy.conv_tol)) {
      res.status = OptimizerStatus::converged;
      res.log_value = cur.log_q;
      res.value = std::exp(cur.log_q);
      res.final_input = a;
      return res;
    }

    // Backtracking along the geodesic.
    const double dir_norm = std::sqrt(dir_sq);
    GaussianInput cand;
    Evaluation next;
    bool accepted = false;
    while (damping >= kMinDamping) {
      const double t = std::min(damping, kMaxLogStep / std::max(dir_norm, 1e-300));
      cand.blocks.clear();
      for (std::size_t j = 0; j < a.blocks.size(); ++j) {
        const Matrix step = spectral_apply(dir[j], [t](double x) { return std::exp(t * x); });
        cand.blocks.push_back(symmetrized(root[j] * step * root[j]));
      }
      if (global) normalise(cand, datum);
      next = evaluate(datum, cand, g);
      const bool ok = next.finite &&
                      next.log_q >= cur.log_q - 1e-14 * std::max(1.0, std::abs(cur.log_q));
      if (damping == 1.0 && !ok) ++res.nonmonotone_plain_steps;
      if (ok) {
        accepted = true;
        break;
      }
      damping *= 0.5;
    }
    if (!accepted) {
      trace.push_back(cur.log_q);
      throw UndeterminedError("no ascent step found (gradient norm " +
                                  std::to_string(res.grad_norm) + ")",
                              trace);
    }

    // Grow the step while consecutive directions agree, reset otherwise.
    if (!prev_dir.empty()) {
      double dot = 0.0, pn = 0.0;
      for (std::size_t j = 0; j < dir.size(); ++j) {
        dot += (dir[j].array() * prev_dir[j].array()).sum();
        pn += prev_dir[j].squaredNorm();
      }
      const double cosine = dot / std::max(1e-300, std::sqrt(pn) * dir_norm);
      damping = cosine > 0.95 ? std::min(2.0 * damping, 1e12) : std::min(damping, 1.0);
    }
    prev_dir = dir;

    last_change = std::abs(next.log_q - cur.log_q) / std::max(1.0, std::abs(cur.log_q));
    a = std::move(cand);
    cur = std::move(next);
    trace.push_back(cur.log_q);
    res.magnitude = magnitude_of(a);
    res.iterations = it;

    if (res.magnitude > policy.diverge_norm) {
      const bool increasing = last_change > policy.conv_tol;
      if (increasing && (global || res.magnitude > policy.diverge_norm * policy.diverge_norm)) {
        res.status = OptimizerStatus::diverging;
        res.value = kInf;
        res.log_value = kInf;
        res.final_input = a;
        return res;
      }
      if (!increasing) {
        res.status = OptimizerStatus::boundary_plateau;
        res.log_value = cur.log_q;
        res.value = std::exp(cur.log_q);
        res.final_input = a;
        return res;
      }
    }
  }
  throw UndeterminedError("iteration cap reached without classification", trace);
}

OptimizerResult compute_bl_multistart(const BLDatum& datum, const LocalizationMode& mode,
                                      const NumericPolicy& policy, int starts,
                                      std::uint64_t seed) {
  if (starts < 1) throw std::invalid_argument("multistart: need at least one start");
  std::vector<std::future<OptimizerResult>> runs;
  const Rng master(seed);
  for (int s = 0; s < starts; ++s) {
    runs.push_back(std::async(std::launch::async, [&, s] {
      if (s == 0) return compute_bl(datum, mode, policy);
      Rng rng = master.stream(static_cast<std::uint64_t>(s));
      const GaussianInput a0 = GaussianInput::random(datum, rng);
      return compute_bl(datum, mode, policy, &a0);
    }));
  }
  std::vector<OptimizerResult> results;
  for (auto& f : runs) results.push_back(f.get());

  for (const auto& r : results)
    if (r.status == OptimizerStatus::diverging) return r;
  std::size_t best = 0;
  double lo = results[0].value, hi = results[0].value;
  for (std::size_t s = 1; s < results.size(); ++s) {
    lo = std::min(lo, results[s].value);
    hi = std::max(hi, results[s].value);
    if (results[s].value > results[best].value) best = s;
  }
  if ((hi - lo) > 1e-4 * std::max(1.0, std::abs(hi))) {
    std::vector<double> values;
    for (const auto& r : results) values.push_back(r.value);
    throw UndeterminedError("multi-start runs disagree beyond 1e-4", values);
  }
  return results[best];
}

double rank_one_2d_oracle(const BLDatum& datum, double rank_tol) {
  if (datum.n() != 2 || datum.m() != 2 || datum.map(0).target_dim() != 1 ||
      datum.map(1).target_dim() != 1 || datum.p(0) != 1.0 || datum.p(1) != 1.0)
    throw std::invalid_argument("rank_one_2d_oracle: needs two rows on R^2 with p = (1, 1)");
  const Matrix& u = datum.map(0).rows();
  const Matrix& v = datum.map(1).rows();
  const double det = u(0, 0) * v(0, 1) - u(0, 1) * v(0, 0);
  const double scale = std::max(u.norm() * v.norm(), 1e-300);
  if (std::abs(det) < rank_tol * scale) return kInf;
  return 1.0 / std::abs(det);
}

}  // namespace blc
