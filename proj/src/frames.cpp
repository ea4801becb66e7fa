#include "blc/frames.hpp"

#include "blc/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

namespace blc {

namespace {

constexpr double kWeightTol = 1e-12;

std::string idx(int i) { return std::to_string(i + 1); }

// Lexicographically ordered k-subsets of {0..n-1}.
std::vector<IndexSet> combinations(int n, int k) {
  std::vector<IndexSet> out;
  IndexSet cur(static_cast<std::size_t>(k));
  std::iota(cur.begin(), cur.end(), 0);
  if (k > n) return out;
  while (true) {
    out.push_back(cur);
    int i = k - 1;
    while (i >= 0 && cur[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) break;
    ++cur[static_cast<std::size_t>(i)];
    for (int t = i + 1; t < k; ++t)
      cur[static_cast<std::size_t>(t)] = cur[static_cast<std::size_t>(t - 1)] + 1;
  }
  return out;
}

bool prefix_ok(const std::vector<double>& a) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    s += a[k];
    if (s > static_cast<double>(k + 1) + kWeightTol) return false;
  }
  return true;
}

bool tail_ok(const std::vector<double>& a, int ell) {
  const int n = static_cast<int>(a.size());
  double s = 0.0;  // sum of a_i over 0-based i >= k
  for (int k = n; k >= ell; --k) {
    if (k < n) s += a[static_cast<std::size_t>(k)];
    if (s < (n - k) - kWeightTol) return false;
  }
  return true;
}

Matrix columns(const Matrix& basis, const IndexSet& set) {
  Matrix out(basis.rows(), static_cast<Eigen::Index>(set.size()));
  for (std::size_t c = 0; c < set.size(); ++c)
    out.col(static_cast<Eigen::Index>(c)) = basis.col(set[c]);
  return out;
}

double set_wedge(const LinearMap& l, const Matrix& basis, const IndexSet& set) {
  return wedge_magnitude(l.rows() * columns(basis, set));
}

// Eigenpairs of a symmetric matrix in decreasing eigenvalue order.
std::pair<Vector, Matrix> descending_eigen(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(s));
  return {es.eigenvalues().reverse(), es.eigenvectors().rowwise().reverse()};
}

void check_ell(int n, std::optional<int> ell) {
  if (ell && (*ell < 0 || *ell > n)) throw std::invalid_argument("ell must lie in [0, n]");
}

}  // namespace

std::vector<double> IndexTuple::weights(const BLDatum& datum) const {
  std::vector<double> a(static_cast<std::size_t>(datum.n()), 0.0);
  for (std::size_t j = 0; j < sets.size(); ++j)
    for (int i : sets[j]) a[static_cast<std::size_t>(i)] += datum.p(static_cast<int>(j));
  return a;
}

double IndexTuple::tail_weight(const BLDatum& datum, int from) const {
  const auto a = weights(datum);
  return std::accumulate(a.begin() + std::clamp(from, 0, datum.n()), a.end(), 0.0);
}

double IndexTuple::head_weight(const BLDatum& datum, int upto) const {
  const auto a = weights(datum);
  return std::accumulate(a.begin(), a.begin() + std::clamp(upto, 0, datum.n()), 0.0);
}

std::string IndexTuple::to_string() const {
  std::string s = "(";
  for (std::size_t j = 0; j < sets.size(); ++j) {
    if (j) s += ",";
    s += "{";
    for (std::size_t t = 0; t < sets[j].size(); ++t) {
      if (t) s += ",";
      s += idx(sets[j][t]);
    }
    s += "}";
  }
  return s + ")";
}

bool is_near_basis(const NearBasis& v, const Matrix& h0_basis, double tol) {
  const Eigen::Index n = v.vectors.rows();
  if (v.vectors.cols() != n || v.ell < 0 || v.ell > n) return false;
  for (Eigen::Index i = 0; i < n; ++i)
    if (v.vectors.col(i).norm() > 1.0 + tol) return false;
  if (std::abs(v.vectors.determinant()) < v.alpha - tol) return false;
  if (v.ell == n) return true;
  const Matrix off = Matrix::Identity(n, n) - projector(h0_basis);
  return (off * v.vectors.rightCols(n - v.ell)).norm() <= tol;
}

IndexSet greedy_index_set(const LinearMap& map, const Matrix& frame, const NumericPolicy& policy) {
  const int k = static_cast<int>(frame.cols());
  const Matrix img = map.rows() * frame;
  const double scale = std::max(map.norm(), 1e-300);
  IndexSet out;
  int rank = 0;
  for (int i = k - 1; i >= 0; --i) {
    const int r = numerical_rank(img.rightCols(k - i), policy.rank_tol, scale);
    if (r > rank) {
      out.push_back(i);
      rank = r;
    }
  }
  if (rank == 0) throw std::invalid_argument("map vanishes on the frame");
  if (k == map.ambient_dim() && rank != map.target_dim())
    throw std::invalid_argument("map is not surjective");
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<IndexTuple> enumerate_admissible(const BLDatum& datum, std::optional<int> ell) {
  const int n = datum.n();
  if (n > 14) throw std::invalid_argument("index tuple enumeration is limited to n <= 14");
  check_ell(n, ell);
  std::vector<std::vector<IndexSet>> choices;
  for (const auto& l : datum.maps()) choices.push_back(combinations(n, l.target_dim()));

  std::vector<IndexTuple> out;
  IndexTuple cur;
  std::vector<double> a(static_cast<std::size_t>(n), 0.0);
  // Prefix weights only grow as sets are added, so partial tuples can be pruned.
  auto rec = [&](auto&& self, int j) -> void {
    if (j == datum.m()) {
      if (!ell || tail_ok(a, *ell)) out.push_back(cur);
      return;
    }
    for (const auto& set : choices[static_cast<std::size_t>(j)]) {
      for (int i : set) a[static_cast<std::size_t>(i)] += datum.p(j);
      if (prefix_ok(a)) {
        cur.sets.push_back(set);
        self(self, j + 1);
        cur.sets.pop_back();
      }
      for (int i : set) a[static_cast<std::size_t>(i)] -= datum.p(j);
    }
  };
  rec(rec, 0);
  return out;
}

bool is_admissible(const BLDatum& datum, const IndexTuple& t, std::optional<int> ell) {
  if (static_cast<int>(t.sets.size()) != datum.m()) return false;
  for (int j = 0; j < datum.m(); ++j) {
    const auto& s = t.sets[static_cast<std::size_t>(j)];
    if (static_cast<int>(s.size()) != datum.map(j).target_dim()) return false;
    if (!std::is_sorted(s.begin(), s.end()) ||
        std::adjacent_find(s.begin(), s.end()) != s.end())
      return false;
    if (!s.empty() && (s.front() < 0 || s.back() >= datum.n())) return false;
  }
  const auto a = t.weights(datum);
  return prefix_ok(a) && (!ell || tail_ok(a, *ell));
}

double tuple_wedge(const BLDatum& datum, const Matrix& basis, const IndexTuple& t) {
  double w = std::numeric_limits<double>::infinity();
  for (int j = 0; j < datum.m(); ++j)
    w = std::min(w, set_wedge(datum.map(j), basis, t.sets[static_cast<std::size_t>(j)]));
  return w;
}

HValue h_value(const BLDatum& datum, const Matrix& basis, const std::vector<IndexTuple>& tuples) {
  HValue best;
  bool first = true;
  for (const auto& t : tuples) {
    const double w = tuple_wedge(datum, basis, t);
    if (first || w > best.value + 1e-12) {
      best = {w, t};
      first = false;
    }
  }
  return best;
}

HValue h_value(const BLDatum& datum, const Matrix& basis, std::optional<int> ell) {
  return h_value(datum, basis, enumerate_admissible(datum, ell));
}

std::optional<NearBasis> sample_near_basis(Rng& rng, int n, int ell, double alpha,
                                           const Matrix& h0_basis, int tries) {
  const int tail = n - ell;
  const int k0 = static_cast<int>(h0_basis.cols());
  if (tail < 0 || tail > k0)
    throw std::invalid_argument("near basis: ell must be at least n - dim H_0");
  for (int attempt = 0; attempt < tries; ++attempt) {
    // Orthonormal basis whose last `tail` columns span a random subspace of H_0 ...
    Matrix v(n, n);
    if (tail > 0) v.rightCols(tail) = h0_basis * random_stiefel(rng, k0, tail);
    if (ell > 0) {
      Matrix g = rng.gaussian(n, ell);
      if (tail > 0) g -= projector(v.rightCols(tail)) * g;
      Eigen::HouseholderQR<Matrix> qr(g);
      v.leftCols(ell) = qr.householderQ() * Matrix::Identity(n, ell);
    }
    // ... then shrunk and tilted, keeping tail columns inside H_0.
    const double shrink = 1.0 - std::pow(alpha, 1.0 / n);
    const double eps = 0.5 * rng.uniform();
    for (int i = 0; i < n; ++i) {
      Vector col = v.col(i) * (1.0 - shrink * rng.uniform());
      if (i < ell)
        col += eps * rng.gaussian(n, 1).col(0) / std::sqrt(static_cast<double>(n));
      else
        col += eps * h0_basis * rng.gaussian(k0, 1).col(0) / std::sqrt(static_cast<double>(n));
      const double norm = col.norm();
      if (norm > 1.0) col /= norm;
      v.col(i) = col;
    }
    if (std::abs(v.determinant()) >= alpha) return NearBasis{v, alpha, ell};
  }
  return std::nullopt;
}

CEstimate estimate_c(const BLDatum& datum, std::optional<int> ell, double alpha, int samples,
                     std::uint64_t seed, const Matrix& h0_basis) {
  if (samples < 1) throw std::invalid_argument("estimate_c needs at least one sample");
  const int n = datum.n();
  check_ell(n, ell);
  if (ell && !(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  const auto tuples = enumerate_admissible(datum, ell);
  const Rng master(seed);
  std::vector<double> h(static_cast<std::size_t>(samples));
  std::vector<Matrix> frames(static_cast<std::size_t>(samples));
  parallel_for(samples, [&](int i) {
    Rng rng = master.stream(static_cast<std::uint64_t>(i));
    Matrix frame;
    if (!ell) {
      frame = random_stiefel(rng, n, n);
    } else {
      auto v = sample_near_basis(rng, n, *ell, alpha, h0_basis, 100);
      if (!v)
        throw std::runtime_error(
            "near-basis sampler rejected 100 draws in a row; increase the gap 1 - alpha");
      frame = std::move(v->vectors);
    }
    h[static_cast<std::size_t>(i)] = h_value(datum, frame, tuples).value;
    frames[static_cast<std::size_t>(i)] = std::move(frame);
  });
  const auto it = std::min_element(h.begin(), h.end());
  const auto at = static_cast<std::size_t>(it - h.begin());
  CEstimate est;
  est.c_hat = *it;
  est.worst = frames[at];
  est.samples = samples;
  est.ell = ell;
  est.sampler = ell ? "near-basis: random adapted orthonormal basis, column shrink in "
                      "[alpha^(1/n), 1], Gaussian tilt up to 0.5, norm clamp, det rejection"
                    : "haar: QR of a Gaussian matrix";
  return est;
}

CEstimate estimate_c_partial(const BLDatum& datum, const PartialLocalization& loc, double alpha,
                             int samples, std::uint64_t seed) {
  const int n = datum.n();
  const int k0 = static_cast<int>(loc.H0_basis.cols());
  CEstimate best;
  best.c_hat = std::numeric_limits<double>::infinity();
  for (int ell = n - k0; ell <= n; ++ell) {
    auto e = estimate_c(datum, ell, alpha, samples, derive_seed(seed, static_cast<std::uint64_t>(ell)),
                        loc.H0_basis);
    if (e.c_hat < best.c_hat) best = std::move(e);
  }
  return best;
}

double openness_margin(const BLDatum& datum, int k, int samples, std::uint64_t seed,
                       const NumericPolicy& policy) {
  const int n = datum.n();
  if (k < 1 || k > n) throw std::invalid_argument("openness margin needs 1 <= k <= n");
  auto margin = [&](const Matrix& frame) {
    double s = -k;
    for (int j = 0; j < datum.m(); ++j) {
      const auto& l = datum.map(j);
      s += datum.p(j) * numerical_rank(l.rows() * frame, policy.rank_tol, std::max(l.norm(), 1e-300));
    }
    return s;
  };
  double best = std::numeric_limits<double>::infinity();
  const Rng master(seed);
  for (int i = 0; i < samples; ++i) {
    Rng rng = master.stream(static_cast<std::uint64_t>(i));
    best = std::min(best, margin(random_stiefel(rng, n, k)));
  }
  if (n <= 14)
    for (const auto& set : combinations(n, k))
      best = std::min(best, margin(columns(Matrix::Identity(n, n), set)));
  std::vector<Subspace> kernels;
  for (const auto& l : datum.maps()) kernels.emplace_back(kernel_basis(l, policy));
  for (const auto& v : lattice_closure(kernels, policy))
    if (v.dim() == k) best = std::min(best, margin(v.basis()));
  return best;
}

bool CertificateTrace::check_le(std::string label, double lhs, double rhs) {
  const bool ok = std::isfinite(lhs) && std::isfinite(rhs) &&
                  lhs <= rhs + 1e-9 * std::max(std::abs(lhs), std::abs(rhs));
  record(std::move(label), lhs, rhs, ok);
  return ok;
}

void CertificateTrace::record(std::string label, double lhs, double rhs, bool ok) {
  steps.push_back({std::move(label), lhs, rhs, ok});
  overall_ok = overall_ok && ok;
}

std::string CertificateTrace::to_jsonl() const {
  std::ostringstream out;
  for (const auto& s : steps) {
    const nlohmann::json j = {{"label", s.label}, {"lhs", s.lhs}, {"rhs", s.rhs}, {"ok", s.ok}};
    out << j.dump() << '\n';
  }
  return out.str();
}

namespace {

struct Setup {
  Matrix m;
  Vector mu;
  Matrix e;
  double lhs = 1.0;  // prod det(A_j)^{p_j}
  double sum_p = 0.0;
  double log_p_weight = 0.0;  // sum p_j n_j log p_j
};

Setup prepare(const BLDatum& datum, const GaussianInput& a, const Matrix& g) {
  require_positive_exponents(datum);
  a.check(datum);
  Setup s;
  s.m = Matrix::Zero(datum.n(), datum.n());
  for (int j = 0; j < datum.m(); ++j) {
    const Matrix& l = datum.map(j).rows();
    const Matrix& aj = a.blocks[static_cast<std::size_t>(j)];
    s.m += datum.p(j) * l.transpose() * aj * l;
    s.lhs *= std::pow(aj.determinant(), datum.p(j));
    s.sum_p += datum.p(j);
    s.log_p_weight += datum.p(j) * datum.map(j).target_dim() * std::log(datum.p(j));
  }
  std::tie(s.mu, s.e) = descending_eigen(s.m + g);
  return s;
}

// <A_j L_j e_i, L_j e_i> for every j and i.
Matrix quadratic_forms(const BLDatum& datum, const GaussianInput& a, const Matrix& e) {
  Matrix q(datum.m(), e.cols());
  for (int j = 0; j < datum.m(); ++j) {
    const Matrix le = datum.map(j).rows() * e;
    const Matrix& aj = a.blocks[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < e.cols(); ++i) q(j, i) = le.col(i).dot(aj * le.col(i));
  }
  return q;
}

void check_quadratic_forms(CertificateTrace& t, const BLDatum& datum, const Matrix& q,
                           const Vector& mu) {
  for (int j = 0; j < datum.m(); ++j)
    for (Eigen::Index i = 0; i < q.cols(); ++i)
      t.check_le("<A L e, L e> <= mu/p  j=" + idx(j) + " i=" + idx(static_cast<int>(i)), q(j, i),
                 mu(i) / datum.p(j));
}

// Diagonal-entry bound and its eigenvalue form for each j, using wedge
// magnitudes `wedge` on the frame e and the wedge lower bound `c`.
void check_determinants(CertificateTrace& t, const BLDatum& datum, const GaussianInput& a,
                        const IndexTuple& tuple, const Matrix& q, const Vector& mu,
                        const std::vector<double>& wedge, double c) {
  for (int j = 0; j < datum.m(); ++j) {
    const double det = a.blocks[static_cast<std::size_t>(j)].determinant();
    double diag = 1.0, eig = 1.0;
    for (int i : tuple.sets[static_cast<std::size_t>(j)]) {
      diag *= q(j, i);
      eig *= mu(i);
    }
    const double w = wedge[static_cast<std::size_t>(j)];
    t.check_le("det A <= wedge^-2 prod diagonal  j=" + idx(j), det, diag / (w * w));
    t.check_le("det A <= (c^2 p^n_j)^-1 prod mu  j=" + idx(j), det,
               eig / (c * c * std::pow(datum.p(j), datum.map(j).target_dim())));
  }
}

void check_prefix(CertificateTrace& t, const std::string& what, const std::vector<double>& a) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    s += a[k];
    t.check_le(what + " prefix weight <= k  k=" + std::to_string(k + 1), s,
               static_cast<double>(k + 1) + kWeightTol);
  }
}

double weighted_mu_product(const Vector& mu, const std::vector<double>& a, int from, int to) {
  double p = 1.0;
  for (int i = from; i < to; ++i) p *= std::pow(mu(i), a[static_cast<std::size_t>(i)]);
  return p;
}

double mu_product(const Vector& mu, int from, int to) {
  double p = 1.0;
  for (int i = from; i < to; ++i) p *= mu(i);
  return p;
}

}  // namespace

CertificateTrace certify_localized(const BLDatum& datum, const GaussianInput& a, double c_hat,
                                   const NumericPolicy& policy) {
  if (!(c_hat > 0.0)) throw std::invalid_argument("certificate needs c_hat > 0");
  const int n = datum.n();
  const Setup s = prepare(datum, a, Matrix::Identity(n, n));
  CertificateTrace t;
  t.branch = "localized";
  t.record("smallest eigenvalue of M+I exceeds 1", 1.0 - 1e-9, s.mu(n - 1),
           s.mu(n - 1) > 1.0 - 1e-9);

  IndexTuple greedy;
  try {
    for (const auto& l : datum.maps()) greedy.sets.push_back(greedy_index_set(l, s.e, policy));
    check_prefix(t, "greedy", greedy.weights(datum));
  } catch (const std::invalid_argument& err) {
    t.record(std::string("greedy selection: ") + err.what(), 0.0, 0.0, false);
  }

  const HValue h = h_value(datum, s.e, std::nullopt);
  if (h.tuple.empty()) {
    t.record("admissible tuple exists", 0.0, 0.0, false);
    return t;
  }
  const auto a_w = h.tuple.weights(datum);
  check_prefix(t, "selected", a_w);
  std::vector<double> wedge;
  for (int j = 0; j < datum.m(); ++j) {
    wedge.push_back(set_wedge(datum.map(j), s.e, h.tuple.sets[static_cast<std::size_t>(j)]));
    t.check_le("c <= wedge  j=" + idx(j), c_hat, wedge.back());
  }
  const Matrix q = quadratic_forms(datum, a, s.e);
  check_quadratic_forms(t, datum, q, s.mu);
  check_determinants(t, datum, a, h.tuple, q, s.mu, wedge, c_hat);

  const double k_const = std::exp(2.0 * s.sum_p * std::log(c_hat) + s.log_p_weight);
  const double weighted = weighted_mu_product(s.mu, a_w, 0, n);
  t.check_le("prod det^p <= K^-1 prod mu^a", s.lhs, weighted / k_const);

  double prefix = 0.0, factors = 1.0;
  for (int k = 0; k < n; ++k) {
    prefix += a_w[static_cast<std::size_t>(k)];
    const double next = k + 1 < n ? s.mu(k + 1) : 1.0;
    const double f = std::pow(next / s.mu(k), (k + 1) - prefix);
    factors *= f;
    t.check_le("telescoping factor <= 1  k=" + std::to_string(k + 1), f, 1.0);
  }
  const double det = mu_product(s.mu, 0, n);
  const double rebuilt = det * factors;
  t.record("prod mu^a = det(M+I) prod factors", weighted, rebuilt,
           std::abs(weighted - rebuilt) <= 1e-9 * std::max(weighted, rebuilt));

  t.constant_used = 1.0 / k_const;
  t.check_le("prod det^p <= C det(M+I)", s.lhs, t.constant_used * det);
  return t;
}

CertificateTrace certify_partial(const BLDatum& datum, const PartialLocalization& loc,
                                 const GaussianInput& a, double alpha, double c_hat,
                                 double deltahat, const NumericPolicy& policy) {
  (void)policy;
  if (!(c_hat > 0.0)) throw std::invalid_argument("certificate needs c_hat > 0");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (!(deltahat >= 0.0)) throw std::invalid_argument("deltahat must be non-negative");
  const int n = datum.n();
  if (loc.G.rows() != n) throw StructuralError("partial localisation has the wrong dimension");
  const int k0 = static_cast<int>(loc.H0_basis.cols());
  const Matrix g = loc.normalized_projection();
  const Setup s = prepare(datum, a, g);
  CertificateTrace t;

  double worst = 0.0;
  for (const auto& l : datum.maps())
    worst = std::max(worst, l.target_dim() * std::pow(l.norm() + deltahat, l.target_dim()));
  const double g1 = std::pow((1.0 - alpha) / n, 2.0);
  const double g2 = std::pow(c_hat / (2.0 * worst), 2.0);
  const double gamma = std::min(g1, g2);
  t.check_le("gamma <= ((1-alpha)/n)^2", gamma, g1);
  t.check_le("gamma <= (c / (2 max n_j (|L_j|+delta)^n_j))^2", gamma, g2);

  const Matrix q = quadratic_forms(datum, a, s.e);
  check_quadratic_forms(t, datum, q, s.mu);
  const double sum_pn = datum.weighted_target_dim();

  if (s.mu(n - 1) >= gamma) {
    t.branch = "large-eigenvalues";
    t.check_le("gamma <= smallest eigenvalue", gamma, s.mu(n - 1));
    const HValue h = h_value(datum, s.e, n);
    if (h.tuple.empty()) {
      t.record("admissible tuple exists", 0.0, 0.0, false);
      return t;
    }
    const auto a_w = h.tuple.weights(datum);
    check_prefix(t, "selected", a_w);
    std::vector<double> wedge;
    for (int j = 0; j < datum.m(); ++j) {
      wedge.push_back(set_wedge(datum.map(j), s.e, h.tuple.sets[static_cast<std::size_t>(j)]));
      t.check_le("c <= wedge  j=" + idx(j), c_hat, wedge.back());
    }
    check_determinants(t, datum, a, h.tuple, q, s.mu, wedge, c_hat);
    const double k_const = std::exp(2.0 * s.sum_p * std::log(c_hat) + s.log_p_weight);
    t.check_le("prod det^p <= K^-1 prod mu^a", s.lhs, weighted_mu_product(s.mu, a_w, 0, n) / k_const);
    double prefix = 0.0;
    for (int k = 0; k < n; ++k) {
      prefix += a_w[static_cast<std::size_t>(k)];
      const double next = k + 1 < n ? s.mu(k + 1) : gamma;
      t.check_le("telescoping factor <= 1  k=" + std::to_string(k + 1),
                 std::pow(next / s.mu(k), (k + 1) - prefix), 1.0);
    }
    t.constant_used = std::pow(gamma, sum_pn - n) / k_const;
    t.check_le("prod det^p <= gamma^(sum p n - n) C det(M+G)", s.lhs,
               t.constant_used * mu_product(s.mu, 0, n));
    return t;
  }

  t.branch = "small-eigenvalues";
  int ell = 0;  // 0-based index of the first eigenvalue below gamma
  while (s.mu(ell) >= gamma) ++ell;
  // In 1-based terms the first small eigenvalue sits at ell + 1, and the
  // columns from there on are moved into H_0.
  if (!t.check_le("n - dim H0 <= l - 1", n - k0, ell)) return t;

  Matrix v = s.e;
  for (int i = ell; i < n; ++i) v.col(i) = s.e.col(i) - g * s.e.col(i);
  const double root = std::sqrt(gamma);
  for (int i = 0; i < n; ++i) {
    t.check_le("|v_i| <= 1  i=" + idx(i), v.col(i).norm(), 1.0);
    t.check_le("|e_i - v_i| <= gamma^1/2  i=" + idx(i), (s.e.col(i) - v.col(i)).norm(), root);
    if (i >= ell) t.check_le("v_i in H0  i=" + idx(i), (g * v.col(i)).norm(), 1e-12);
  }
  const double vol = std::abs(v.determinant());
  t.check_le("1 - n gamma^1/2 <= |wedge v|", 1.0 - n * root, vol);
  t.check_le("alpha <= 1 - n gamma^1/2", alpha, 1.0 - n * root);

  const HValue h = h_value(datum, v, ell);
  if (h.tuple.empty()) {
    t.record("admissible tuple exists", 0.0, 0.0, false);
    return t;
  }
  const auto a_w = h.tuple.weights(datum);
  check_prefix(t, "selected", a_w);
  for (int k = ell; k <= n; ++k)
    t.check_le("tail weight >= n - k  k=" + std::to_string(k), n - k,
               h.tuple.tail_weight(datum, k) + kWeightTol);

  std::vector<double> wedge_e;
  for (int j = 0; j < datum.m(); ++j) {
    const auto& set = h.tuple.sets[static_cast<std::size_t>(j)];
    const auto& l = datum.map(j);
    const double wv = set_wedge(l, v, set);
    const double we = set_wedge(l, s.e, set);
    t.check_le("c <= wedge on v  j=" + idx(j), c_hat, wv);
    t.check_le("|wedge v - wedge e| <= n_j |L_j|^n_j gamma^1/2  j=" + idx(j), std::abs(wv - we),
               l.target_dim() * std::pow(l.norm(), l.target_dim()) * root);
    t.check_le("c/2 <= wedge on e  j=" + idx(j), 0.5 * c_hat, we);
    wedge_e.push_back(we);
  }
  check_determinants(t, datum, a, h.tuple, q, s.mu, wedge_e, 0.5 * c_hat);
  const double k_const = std::exp(2.0 * s.sum_p * std::log(0.5 * c_hat) + s.log_p_weight);
  t.check_le("prod det^p <= K^-1 prod mu^a", s.lhs, weighted_mu_product(s.mu, a_w, 0, n) / k_const);

  const double head = h.tuple.head_weight(datum, ell);
  t.check_le("prod_{i<l} mu^a <= gamma^(a_head - (l-1)) prod_{i<l} mu",
             weighted_mu_product(s.mu, a_w, 0, ell),
             std::pow(gamma, head - ell) * mu_product(s.mu, 0, ell));
  for (int i = ell + 1; i < n; ++i)
    t.check_le("a_{>=i+1} >= n - i  i=" + std::to_string(i), n - i,
               h.tuple.tail_weight(datum, i) + kWeightTol);
  const double a_tail = h.tuple.tail_weight(datum, ell);
  const double mu_l = s.mu(ell);
  t.check_le("prod_{i>=l} mu^a <= mu_l^(a_tail - (n-l+1)) prod_{i>=l} mu",
             weighted_mu_product(s.mu, a_w, ell, n),
             std::pow(mu_l, a_tail - (n - ell)) * mu_product(s.mu, ell, n));
  t.check_le("a_{>=l} >= n - l + 1", n - ell, a_tail + kWeightTol);
  t.check_le("mu_l^(a_tail - (n-l+1)) <= 1", std::pow(mu_l, a_tail - (n - ell)), 1.0);

  t.constant_used = std::pow(gamma, head - ell) / k_const;
  t.check_le("prod det^p <= gamma^(a_head - (l-1)) C det(M+G)", s.lhs,
             t.constant_used * mu_product(s.mu, 0, n));
  return t;
}

}  // namespace blc
