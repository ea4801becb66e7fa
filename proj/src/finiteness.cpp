#include "blc/finiteness.hpp"

#include "blc/io.hpp"
#include "blc/random.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

namespace blc {

Subspace::Subspace(Matrix orthonormal_basis) : basis_(std::move(orthonormal_basis)) {
  const Eigen::Index k = basis_.cols();
  if (k > basis_.rows()) throw std::invalid_argument("subspace: more basis vectors than dimensions");
  if (k > 0 && (basis_.transpose() * basis_ - Matrix::Identity(k, k)).cwiseAbs().maxCoeff() > 1e-8)
    throw std::invalid_argument("subspace: basis is not orthonormal");
}

Subspace Subspace::span(const Matrix& vectors, double rank_tol) {
  const double scale = vectors.cols() ? std::max(operator_norm(vectors), 1e-300) : 1.0;
  return Subspace(column_span(vectors, rank_tol, scale));
}

bool Subspace::contains(const Subspace& other, double tol) const {
  if (other.dim() > dim()) return false;
  return (other.basis() - projector() * other.basis()).norm() <= tol;
}

Subspace subspace_sum(const Subspace& a, const Subspace& b, double rank_tol) {
  Matrix joined(a.ambient_dim(), a.dim() + b.dim());
  joined << a.basis(), b.basis();
  return Subspace(column_span(joined, rank_tol, 1.0));
}

Subspace subspace_intersection(const Subspace& a, const Subspace& b, double rank_tol) {
  const int n = a.ambient_dim();
  Matrix stacked(2 * n, n);
  stacked << Matrix::Identity(n, n) - a.projector(), Matrix::Identity(n, n) - b.projector();
  return Subspace(null_space(stacked, rank_tol, 1.0));
}

PartialLocalization PartialLocalization::from_weight(const Matrix& g, const NumericPolicy& policy) {
  if (g.rows() != g.cols()) throw StructuralError("partial localisation: G must be square");
  if (!is_symmetric(g, 1e-10))
    throw std::invalid_argument("partial localisation: G must be symmetric");
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  if (min_eigenvalue(g) < -1e-10 * scale)
    throw std::invalid_argument("partial localisation: G must be positive semi-definite");
  const Matrix gs = symmetrized(g);
  return {gs, null_space(gs, policy.rank_tol, scale)};
}

Matrix PartialLocalization::normalized_projection() const {
  const Eigen::Index n = G.rows();
  return Matrix::Identity(n, n) - H0_basis * H0_basis.transpose();
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::witnessed_infinite:
      return "witnessed-infinite";
    case Verdict::no_violation_found:
      return "no-violation-found";
    case Verdict::certified_finite_special_case:
      return "certified-finite-special-case";
  }
  return "?";
}

std::string to_string(SearchMethod m) {
  switch (m) {
    case SearchMethod::kernel_lattice:
      return "kernel-lattice";
    case SearchMethod::coordinate:
      return "coordinate";
    case SearchMethod::random_search:
      return "random-search";
  }
  return "?";
}

nlohmann::json to_json(const FinitenessReport& r) {
  nlohmann::json j;
  j["scaling_slack"] = r.scaling_slack;
  j["verdict"] = to_string(r.verdict);
  j["min_slack"] = r.min_slack;
  j["witness"] = r.witness ? io::matrix_to_json(r.witness->basis()) : nlohmann::json(nullptr);
  j["method"] = to_string(r.method);
  return j;
}

double check_scaling(const BLDatum& datum) { return datum.weighted_target_dim() - datum.n(); }

namespace {

int image_dim(const LinearMap& l, const Subspace& v, const NumericPolicy& policy) {
  if (v.dim() == 0) return 0;
  return numerical_rank(l.rows() * v.basis(), policy.rank_tol, std::max(l.norm(), 1e-300));
}

// Identifies a subspace by its projector rounded to 1e-7.
std::vector<long long> fingerprint(const Subspace& v) {
  const Matrix p = v.projector();
  std::vector<long long> key;
  key.reserve(static_cast<std::size_t>(p.size()) + 1);
  key.push_back(v.dim());
  for (Eigen::Index i = 0; i < p.size(); ++i)
    key.push_back(std::llround(p.data()[i] * 1e7));
  return key;
}

class CandidatePool {
 public:
  explicit CandidatePool(std::size_t cap) : cap_(cap) {}

  bool add(const Subspace& v, SearchMethod source) {
    if (entries_.size() >= cap_) return false;
    auto key = fingerprint(v);
    if (index_.count(key)) return false;
    index_.emplace(key, entries_.size());
    entries_.push_back({v, source, std::move(key)});
    return true;
  }
  std::size_t size() const { return entries_.size(); }

  struct Entry {
    Subspace v;
    SearchMethod source;
    std::vector<long long> key;
  };
  /// Deterministic (dimension, fingerprint) order.
  std::vector<Entry> sorted() const {
    std::vector<Entry> out = entries_;
    std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) { return a.key < b.key; });
    return out;
  }

 private:
  std::size_t cap_;
  std::map<std::vector<long long>, std::size_t> index_;
  std::vector<Entry> entries_;
};

std::vector<Subspace> kernel_generators(const BLDatum& datum, const NumericPolicy& policy) {
  std::vector<Subspace> gens;
  for (const auto& l : datum.maps()) gens.emplace_back(kernel_basis(l, policy));
  return gens;
}

// Coordinate subspaces spanned by subsets of the columns of `frame` (all
// subsets, so only for frames with at most 12 columns).
void add_coordinate(CandidatePool& pool, const Matrix& frame) {
  const int k = static_cast<int>(frame.cols());
  if (k > 12) return;
  for (unsigned mask = 0; mask < (1u << k); ++mask) {
    Matrix cols(frame.rows(), std::popcount(mask));
    for (int i = 0, c = 0; i < k; ++i)
      if (mask & (1u << i)) cols.col(c++) = frame.col(i);
    pool.add(Subspace(cols), SearchMethod::coordinate);
  }
}

void add_random(CandidatePool& pool, const Matrix& frame, int budget, std::uint64_t seed) {
  const int k = static_cast<int>(frame.cols());
  const Rng master(seed);
  for (int dim = 1; dim < k; ++dim)
    for (int i = 0; i < budget; ++i) {
      Rng rng = master.stream(static_cast<std::uint64_t>(dim) * 1000003ULL + static_cast<std::uint64_t>(i));
      pool.add(Subspace(frame * random_stiefel(rng, k, dim)), SearchMethod::random_search);
    }
}

struct Best {
  double slack = std::numeric_limits<double>::infinity();
  std::optional<Subspace> v;
  SearchMethod method = SearchMethod::kernel_lattice;
  std::string condition;
};

template <typename SlackFn>
void scan(const CandidatePool& pool, SlackFn&& slack, const std::string& condition, Best& best) {
  for (const auto& e : pool.sorted()) {
    const auto [s, cond] = slack(e.v);
    if (s < best.slack) {
      best.slack = s;
      best.v = e.v;
      best.method = e.source;
      best.condition = cond.empty() ? condition : cond;
    }
  }
}

FinitenessReport finish(const BLDatum& datum, const Best& best, int candidates,
                        const NumericPolicy& policy) {
  FinitenessReport r;
  r.scaling_slack = check_scaling(datum);
  r.min_slack = best.slack;
  r.argmin = best.v;
  r.method = best.method;
  r.condition = best.condition;
  r.candidates = candidates;
  if (best.slack < -10.0 * policy.rank_tol) {
    r.verdict = Verdict::witnessed_infinite;
    r.witness = best.v;
  } else if (datum.n() == 1) {
    // Every subspace of R^1 ({0} and R^1) is among the candidates.
    r.verdict = Verdict::certified_finite_special_case;
  } else {
    r.verdict = Verdict::no_violation_found;
  }
  return r;
}

}  // namespace

double dimension_slack(const BLDatum& datum, const Subspace& v, const NumericPolicy& policy) {
  if (v.ambient_dim() != datum.n()) throw StructuralError("subspace lives in the wrong space");
  double s = -v.dim();
  for (int j = 0; j < datum.m(); ++j) s += datum.p(j) * image_dim(datum.map(j), v, policy);
  return s;
}

double codimension_slack(const BLDatum& datum, const Subspace& v, const NumericPolicy& policy) {
  if (v.ambient_dim() != datum.n()) throw StructuralError("subspace lives in the wrong space");
  double s = v.codim();
  for (int j = 0; j < datum.m(); ++j)
    s -= datum.p(j) * (datum.map(j).target_dim() - image_dim(datum.map(j), v, policy));
  return s;
}

std::vector<Subspace> lattice_closure(const std::vector<Subspace>& generators,
                                      const NumericPolicy& policy, std::size_t cap) {
  if (generators.empty()) return {};
  const int n = generators.front().ambient_dim();
  CandidatePool pool(cap);
  std::vector<Subspace> all;
  auto push = [&](const Subspace& v) {
    if (pool.add(v, SearchMethod::kernel_lattice)) all.push_back(v);
  };
  push(Subspace::zero(n));
  push(Subspace::whole(n));
  for (const auto& g : generators) push(g);
  // Combine every new element with everything seen so far until nothing new appears.
  std::size_t done = 0;
  while (done < all.size() && pool.size() < cap) {
    const std::size_t frontier = all.size();
    for (std::size_t i = done; i < frontier && pool.size() < cap; ++i)
      for (std::size_t k = 0; k < i && pool.size() < cap; ++k) {
        push(subspace_sum(all[i], all[k], policy.rank_tol));
        push(subspace_intersection(all[i], all[k], policy.rank_tol));
      }
    done = frontier;
  }
  return all;
}

FinitenessReport search_critical_subspaces(const BLDatum& datum, FinitenessMode mode, int budget,
                                           std::uint64_t seed, const NumericPolicy& policy) {
  if (budget < 1) throw std::invalid_argument("search budget must be >= 1");
  const int n = datum.n();
  CandidatePool pool(1u << 20);
  for (const auto& v : lattice_closure(kernel_generators(datum, policy), policy))
    pool.add(v, SearchMethod::kernel_lattice);
  if (n <= 12) add_coordinate(pool, Matrix::Identity(n, n));
  add_random(pool, Matrix::Identity(n, n), budget, seed);

  Best best;
  if (mode == FinitenessMode::global) {
    const double upper = n - datum.weighted_target_dim();  // codimension slack of {0}
    scan(pool,
         [&](const Subspace& v) -> std::pair<double, std::string> {
           const double s = dimension_slack(datum, v, policy);
           if (v.dim() == 0 && upper < s) return {upper, "scaling"};
           if (v.dim() == n) return {s, "scaling"};
           return {s, ""};
         },
         "dimension", best);
  } else {
    scan(pool,
         [&](const Subspace& v) -> std::pair<double, std::string> {
           return {codimension_slack(datum, v, policy), ""};
         },
         "codimension", best);
  }
  return finish(datum, best, static_cast<int>(pool.size()), policy);
}

FinitenessReport check_partial(const BLDatum& datum, const PartialLocalization& loc, int budget,
                               std::uint64_t seed, const NumericPolicy& policy) {
  if (budget < 1) throw std::invalid_argument("search budget must be >= 1");
  const int n = datum.n();
  if (loc.G.rows() != n || loc.H0_basis.rows() != n)
    throw StructuralError("partial localisation has the wrong dimension");
  const Subspace h0(loc.H0_basis);

  auto gens = kernel_generators(datum, policy);
  gens.push_back(h0);
  const auto lattice = lattice_closure(gens, policy);

  // Dimension condition over subspaces of H_0.
  CandidatePool inside(1u << 20);
  for (const auto& v : lattice)
    if (h0.contains(v, 1e-8)) inside.add(v, SearchMethod::kernel_lattice);
  add_coordinate(inside, loc.H0_basis);
  add_random(inside, loc.H0_basis, budget, seed);

  // Codimension condition over all subspaces.
  CandidatePool everywhere(1u << 20);
  for (const auto& v : lattice) everywhere.add(v, SearchMethod::kernel_lattice);
  if (n <= 12) add_coordinate(everywhere, Matrix::Identity(n, n));
  add_random(everywhere, Matrix::Identity(n, n), budget, derive_seed(seed, 1));

  Best best;
  scan(inside,
       [&](const Subspace& v) -> std::pair<double, std::string> {
         return {dimension_slack(datum, v, policy), ""};
       },
       "dimension", best);
  scan(everywhere,
       [&](const Subspace& v) -> std::pair<double, std::string> {
         return {codimension_slack(datum, v, policy), ""};
       },
       "codimension", best);
  return finish(datum, best, static_cast<int>(inside.size() + everywhere.size()), policy);
}

}  // namespace blc
