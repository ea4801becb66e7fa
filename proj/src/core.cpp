#include "blc/core.hpp"

#include <cmath>
#include <sstream>

namespace blc {

void NumericPolicy::check() const {
  if (!(rank_tol > 0.0) || !(conv_tol > 0.0) || !(diverge_norm > 0.0))
    throw std::invalid_argument("numeric policy: tolerances must be strictly positive");
  if (max_iter < 1) throw std::invalid_argument("numeric policy: max_iter must be >= 1");
  if (grid_res < 1) throw std::invalid_argument("numeric policy: grid_res must be >= 1");
}

LinearMap::LinearMap(Matrix rows) : rows_(std::move(rows)) {
  if (rows_.rows() < 1 || rows_.cols() < 1)
    throw StructuralError("linear map must have at least one row and one column");
  if (!rows_.allFinite()) throw StructuralError("linear map has non-finite entries");
}

BLDatum::BLDatum(int n, std::vector<LinearMap> maps, std::vector<double> exponents)
    : n_(n), maps_(std::move(maps)), exponents_(std::move(exponents)) {
  if (n_ < 1) throw StructuralError("ambient dimension must be >= 1");
  if (maps_.empty()) throw StructuralError("datum needs at least one map");
  if (maps_.size() != exponents_.size()) {
    std::ostringstream os;
    os << "datum has " << maps_.size() << " maps but " << exponents_.size()
       << " exponents";
    throw StructuralError(os.str());
  }
  for (std::size_t j = 0; j < maps_.size(); ++j) {
    if (maps_[j].ambient_dim() != n_) {
      std::ostringstream os;
      os << "map " << j << " acts on R^" << maps_[j].ambient_dim()
         << " but the datum lives on R^" << n_;
      throw StructuralError(os.str());
    }
    if (!std::isfinite(exponents_[j]))
      throw StructuralError("exponent " + std::to_string(j) + " is not finite");
  }
}

Matrix BLDatum::stacked() const {
  Eigen::Index total = 0;
  for (const auto& l : maps_) total += l.target_dim();
  Matrix s(total, n_);
  Eigen::Index row = 0;
  for (const auto& l : maps_) {
    s.middleRows(row, l.target_dim()) = l.rows();
    row += l.target_dim();
  }
  return s;
}

double BLDatum::weighted_target_dim() const {
  double s = 0.0;
  for (int j = 0; j < m(); ++j) s += p(j) * map(j).target_dim();
  return s;
}

int BLDatum::max_target_dim() const {
  int best = 0;
  for (const auto& l : maps_) best = std::max(best, l.target_dim());
  return best;
}

ValidationReport validate_datum(const BLDatum& datum, const NumericPolicy& policy) {
  ValidationReport report;
  auto flag = [&](std::string code, std::optional<int> j, std::string detail) {
    report.violations.push_back({std::move(code), j, std::move(detail)});
  };
  for (int j = 0; j < datum.m(); ++j) {
    const LinearMap& l = datum.map(j);
    if (l.target_dim() > datum.n())
      flag("target-dim-out-of-range", j,
           "n_j = " + std::to_string(l.target_dim()) + " exceeds n");
    const int r = numerical_rank(l.rows(), policy.rank_tol);
    if (r != l.target_dim())
      flag("not-surjective", j,
           "rank " + std::to_string(r) + " < n_j = " + std::to_string(l.target_dim()));
    const double pj = datum.p(j);
    if (pj < 0.0 || pj > 1.0)
      flag("exponent-out-of-range", j, "p_j = " + std::to_string(pj) + " not in [0,1]");
    else if (pj == 0.0)
      report.warnings.push_back({"zero-exponent", j, "p_j = 0 is rejected by optimizers"});
  }
  const int stack_rank = numerical_rank(datum.stacked(), policy.rank_tol);
  if (stack_rank < datum.n())
    flag("common-kernel-nontrivial", std::nullopt,
         "intersection of kernels has dimension " + std::to_string(datum.n() - stack_rank));
  report.ok = report.violations.empty();
  return report;
}

Matrix kernel_basis(const LinearMap& map, const NumericPolicy& policy) {
  return null_space(map.rows(), policy.rank_tol);
}

void require_valid(const BLDatum& datum, const NumericPolicy& policy) {
  const ValidationReport r = validate_datum(datum, policy);
  if (!r.ok) {
    const Violation& v = r.violations.front();
    std::string where = v.j ? " (map " + std::to_string(*v.j) + ")" : "";
    throw std::invalid_argument("invalid datum: " + v.code + where + ": " + v.detail);
  }
}

void require_positive_exponents(const BLDatum& datum) {
  for (int j = 0; j < datum.m(); ++j)
    if (!(datum.p(j) > 0.0))
      throw std::invalid_argument("exponent p_" + std::to_string(j) +
                                  " must be strictly positive here");
}

namespace data {

BLDatum loomis_whitney(int n) {
  std::vector<LinearMap> maps;
  std::vector<double> p;
  for (int j = 0; j < n; ++j) {
    const int dropped = n - 1 - j;
    Matrix rows = Matrix::Zero(n - 1, n);
    for (int r = 0, c = 0; c < n; ++c) {
      if (c == dropped) continue;
      rows(r++, c) = 1.0;
    }
    maps.emplace_back(rows);
    p.push_back(n == 2 ? 1.0 : 1.0 / (n - 1));
  }
  return BLDatum(n, std::move(maps), std::move(p));
}

BLDatum young2() {
  std::vector<LinearMap> maps{LinearMap(Matrix{{1.0, 0.0}}), LinearMap(Matrix{{0.0, 1.0}}),
                              LinearMap(Matrix{{1.0, -1.0}})};
  return BLDatum(2, std::move(maps), {2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0});
}

BLDatum holder(int n, int count) {
  std::vector<LinearMap> maps(static_cast<std::size_t>(count),
                              LinearMap(Matrix::Identity(n, n)));
  return BLDatum(n, std::move(maps),
                 std::vector<double>(static_cast<std::size_t>(count), 1.0 / count));
}

BLDatum rank_one_pair(const Vector& u, const Vector& v) {
  std::vector<LinearMap> maps{LinearMap(u.transpose()), LinearMap(v.transpose())};
  return BLDatum(2, std::move(maps), {1.0, 1.0});
}

}  // namespace data
}  // namespace blc
