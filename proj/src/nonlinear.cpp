#include "blc/nonlinear.hpp"

#include "blc/parallel.hpp"
#include "blc/random.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace blc {

namespace {

constexpr double kEdge = 1e-9;  // relative slack, in cells, for box membership
constexpr int kLattice = 17;

int nodes_covering(double length, double h) {
  return static_cast<int>(std::ceil(length / h - kEdge)) + 1;
}

}  // namespace

Box Box::cube(int dim, double half_width) {
  return {Vector::Constant(dim, -half_width), Vector::Constant(dim, half_width)};
}

bool Box::contains(const Vector& x, double slack) const {
  return ((x - lo).array() >= -slack).all() && ((hi - x).array() >= -slack).all();
}

GridFunction::GridFunction(Vector lo, double spacing, std::vector<int> shape)
    : lo_(std::move(lo)), h_(spacing), shape_(std::move(shape)) {
  if (!(h_ > 0.0)) throw std::invalid_argument("grid spacing must be positive");
  if (static_cast<int>(shape_.size()) != dim() || shape_.empty())
    throw std::invalid_argument("grid shape must list one size per axis");
  stride_.assign(shape_.size(), 1);
  std::size_t total = 1;
  for (int d = dim() - 1; d >= 0; --d) {
    if (shape_[static_cast<std::size_t>(d)] < 1) throw std::invalid_argument("empty grid axis");
    stride_[static_cast<std::size_t>(d)] = total;
    total *= static_cast<std::size_t>(shape_[static_cast<std::size_t>(d)]);
  }
  values_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));
}

GridFunction GridFunction::zeros(const Box& box, double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("grid spacing must be positive");
  std::vector<int> shape;
  for (int d = 0; d < box.dim(); ++d) shape.push_back(nodes_covering(box.hi(d) - box.lo(d), spacing));
  return GridFunction(box.lo, spacing, std::move(shape));
}

GridFunction GridFunction::sample(const Box& box, double spacing,
                                  const std::function<double(const Vector&)>& f) {
  GridFunction g = zeros(box, spacing);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = f(g.node(i));
  g.check();
  return g;
}

Vector GridFunction::hi() const {
  Vector h(dim());
  for (int d = 0; d < dim(); ++d) h(d) = lo_(d) + h_ * (shape_[static_cast<std::size_t>(d)] - 1);
  return h;
}

std::vector<int> GridFunction::multi_index(std::size_t flat) const {
  std::vector<int> idx(shape_.size());
  for (std::size_t d = 0; d < shape_.size(); ++d) {
    idx[d] = static_cast<int>(flat / stride_[d]);
    flat %= stride_[d];
  }
  return idx;
}

std::size_t GridFunction::flat_index(const std::vector<int>& idx) const {
  std::size_t flat = 0;
  for (std::size_t d = 0; d < shape_.size(); ++d)
    flat += static_cast<std::size_t>(idx[d]) * stride_[d];
  return flat;
}

Vector GridFunction::node(std::size_t flat) const {
  const auto idx = multi_index(flat);
  Vector x(dim());
  for (int d = 0; d < dim(); ++d) x(d) = lo_(d) + h_ * idx[static_cast<std::size_t>(d)];
  return x;
}

std::size_t GridFunction::nearest(const Vector& x) const {
  std::vector<int> idx(shape_.size());
  for (int d = 0; d < dim(); ++d) {
    const auto i = static_cast<int>(std::lround((x(d) - lo_(d)) / h_));
    idx[static_cast<std::size_t>(d)] = std::clamp(i, 0, shape_[static_cast<std::size_t>(d)] - 1);
  }
  return flat_index(idx);
}

double GridFunction::operator()(const Vector& x) const {
  if (x.size() != lo_.size()) throw std::invalid_argument("evaluation point has the wrong dimension");
  const int n = dim();
  int base[8];
  double frac[8];
  if (n > 8) throw std::invalid_argument("interpolation supports at most 8 axes");
  for (int d = 0; d < n; ++d) {
    const int size = shape_[static_cast<std::size_t>(d)];
    const double s = (x(d) - lo_(d)) / h_;
    if (s < -kEdge || s > size - 1 + kEdge)
      throw std::out_of_range("point outside the sampling box; use a larger box");
    int i = static_cast<int>(std::floor(s));
    i = std::clamp(i, 0, std::max(0, size - 2));
    base[d] = i;
    frac[d] = size == 1 ? 0.0 : std::clamp(s - i, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int corner = 0; corner < (1 << n); ++corner) {
    double w = 1.0;
    std::size_t flat = 0;
    for (int d = 0; d < n && w > 0.0; ++d) {
      const bool up = (corner >> d) & 1;
      w *= up ? frac[d] : 1.0 - frac[d];
      flat += static_cast<std::size_t>(base[d] + (up ? 1 : 0)) * stride_[static_cast<std::size_t>(d)];
    }
    if (w > 0.0) sum += w * values_(static_cast<Eigen::Index>(flat));
  }
  return sum;
}

double GridFunction::mass() const { return values_.sum() * std::pow(h_, dim()); }

GridFunction GridFunction::window(const Box& box) const {
  if (box.dim() != dim()) throw std::invalid_argument("window has the wrong dimension");
  std::vector<int> first(shape_.size()), shape(shape_.size());
  Vector lo(dim());
  for (int d = 0; d < dim(); ++d) {
    const auto u = static_cast<std::size_t>(d);
    const int a = std::max(0, static_cast<int>(std::ceil((box.lo(d) - lo_(d)) / h_ - kEdge)));
    const int b = std::min(shape_[u] - 1, static_cast<int>(std::floor((box.hi(d) - lo_(d)) / h_ + kEdge)));
    if (b < a) throw std::invalid_argument("window contains no grid nodes");
    first[u] = a;
    shape[u] = b - a + 1;
    lo(d) = lo_(d) + h_ * a;
  }
  GridFunction out(lo, h_, shape);
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto idx = out.multi_index(i);
    for (std::size_t d = 0; d < idx.size(); ++d) idx[d] += first[d];
    out[i] = (*this)[flat_index(idx)];
  }
  return out;
}

void GridFunction::check() const {
  for (Eigen::Index i = 0; i < values_.size(); ++i)
    if (!std::isfinite(values_(i)) || values_(i) < 0.0)
      throw std::invalid_argument("grid function values must be finite and nonnegative");
}

namespace {

// Nonzero integer offsets with |o| h <= radius.  With `half` set, only one
// of each pair +-o is kept (the one whose first nonzero entry is positive).
std::vector<std::vector<int>> ball_offsets(int dim, double radius, double h, bool half) {
  const int r = static_cast<int>(std::floor(radius / h + kEdge));
  std::vector<std::vector<int>> out;
  std::vector<int> o(static_cast<std::size_t>(dim), -r);
  const double limit = (radius / h) * (radius / h) * (1.0 + 1e-12);
  while (true) {
    long long sq = 0;
    for (int v : o) sq += static_cast<long long>(v) * v;
    if (sq > 0 && static_cast<double>(sq) <= limit) {
      bool keep = true;
      if (half)
        for (int v : o)
          if (v != 0) {
            keep = v > 0;
            break;
          }
      if (keep) out.push_back(o);
    }
    int d = dim - 1;
    while (d >= 0 && o[static_cast<std::size_t>(d)] == r) o[static_cast<std::size_t>(d--)] = -r;
    if (d < 0) break;
    ++o[static_cast<std::size_t>(d)];
  }
  return out;
}

}  // namespace

DeltaClassReport l1delta_check(const GridFunction& f, double delta) {
  if (!(delta >= f.spacing() * (1.0 - kEdge)))
    throw std::invalid_argument("delta is below the grid spacing; the class cannot be tested");
  f.check();
  const auto offsets = ball_offsets(f.dim(), delta, f.spacing(), true);
  DeltaClassReport report;
  std::size_t wx = 0, wy = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto idx = f.multi_index(i);
    for (const auto& o : offsets) {
      auto j_idx = idx;
      bool inside = true;
      for (std::size_t d = 0; d < o.size() && inside; ++d) {
        j_idx[d] += o[d];
        inside = j_idx[d] >= 0 && j_idx[d] < f.shape()[d];
      }
      if (!inside) continue;
      const std::size_t j = f.flat_index(j_idx);
      ++report.pairs_checked;
      const double a = f[i], b = f[j];
      double ratio = 1.0;
      if (a == 0.0 || b == 0.0)
        ratio = (a == 0.0 && b == 0.0) ? 1.0 : std::numeric_limits<double>::infinity();
      else
        ratio = std::max(a / b, b / a);
      if (ratio > report.worst_pair.ratio) {
        report.worst_pair.ratio = ratio;
        wx = i;
        wy = j;
      }
    }
  }
  report.member = report.worst_pair.ratio <= 2.0 * (1.0 + 1e-12);
  report.worst_pair.x = f.node(wx);
  report.worst_pair.y = f.node(wy);
  return report;
}

double poisson_kernel(int d, double t, double r) {
  const double a = 0.5 * (d + 1);
  const double c = std::tgamma(a) / std::pow(std::numbers::pi, a);
  return c * t / std::pow(t * t + r * r, a);
}

GridFunction poisson_smooth(const GridFunction& f, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("smoothing scale must be positive");
  f.check();
  const int n = f.dim();
  const double h = f.spacing();
  const double radius = 40.0 * t;
  const int r = static_cast<int>(std::floor(radius / h + kEdge));
  auto offsets = ball_offsets(n, radius, h, false);
  offsets.emplace_back(static_cast<std::size_t>(n), 0);
  std::vector<double> weight(offsets.size());
  double total = 0.0;
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    double sq = 0.0;
    for (int v : offsets[k]) sq += static_cast<double>(v) * v;
    weight[k] = poisson_kernel(n, t, h * std::sqrt(sq));
    total += weight[k];
  }
  for (double& w : weight) w /= total;

  std::vector<int> shape = f.shape();
  for (int& s : shape) s += 2 * r;
  GridFunction out(f.lo() - Vector::Constant(n, r * h), h, shape);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double v = f[i];
    if (v == 0.0) continue;
    auto idx = f.multi_index(i);
    for (int& c : idx) c += r;
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      std::size_t flat = 0;
      auto target = idx;
      for (std::size_t d = 0; d < target.size(); ++d) target[d] += offsets[k][d];
      flat = out.flat_index(target);
      out[flat] += v * weight[k];
    }
  }
  return out;
}

double poisson_ratio_bound(int d, double c) {
  if (d < 1 || !(c > 0.0)) throw std::invalid_argument("need d >= 1 and c > 0");
  // With delta = 1 and t = c the worst pair is collinear with the origin,
  // |x| = r, |y| = r + 1, and (c^2 + (r+1)^2) / (c^2 + r^2) peaks at r(r+1) = c^2.
  const double r = 0.5 * (std::sqrt(1.0 + 4.0 * c * c) - 1.0);
  const double g = (c * c + (r + 1.0) * (r + 1.0)) / (c * c + r * r);
  return std::pow(g, 0.5 * (d + 1));
}

double poisson_sufficient_constant(int d) {
  double lo = 1e-3, hi = 1.0;
  while (poisson_ratio_bound(d, hi) > 2.0) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (poisson_ratio_bound(d, mid) > 2.0 ? lo : hi) = mid;
  }
  return hi;
}

Submersion::Submersion(std::string family, Matrix linear, std::vector<Matrix> hessians)
    : family_(std::move(family)), linear_(std::move(linear)), hessians_(std::move(hessians)) {}

Submersion Submersion::linear(const LinearMap& map) {
  const Eigen::Index n = map.ambient_dim();
  return Submersion("linear", map.rows(),
                    std::vector<Matrix>(static_cast<std::size_t>(map.target_dim()), Matrix::Zero(n, n)));
}

Submersion Submersion::quadratic(const LinearMap& map, std::vector<Matrix> hessians) {
  if (static_cast<int>(hessians.size()) != map.target_dim())
    throw std::invalid_argument("one Hessian per output coordinate expected");
  for (const auto& q : hessians)
    if (q.rows() != map.ambient_dim() || q.cols() != map.ambient_dim() || !is_symmetric(q, 1e-12))
      throw std::invalid_argument("Hessians must be symmetric n x n matrices");
  return Submersion("quadratic", map.rows(), std::move(hessians));
}

Vector Submersion::operator()(const Vector& x) const {
  Vector y = linear_ * x;
  for (std::size_t i = 0; i < hessians_.size(); ++i)
    y(static_cast<Eigen::Index>(i)) += 0.5 * x.dot(hessians_[i] * x);
  return y;
}

Matrix Submersion::derivative(const Vector& x) const {
  Matrix d = linear_;
  for (std::size_t i = 0; i < hessians_.size(); ++i)
    d.row(static_cast<Eigen::Index>(i)) += (hessians_[i] * x).transpose();
  return d;
}

std::vector<Submersion> linear_submersions(const BLDatum& datum) {
  std::vector<Submersion> out;
  for (const auto& m : datum.maps()) out.push_back(Submersion::linear(m));
  return out;
}

std::vector<Vector> lattice_points(const Box& box, int per_axis) {
  if (per_axis < 2) throw std::invalid_argument("lattice needs at least two points per axis");
  const int n = box.dim();
  std::vector<Vector> out;
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  while (true) {
    Vector x(n);
    for (int d = 0; d < n; ++d)
      x(d) = box.lo(d) + (box.hi(d) - box.lo(d)) * idx[static_cast<std::size_t>(d)] / (per_axis - 1);
    out.push_back(std::move(x));
    int d = n - 1;
    while (d >= 0 && idx[static_cast<std::size_t>(d)] == per_axis - 1) idx[static_cast<std::size_t>(d--)] = 0;
    if (d < 0) break;
    ++idx[static_cast<std::size_t>(d)];
  }
  return out;
}

double derivative_drift(const Submersion& b, const Box& u) {
  const Matrix d0 = b.derivative(Vector::Zero(b.ambient_dim()));
  double worst = 0.0;
  for (const auto& x : lattice_points(u, kLattice))
    worst = std::max(worst, operator_norm(b.derivative(x) - d0));
  return worst;
}

double min_singular_value(const Submersion& b, const Box& u) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& x : lattice_points(u, kLattice)) {
    Eigen::JacobiSVD<Matrix> svd(b.derivative(x));
    worst = std::min(worst, svd.singularValues().minCoeff());
  }
  return worst;
}

Box image_box(const Submersion& b, const Box& u, double pad) {
  Vector lo = Vector::Constant(b.target_dim(), std::numeric_limits<double>::infinity());
  Vector hi = -lo;
  for (const auto& x : lattice_points(u, kLattice)) {
    const Vector y = b(x);
    lo = lo.cwiseMin(y);
    hi = hi.cwiseMax(y);
  }
  return {lo.array() - pad, hi.array() + pad};
}

double nonlinear_lhs(const std::vector<Submersion>& b, const std::vector<GridFunction>& f,
                     const std::vector<double>& p, const Box& u, const GridSpec& grid) {
  grid.check();
  if (b.empty() || b.size() != f.size() || b.size() != p.size())
    throw std::invalid_argument("need one submersion, function and exponent per index");
  const int n = u.dim();
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (b[j].ambient_dim() != n) throw std::invalid_argument("submersion domain differs from U");
    if (b[j].target_dim() != f[j].dim()) throw std::invalid_argument("function dimension differs from B_j");
  }
  const int res = grid.resolution;
  const Vector h = (u.hi - u.lo) / res;
  long long per_slab = 1;
  for (int d = 1; d < n; ++d) per_slab *= res;

  std::vector<double> slab(static_cast<std::size_t>(res), 0.0);
  parallel_for(
      res,
      [&](int first) {
        Vector x(n);
        x(0) = u.lo(0) + (first + 0.5) * h(0);
        double sum = 0.0;
        for (long long k = 0; k < per_slab; ++k) {
          long long rest = k;
          for (int d = n - 1; d >= 1; --d) {
            x(d) = u.lo(d) + (static_cast<double>(rest % res) + 0.5) * h(d);
            rest /= res;
          }
          double value = 1.0;
          for (std::size_t j = 0; j < b.size() && value > 0.0; ++j) {
            if (p[j] == 0.0) continue;
            const double v = f[j](b[j](x));
            value *= v > 0.0 ? std::pow(v, p[j]) : 0.0;
          }
          sum += value;
        }
        slab[static_cast<std::size_t>(first)] = sum;
      },
      1);
  double sum = 0.0;
  for (double s : slab) sum += s;
  return sum * h.prod();
}

double regression_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("regression needs at least two paired points");
  const auto m = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / m;
    my += ys[i] / m;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  if (sxx == 0.0) throw std::invalid_argument("regression abscissae are all equal");
  return sxy / sxx;
}

SweepResult nonlinear_ratio_sweep(const std::vector<Submersion>& b, const BLDatum& datum,
                                  const Box& u, const std::vector<double>& deltas,
                                  std::uint64_t seed, const SweepOptions& options) {
  if (static_cast<int>(b.size()) != datum.m())
    throw std::invalid_argument("one submersion per map expected");
  if (deltas.empty()) throw std::invalid_argument("no scales to sweep");
  if (options.draws < 1 || options.max_atoms < 1 || !(options.cells_per_delta >= 1.0))
    throw std::invalid_argument("sweep needs draws, atoms and cells_per_delta >= 1");
  for (std::size_t j = 0; j < b.size(); ++j) {
    if ((b[j].linear_part() - datum.map(static_cast<int>(j)).rows()).norm() > 0.0)
      throw std::invalid_argument("dB_j(0) must equal L_j");
    const double drift = derivative_drift(b[j], u);
    if (drift > options.drift_limit)
      throw std::invalid_argument("derivative drift " + std::to_string(drift) + " on U exceeds " +
                                  std::to_string(options.drift_limit) + "; shrink U");
  }
  for (double delta : deltas)
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("deltas must lie in (0, 1)");

  SweepResult result;
  std::vector<double> constants;
  for (const auto& s : b) {
    const double c = options.smoothing_constant > 0.0
                         ? options.smoothing_constant
                         : 1.05 * poisson_sufficient_constant(s.target_dim());
    constants.push_back(c);
    result.smoothing_constant = std::max(result.smoothing_constant, c);
  }

  const int draws = options.draws;
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    const double delta = deltas[k];
    const double h = delta / options.cells_per_delta;
    std::vector<double> ratios(static_cast<std::size_t>(draws));
    parallel_for(
        draws,
        [&](int draw) {
          const Rng master(derive_seed(derive_seed(seed, k), static_cast<std::uint64_t>(draw)));
          std::vector<GridFunction> f;
          double denominator = 1.0;
          for (std::size_t j = 0; j < b.size(); ++j) {
            Rng rng = master.stream(j);
            GridFunction atoms = GridFunction::zeros(image_box(b[j], u, h), h);
            const int count = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(options.max_atoms)));
            const double cell = std::pow(h, atoms.dim());
            for (int a = 0; a < count; ++a)
              atoms[rng.below(atoms.size())] += rng.uniform(0.5, 1.5) / cell;
            f.push_back(poisson_smooth(atoms, constants[j] * delta));
            denominator *= std::pow(f.back().mass(), datum.p(static_cast<int>(j)));
          }
          ratios[static_cast<std::size_t>(draw)] =
              nonlinear_lhs(b, f, datum.exponents(), u, options.grid) / denominator;
        },
        1);
    double worst = 0.0;
    for (int d = 0; d < draws; ++d) {
      result.rows.push_back({delta, d, ratios[static_cast<std::size_t>(d)]});
      worst = std::max(worst, ratios[static_cast<std::size_t>(d)]);
    }
    result.deltas.push_back(delta);
    result.max_ratio.push_back(worst);
  }
  if (deltas.size() >= 2) {
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < deltas.size(); ++k) {
      xs.push_back(std::log(std::log(1.0 / deltas[k])));
      ys.push_back(std::log(result.max_ratio[k]));
    }
    result.slope = regression_slope(xs, ys);
  }
  return result;
}

double linearization_defect(const Submersion& b, const Vector& center, double side) {
  if (center.size() != b.ambient_dim()) throw std::invalid_argument("centre has the wrong dimension");
  if (!(side >= 0.0)) throw std::invalid_argument("side must be non-negative");
  const Vector base = b(center);
  const Matrix d = b.derivative(center);
  const Box cube{center.array() - 0.5 * side, center.array() + 0.5 * side};
  double worst = 0.0;
  for (const auto& x : lattice_points(cube, kLattice))
    worst = std::max(worst, (b(x) - base - d * (x - center)).norm());
  return worst;
}

}  // namespace blc
