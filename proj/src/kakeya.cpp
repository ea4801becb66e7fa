#include "blc/kakeya.hpp"

#include "blc/random.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

namespace blc {

bool Tube::contains(const Vector& x) const {
  // Distance to the core from the explicit perpendicular part (no cancellation
  // along long tubes) and without temporaries: this is the quadrature's inner loop.
  const Eigen::Index n = x.size();
  const Eigen::Index k = directions.cols();
  if (k > 16) {
    const Vector r = x - center;
    return (r - directions * (directions.transpose() * r)).squaredNorm() <= width * width;
  }
  double dots[16];
  for (Eigen::Index c = 0; c < k; ++c) {
    dots[c] = 0.0;
    for (Eigen::Index d = 0; d < n; ++d) dots[c] += directions(d, c) * (x(d) - center(d));
  }
  double sq = 0.0;
  for (Eigen::Index d = 0; d < n; ++d) {
    double perp = x(d) - center(d);
    for (Eigen::Index c = 0; c < k; ++c) perp -= directions(d, c) * dots[c];
    sq += perp * perp;
  }
  return sq <= width * width;
}

double TubeFamily::max_direction_distance() const {
  double d = 0.0;
  for (const auto& t : tubes) d = std::max(d, grassmann_distance(t.directions, reference_kernel));
  return d;
}

void GridSpec::check() const {
  if (resolution < 8) throw std::invalid_argument("grid resolution must be at least 8");
}

double kakeya_lhs(const std::vector<TubeFamily>& families, const std::vector<double>& p,
                  const GridSpec& grid) {
  grid.check();
  if (families.empty()) throw std::invalid_argument("no tube families");
  if (families.size() != p.size()) throw std::invalid_argument("one exponent per family expected");
  const Eigen::Index n = families.front().reference_kernel.rows();
  const int res = grid.resolution;
  const double h = 2.0 / res;
  long long total = 1;
  for (Eigen::Index d = 1; d < n; ++d) total *= res;  // points per slab of the first axis

  // Each slab of the first coordinate is summed separately, then added in order.
  std::vector<double> slab(static_cast<std::size_t>(res), 0.0);
  auto work = [&](int first) {
    Vector x(n);
    x(0) = -1.0 + (first + 0.5) * h;
    double sum = 0.0;
    for (long long idx = 0; idx < total; ++idx) {
      long long rest = idx;
      for (Eigen::Index d = 1; d < n; ++d) {
        x(d) = -1.0 + (static_cast<double>(rest % res) + 0.5) * h;
        rest /= res;
      }
      double value = 1.0;
      for (std::size_t j = 0; j < families.size() && value > 0.0; ++j) {
        if (p[j] == 0.0) continue;
        int count = 0;
        for (const auto& t : families[j].tubes) count += t.contains(x);
        value *= count ? std::pow(count, p[j]) : 0.0;
      }
      sum += value;
    }
    slab[static_cast<std::size_t>(first)] = sum;
  };
  const int workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < res; i += workers) work(i);
    });
  for (auto& t : pool) t.join();
  double sum = 0.0;
  for (double s : slab) sum += s;
  return sum * std::pow(h, static_cast<double>(n));
}

KakeyaResult kakeya_ratio(const std::vector<TubeFamily>& families, const std::vector<double>& p,
                          const GridSpec& grid) {
  if (families.empty()) throw std::invalid_argument("no tube families");
  double delta = -1.0;
  for (const auto& f : families)
    for (const auto& t : f.tubes) {
      if (delta < 0.0) delta = t.width;
      if (t.width != delta) throw std::invalid_argument("all tubes must share one width");
    }
  if (delta <= 0.0) throw std::invalid_argument("families contain no tubes");
  KakeyaResult r;
  r.lhs = kakeya_lhs(families, p, grid);
  const auto n = static_cast<double>(families.front().reference_kernel.rows());
  r.rhs_base = std::pow(delta, n);
  for (std::size_t j = 0; j < families.size(); ++j)
    r.rhs_base *= std::pow(static_cast<double>(families[j].tubes.size()), p[j]);
  r.ratio = r.lhs / r.rhs_base;
  return r;
}

std::vector<TubeFamily> random_families(const BLDatum& datum, double delta, double nu,
                                        const std::vector<int>& counts, std::uint64_t seed,
                                        const NumericPolicy& policy) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  if (!(nu >= 0.0)) throw std::invalid_argument("nu must be non-negative");
  if (static_cast<int>(counts.size()) != datum.m())
    throw std::invalid_argument("one tube count per map expected");
  const int n = datum.n();
  const Rng master(seed);
  std::vector<TubeFamily> out;
  for (int j = 0; j < datum.m(); ++j) {
    if (counts[static_cast<std::size_t>(j)] < 1)
      throw std::invalid_argument("tube family " + std::to_string(j + 1) + " is empty");
    TubeFamily f;
    f.nu = nu;
    f.j = j;
    f.reference_kernel = kernel_basis(datum.map(j), policy);
    const Eigen::Index k = f.reference_kernel.cols();
    for (int t = 0; t < counts[static_cast<std::size_t>(j)]; ++t) {
      Rng rng = master.stream((static_cast<std::uint64_t>(j) << 32) | static_cast<std::uint64_t>(t));
      Tube tube;
      tube.width = delta;
      tube.j = j;
      tube.center = Vector(n);
      for (int d = 0; d < n; ++d) tube.center(d) = rng.uniform(-1.0, 1.0);
      bool accepted = k == 0 || nu == 0.0;
      tube.directions = f.reference_kernel;
      for (int attempt = 0; !accepted && attempt < 1000; ++attempt) {
        const Matrix tilted = f.reference_kernel + nu * rng.gaussian(n, k);
        Eigen::HouseholderQR<Matrix> qr(tilted);
        Matrix q = qr.householderQ() * Matrix::Identity(n, k);
        if (grassmann_distance(q, f.reference_kernel) <= nu) {
          tube.directions = std::move(q);
          accepted = true;
        }
      }
      if (!accepted) throw std::runtime_error("direction sampler rejected 1000 draws in a row");
      f.tubes.push_back(std::move(tube));
    }
    out.push_back(std::move(f));
  }
  return out;
}

TubeFamily coarsen_tubes(const TubeFamily& family, double factor, double nu) {
  if (!(factor >= 0.0)) throw std::invalid_argument("coarsening factor must be non-negative");
  if (!(nu > 0.0)) throw std::invalid_argument("nu must be positive");
  TubeFamily out = family;
  for (auto& t : out.tubes) t.width += factor * t.width / nu;
  return out;
}

KappaResult measure_kappa(const BLDatum& datum, double delta, double nu, int trials,
                          const std::vector<int>& counts, const GridSpec& grid, std::uint64_t seed,
                          const NumericPolicy& policy) {
  if (!(delta > 0.0 && delta < nu && nu <= 1.0))
    throw std::invalid_argument("measure_kappa needs 0 < delta < nu <= 1");
  if (trials < 1) throw std::invalid_argument("measure_kappa needs at least one trial");
  KappaResult r;
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(t));
    const auto fine = kakeya_ratio(random_families(datum, delta, nu, counts, s, policy),
                                   datum.exponents(), grid);
    const auto coarse = kakeya_ratio(random_families(datum, delta / nu, nu, counts, s, policy),
                                     datum.exponents(), grid);
    r.rows.push_back({t, delta, fine.lhs, fine.ratio});
    r.rows.push_back({t, delta / nu, coarse.lhs, coarse.ratio});
    r.c_fine = std::max(r.c_fine, fine.ratio);
    r.c_coarse = std::max(r.c_coarse, coarse.ratio);
  }
  r.kappa_hat = r.c_fine / r.c_coarse;
  return r;
}

std::vector<TubeFamily> partition_by_direction(const TubeFamily& family, double nu) {
  std::vector<TubeFamily> out;
  for (const auto& t : family.tubes) {
    bool placed = false;
    for (auto& f : out) {
      bool close = true;
      for (const auto& member : f.tubes)
        close = close && grassmann_distance(t.directions, member.directions) <= nu;
      if (close) {
        f.tubes.push_back(t);
        placed = true;
        break;
      }
    }
    if (!placed) {
      TubeFamily f;
      f.nu = nu;
      f.j = family.j;
      f.reference_kernel = t.directions;
      f.tubes.push_back(t);
      out.push_back(std::move(f));
    }
  }
  return out;
}

}  // namespace blc
