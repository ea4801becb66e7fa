// Dense linear-algebra helpers shared by every module.
//
// Everything here is header-only and templated on the Eigen expression type so
// blocks, products and maps can be passed without materialising copies.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace blc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Number of singular values above `rel_tol * scale`.
///
/// `scale` defaults to the largest singular value of `a`.  Pass an explicit
/// scale (e.g. the norm of the map a product came from) when a product can be
/// tiny because it is genuinely zero, not because it is small but nonsingular.
template <typename Derived>
int numerical_rank(const Eigen::MatrixBase<Derived>& a, double rel_tol,
                   double scale = -1.0) {
  if (a.rows() == 0 || a.cols() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(a.derived().eval());
  const auto& s = svd.singularValues();
  const double ref = scale > 0.0 ? scale : s(0);
  if (!(ref > 0.0)) return 0;
  const double cut = rel_tol * ref;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cut) ++r;
  return r;
}

template <typename Derived>
double operator_norm(const Eigen::MatrixBase<Derived>& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a.derived().eval());
  return svd.singularValues()(0);
}

/// Orthonormal basis (n x (n - rank)) of the null space of `a`.
template <typename Derived>
Matrix null_space(const Eigen::MatrixBase<Derived>& a, double rel_tol,
                  double scale = -1.0) {
  const Eigen::Index n = a.cols();
  if (a.rows() == 0) return Matrix::Identity(n, n);
  Eigen::JacobiSVD<Matrix> svd(a.derived().eval(), Eigen::ComputeFullV);
  const int r = numerical_rank(a, rel_tol, scale);
  return svd.matrixV().rightCols(n - r);
}

/// Orthonormal basis of the column span of `a`.  `scale` as in numerical_rank.
template <typename Derived>
Matrix column_span(const Eigen::MatrixBase<Derived>& a, double rel_tol,
                   double scale = -1.0) {
  if (a.cols() == 0) return Matrix(a.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(a.derived().eval(), Eigen::ComputeFullU);
  const int r = numerical_rank(a, rel_tol, scale);
  return svd.matrixU().leftCols(r);
}

/// sqrt(det(Gram)) of the columns of `vectors`; |det| for a square matrix.
template <typename Derived>
double wedge_magnitude(const Eigen::MatrixBase<Derived>& vectors) {
  if (vectors.cols() == 0) return 1.0;
  if (vectors.cols() > vectors.rows()) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(vectors.derived().eval());
  return svd.singularValues().prod();
}

template <typename Derived>
Matrix symmetrized(const Eigen::MatrixBase<Derived>& a) {
  return (0.5 * (a + a.transpose())).eval();
}

template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& a, double tol) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

/// Smallest eigenvalue of a symmetric matrix.
template <typename Derived>
double min_eigenvalue(const Eigen::MatrixBase<Derived>& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(a),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

template <typename Derived>
bool is_spd(const Eigen::MatrixBase<Derived>& a, double tol = 1e-12) {
  return is_symmetric(a, tol) && min_eigenvalue(a) > 0.0;
}

/// f(A) for symmetric A via its eigendecomposition.
template <typename Derived, typename F>
Matrix spectral_apply(const Eigen::MatrixBase<Derived>& a, F&& f) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(a));
  Vector d = es.eigenvalues().unaryExpr(f);
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

/// Orthogonal projector onto the span of orthonormal columns.
template <typename Derived>
Matrix projector(const Eigen::MatrixBase<Derived>& basis) {
  return basis * basis.transpose();
}

/// Chordal Grassmann distance sqrt(k - ||D^T K||_F^2) between two
/// k-dimensional subspaces given by orthonormal bases.
template <typename DerivedA, typename DerivedB>
double grassmann_distance(const Eigen::MatrixBase<DerivedA>& d,
                          const Eigen::MatrixBase<DerivedB>& k) {
  const double overlap = (d.transpose() * k).squaredNorm();
  return std::sqrt(std::max(0.0, static_cast<double>(d.cols()) - overlap));
}

}  // namespace blc
