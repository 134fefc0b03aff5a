#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "klyap/errors.hpp"

namespace klyap {

/// Spectral decomposition S = V diag(values) Vᵀ of a symmetric matrix.
/// Values are sorted in descending order, columns of `vectors` match.
template <typename Scalar>
struct SymEig {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> vectors;
};

namespace detail {

// Householder reduction A = Q T Qᵀ with T tridiagonal. On return `a` holds Q,
// `diag` and `off` the tridiagonal entries (off[i] couples i and i+1, off[n-1] = 0).
template <typename Scalar>
void tridiagonalize(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a,
                    Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& diag,
                    Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& off) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index n = a.rows();
  Matrix q = Matrix::Identity(n, n);
  diag.resize(n);
  off.setZero(n);

  for (Eigen::Index k = 0; k + 2 < n; ++k) {
    const Eigen::Index m = n - k - 1;
    Vector v = a.col(k).tail(m);
    const Scalar norm = v.norm();
    if (norm == Scalar(0)) continue;
    const Scalar alpha = v[0] > Scalar(0) ? -norm : norm;
    v[0] -= alpha;
    const Scalar vnorm2 = v.squaredNorm();
    if (vnorm2 == Scalar(0)) continue;
    const Scalar beta = Scalar(2) / vnorm2;

    auto trailing = a.bottomRightCorner(m, m);
    Vector p = beta * (trailing.template selfadjointView<Eigen::Lower>() * v);
    const Scalar kappa = Scalar(0.5) * beta * p.dot(v);
    p -= kappa * v;
    trailing.noalias() -= v * p.transpose() + p * v.transpose();

    a.col(k).tail(m).setZero();
    a.row(k).tail(m).setZero();
    a(k + 1, k) = alpha;
    a(k, k + 1) = alpha;

    auto qcols = q.rightCols(m);
    const Vector qv = qcols * v;
    qcols.noalias() -= (beta * qv) * v.transpose();
  }
  diag = a.diagonal();
  for (Eigen::Index i = 0; i + 1 < n; ++i) off[i] = a(i + 1, i);
  a = std::move(q);
}

// Implicit QL with Wilkinson-type shifts on a symmetric tridiagonal matrix,
// accumulating rotations into the columns of z.
template <typename Scalar>
void tridiagonal_ql(Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& d,
                    Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& e,
                    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& z, int max_iter_per_value) {
  const Eigen::Index n = d.size();
  const Scalar eps = Eigen::NumTraits<Scalar>::epsilon();
  // Absolute floor: clusters far below ‖T‖ need not resolve to relative accuracy.
  Scalar tnorm(0);
  for (Eigen::Index i = 0; i < n; ++i) tnorm = std::max(tnorm, std::abs(d[i]) + std::abs(e[i]));
  const Scalar floor_tol = eps * tnorm;
  for (Eigen::Index l = 0; l < n; ++l) {
    int iter = 0;
    Eigen::Index m;
    do {
      for (m = l; m + 1 < n; ++m) {
        const Scalar dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= eps * dd || std::abs(e[m]) <= floor_tol) break;
      }
      if (m == l) break;
      if (iter++ == max_iter_per_value) {
        throw ConvergenceError("sym_eig: tridiagonal QL iteration cap exceeded");
      }
      Scalar g = (d[l + 1] - d[l]) / (Scalar(2) * e[l]);
      Scalar r = std::hypot(g, Scalar(1));
      g = d[m] - d[l] + e[l] / (g + (g >= Scalar(0) ? r : -r));
      Scalar s(1), c(1), p(0);
      Eigen::Index i = m - 1;
      bool underflow = false;
      for (; i >= l; --i) {
        const Scalar f = s * e[i];
        const Scalar b = c * e[i];
        r = std::hypot(f, g);
        e[i + 1] = r;
        if (r == Scalar(0)) {
          d[i + 1] -= p;
          e[m] = Scalar(0);
          underflow = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = d[i + 1] - p;
        r = (d[i] - g) * s + Scalar(2) * c * b;
        p = s * r;
        d[i + 1] = g + p;
        g = c * r - b;
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar zk = z(k, i + 1);
          z(k, i + 1) = s * z(k, i) + c * zk;
          z(k, i) = c * z(k, i) - s * zk;
        }
      }
      if (underflow) continue;
      d[l] -= p;
      e[l] = g;
      e[m] = Scalar(0);
    } while (m != l);
  }
}

}  // namespace detail

/// Full eigendecomposition of a symmetric matrix by Householder
/// tridiagonalization followed by implicit QL iteration.
///
/// The input must be symmetric to ‖S − Sᵀ‖_F ≤ 1e-10·‖S‖_F; it is
/// symmetrized before factorization.
template <typename Derived>
SymEig<typename Derived::Scalar> sym_eig(const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (s.rows() != s.cols()) throw std::invalid_argument("sym_eig: matrix must be square");
  const Scalar fro = s.norm();
  if ((s - s.transpose()).norm() > Scalar(1e-10) * fro) {
    throw std::invalid_argument("sym_eig: matrix is not symmetric");
  }
  const Eigen::Index n = s.rows();
  SymEig<Scalar> out;
  if (n == 0) return out;

  Matrix a = Scalar(0.5) * (s + s.transpose());
  Vector d, e;
  detail::tridiagonalize(a, d, e);
  detail::tridiagonal_ql(d, e, a, 60);

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return d[i] > d[j]; });
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values[k] = d[order[k]];
    out.vectors.col(k) = a.col(order[k]);
  }
  return out;
}

}  // namespace klyap
