#pragma once

#include <cmath>
#include <complex>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "klyap/errors.hpp"
#include "klyap/linalg/dense_lu.hpp"
#include "klyap/linalg/real_schur.hpp"

namespace klyap {

namespace detail {

template <typename Scalar>
std::string format_eigenvalue(const std::complex<Scalar>& z) {
  std::ostringstream os;
  os.precision(6);
  os << z.real();
  if (z.imag() != Scalar(0)) os << (z.imag() > 0 ? "+" : "-") << std::abs(z.imag()) << "i";
  return os.str();
}

// Fails fast when λ_i + λ_j ≈ 0 for some eigenvalue pair, or when the
// spectrum is not in the open left half-plane.
template <typename Scalar>
void check_lyapunov_spectrum(const SchurForm<Scalar>& schur, Scalar scale) {
  const auto ev = schur.eigenvalues();
  const Scalar tol = Scalar(1e-10) * std::max(scale, Eigen::NumTraits<Scalar>::epsilon());
  for (std::size_t i = 0; i < ev.size(); ++i) {
    for (std::size_t j = i; j < ev.size(); ++j) {
      if (std::abs(ev[i] + ev[j]) <= tol) {
        throw SingularSylvesterError("solve_lyapunov: singular Sylvester operator, eigenvalues " +
                                     format_eigenvalue(ev[i]) + " and " + format_eigenvalue(ev[j]) +
                                     " sum to zero");
      }
    }
  }
  for (const auto& z : ev) {
    if (z.real() >= Scalar(0)) {
      throw SingularSylvesterError("solve_lyapunov: matrix is not stable, eigenvalue " + format_eigenvalue(z) +
                                   " has non-negative real part");
    }
  }
}

// Solves the (s1·s2)-dimensional system a Y + Y bᵀ = rhs for a small block Y.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> solve_small_sylvester(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& b,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& rhs) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index p = a.rows(), r = b.rows();
  if (p == 1 && r == 1) {
    Matrix y(1, 1);
    y(0, 0) = rhs(0, 0) / (a(0, 0) + b(0, 0));
    return y;
  }
  // vec(aY) = (I ⊗ a) vec Y, vec(Y bᵀ) = (b ⊗ I) vec Y
  Matrix m = Matrix::Zero(p * r, p * r);
  for (Eigen::Index j = 0; j < r; ++j) m.block(j * p, j * p, p, p) += a;
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) m.block(i * p, j * p, p, p) += b(i, j) * Matrix::Identity(p, p);
  const Vector vec_rhs = Eigen::Map<const Vector>(rhs.data(), p * r);
  const Vector y = DenseLU<Scalar>(m).solve(vec_rhs);
  return Eigen::Map<const Matrix>(y.data(), p, r);
}

}  // namespace detail

/// Bartels–Stewart solution of K P + P Kᵀ + Qs = 0 for symmetric Qs.
///
/// K is reduced to real Schur form K = U T Uᵀ, the transformed equation
/// T Y + Y Tᵀ = −Uᵀ Qs U is solved block-wise from the bottom-right corner,
/// and P = U Y Uᵀ is returned symmetrized. Throws SingularSylvesterError when
/// K is not stable or two eigenvalues sum to (numerically) zero.
template <typename DerivedK, typename DerivedQ>
Eigen::Matrix<typename DerivedK::Scalar, Eigen::Dynamic, Eigen::Dynamic> solve_lyapunov(
    const Eigen::MatrixBase<DerivedK>& k, const Eigen::MatrixBase<DerivedQ>& qs) {
  using Scalar = typename DerivedK::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (k.rows() != k.cols() || qs.rows() != k.rows() || qs.cols() != k.cols()) {
    throw std::invalid_argument("solve_lyapunov: dimension mismatch");
  }
  const Eigen::Index n = k.rows();
  if (n == 0) return Matrix();

  const SchurForm<Scalar> schur = real_schur(k);
  detail::check_lyapunov_spectrum(schur, k.norm());
  const Matrix& t = schur.t;
  const Matrix& u = schur.q;

  Matrix c = -(u.transpose() * qs * u);
  c = Scalar(0.5) * (c + c.transpose()).eval();
  Matrix y = Matrix::Zero(n, n);

  const auto starts = schur.block_starts();
  const std::size_t nb = starts.size() - 1;
  // Solve for blocks Y_kl with l ≤ k, k and l running from the last block down.
  // Y_kl depends on Y_jl (j > k) and Y_kj (j > l); the rest follows by symmetry.
  for (std::size_t bk = nb; bk-- > 0;) {
    const Eigen::Index rk = starts[bk], sk = starts[bk + 1] - rk, ek = starts[bk + 1];
    for (std::size_t bl = bk + 1; bl-- > 0;) {
      const Eigen::Index rl = starts[bl], sl = starts[bl + 1] - rl, el = starts[bl + 1];
      Matrix rhs = c.block(rk, rl, sk, sl);
      if (ek < n) rhs.noalias() -= t.block(rk, ek, sk, n - ek) * y.block(ek, rl, n - ek, sl);
      if (el < n) rhs.noalias() -= y.block(rk, el, sk, n - el) * t.block(rl, el, sl, n - el).transpose();
      const Matrix blk = detail::solve_small_sylvester<Scalar>(t.block(rk, rk, sk, sk), t.block(rl, rl, sl, sl), rhs);
      y.block(rk, rl, sk, sl) = blk;
      if (bl != bk) y.block(rl, rk, sl, sk) = blk.transpose();
    }
  }

  Matrix p = u * y * u.transpose();
  return Scalar(0.5) * (p + p.transpose());
}

/// Reference solver for K P + P Kᵀ + Qs = 0 through the n²-dimensional system
/// (I ⊗ K + K ⊗ I) vec P = −vec Qs, factored by dense LU with partial pivoting.
/// Independent of the Schur route; intended for n ≤ 64.
template <typename DerivedK, typename DerivedQ>
Eigen::Matrix<typename DerivedK::Scalar, Eigen::Dynamic, Eigen::Dynamic> solve_lyapunov_kron(
    const Eigen::MatrixBase<DerivedK>& k, const Eigen::MatrixBase<DerivedQ>& qs) {
  using Scalar = typename DerivedK::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (k.rows() != k.cols() || qs.rows() != k.rows() || qs.cols() != k.cols()) {
    throw std::invalid_argument("solve_lyapunov_kron: dimension mismatch");
  }
  const Eigen::Index n = k.rows();
  if (n > 64) throw std::invalid_argument("solve_lyapunov_kron: n > 64 is too large for the Kronecker system");
  if (n == 0) return Matrix();

  Matrix m = Matrix::Zero(n * n, n * n);
  for (Eigen::Index j = 0; j < n; ++j) m.block(j * n, j * n, n, n) += k;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m.block(i * n, j * n, n, n).diagonal().array() += k(i, j);

  // Eigen's blocked LU keeps the oracle independent of the Schur-based path.
  const Eigen::PartialPivLU<Matrix> lu(m);
  const auto u = lu.matrixLU().diagonal().cwiseAbs();
  if (!(u.minCoeff() > Eigen::NumTraits<Scalar>::epsilon() * Scalar(n * n) * u.maxCoeff())) {
    throw SingularSylvesterError("solve_lyapunov_kron: singular Kronecker system");
  }
  const Matrix q = qs;
  const Vector rhs = -Eigen::Map<const Vector>(q.data(), n * n);
  const Vector x = lu.solve(rhs);
  Matrix p = Eigen::Map<const Matrix>(x.data(), n, n);
  return Scalar(0.5) * (p + p.transpose());
}

}  // namespace klyap
