#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "klyap/errors.hpp"

namespace klyap {

/// Real Schur form A = Q T Qᵀ with Q orthogonal and T quasi-upper-triangular.
/// Every 2×2 diagonal block of T has a complex conjugate eigenvalue pair and
/// equal diagonal entries.
template <typename Scalar>
struct SchurForm {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix q;
  Matrix t;

  /// Start row of every diagonal block, followed by a sentinel equal to n.
  std::vector<Eigen::Index> block_starts() const {
    std::vector<Eigen::Index> starts;
    const Eigen::Index n = t.rows();
    Eigen::Index i = 0;
    while (i < n) {
      starts.push_back(i);
      i += (i + 1 < n && t(i + 1, i) != Scalar(0)) ? 2 : 1;
    }
    starts.push_back(n);
    return starts;
  }

  /// Eigenvalues read off the diagonal blocks, in block order.
  std::vector<std::complex<Scalar>> eigenvalues() const {
    std::vector<std::complex<Scalar>> ev;
    const auto starts = block_starts();
    for (std::size_t b = 0; b + 1 < starts.size(); ++b) {
      const Eigen::Index i = starts[b];
      if (starts[b + 1] - i == 1) {
        ev.emplace_back(t(i, i), Scalar(0));
      } else {
        const Scalar p = Scalar(0.5) * (t(i, i) + t(i + 1, i + 1));
        const Scalar det = t(i, i) * t(i + 1, i + 1) - t(i, i + 1) * t(i + 1, i);
        const Scalar im = std::sqrt(std::max(Scalar(0), det - p * p));
        ev.emplace_back(p, im);
        ev.emplace_back(p, -im);
      }
    }
    return ev;
  }

  /// max Re λ, the spectral abscissa.
  Scalar spectral_abscissa() const {
    Scalar best = -std::numeric_limits<Scalar>::infinity();
    for (const auto& z : eigenvalues()) best = std::max(best, z.real());
    return best;
  }
};

namespace detail {

// Reflector I − τ v vᵀ with v(0) = 1 mapping x to (β, 0, …, 0).
template <typename Scalar, int N>
struct SmallReflector {
  Eigen::Matrix<Scalar, N, 1> v;
  Scalar tau = Scalar(0);
  Scalar beta = Scalar(0);

  explicit SmallReflector(const Eigen::Matrix<Scalar, N, 1>& x) {
    const Scalar tail = x.tail(N - 1).squaredNorm();
    v.setZero();
    v[0] = Scalar(1);
    if (tail == Scalar(0)) {
      beta = x[0];
      return;
    }
    const Scalar norm = std::sqrt(x[0] * x[0] + tail);
    beta = x[0] >= Scalar(0) ? -norm : norm;
    const Scalar v0 = x[0] - beta;
    v.tail(N - 1) = x.tail(N - 1) / v0;
    tau = (beta - x[0]) / beta;
  }

  // rows [r, r+N) of m, columns [c0, c1)
  template <typename M>
  void apply_left(M& m, Eigen::Index r, Eigen::Index c0, Eigen::Index c1) const {
    if (tau == Scalar(0)) return;
    for (Eigen::Index j = c0; j < c1; ++j) {
      Scalar dot(0);
      for (int k = 0; k < N; ++k) dot += v[k] * m(r + k, j);
      dot *= tau;
      for (int k = 0; k < N; ++k) m(r + k, j) -= dot * v[k];
    }
  }

  // columns [c, c+N) of m, rows [r0, r1)
  template <typename M>
  void apply_right(M& m, Eigen::Index c, Eigen::Index r0, Eigen::Index r1) const {
    if (tau == Scalar(0)) return;
    for (Eigen::Index i = r0; i < r1; ++i) {
      Scalar dot(0);
      for (int k = 0; k < N; ++k) dot += m(i, c + k) * v[k];
      dot *= tau;
      for (int k = 0; k < N; ++k) m(i, c + k) -= dot * v[k];
    }
  }
};

}  // namespace detail

/// Real Schur decomposition: Householder reduction to upper Hessenberg form
/// followed by Francis implicit double-shift QR with deflation.
template <typename Derived>
SchurForm<typename Derived::Scalar> real_schur(const Eigen::MatrixBase<Derived>& a, int max_iter_per_row = 40) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
  if (a.rows() != a.cols()) throw std::invalid_argument("real_schur: matrix must be square");
  const Eigen::Index n = a.rows();
  SchurForm<Scalar> out;
  out.t = a;
  out.q = Matrix::Identity(n, n);
  Matrix& t = out.t;
  Matrix& q = out.q;
  if (n == 0) return out;

  // Hessenberg reduction.
  for (Eigen::Index k = 0; k + 2 < n; ++k) {
    const Eigen::Index m = n - k - 1;
    Vector x = t.col(k).tail(m);
    const Scalar tail = x.tail(m - 1).squaredNorm();
    if (tail == Scalar(0)) continue;
    const Scalar norm = std::sqrt(x[0] * x[0] + tail);
    const Scalar beta = x[0] >= Scalar(0) ? -norm : norm;
    Vector v = x;
    v[0] -= beta;
    const Scalar tau = Scalar(2) / v.squaredNorm();
    // rows k+1.. of t, all columns from k
    auto rows = t.bottomRows(m);
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> vt_rows = v.transpose() * rows.rightCols(n - k);
    rows.rightCols(n - k).noalias() -= (tau * v) * vt_rows;
    auto cols = t.rightCols(m);
    const Vector cols_v = cols * v;
    cols.noalias() -= (tau * cols_v) * v.transpose();
    auto qcols = q.rightCols(m);
    const Vector q_v = qcols * v;
    qcols.noalias() -= (tau * q_v) * v.transpose();
    t(k + 1, k) = beta;
    t.col(k).tail(m - 1).setZero();
  }

  const Scalar eps = Eigen::NumTraits<Scalar>::epsilon();
  Scalar norm(0);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i <= std::min(j + 1, n - 1); ++i) norm += std::abs(t(i, j));

  // T ← GᵀTG and Q ← QG for the plane rotation G = [[c, −s], [s, c]] in (k, k+1).
  auto rotate = [&](Eigen::Index k, Scalar c, Scalar s) {
    for (Eigen::Index j = k; j < n; ++j) {
      const Scalar x0 = t(k, j), x1 = t(k + 1, j);
      t(k, j) = c * x0 + s * x1;
      t(k + 1, j) = -s * x0 + c * x1;
    }
    for (Eigen::Index i = 0; i <= k + 1; ++i) {
      const Scalar x0 = t(i, k), x1 = t(i, k + 1);
      t(i, k) = c * x0 + s * x1;
      t(i, k + 1) = -s * x0 + c * x1;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar x0 = q(i, k), x1 = q(i, k + 1);
      q(i, k) = c * x0 + s * x1;
      q(i, k + 1) = -s * x0 + c * x1;
    }
  };

  Eigen::Index iu = n - 1;
  int iter = 0;
  long total_iter = 0;
  const long max_total = static_cast<long>(max_iter_per_row) * n;

  while (iu >= 0) {
    // Locate the start of the unreduced block ending at iu.
    Eigen::Index il = iu;
    while (il > 0) {
      Scalar s = std::abs(t(il - 1, il - 1)) + std::abs(t(il, il));
      if (s == Scalar(0)) s = norm;
      if (std::abs(t(il, il - 1)) <= eps * s) {
        t(il, il - 1) = Scalar(0);
        break;
      }
      --il;
    }

    if (il == iu) {
      --iu;
      iter = 0;
      continue;
    }
    if (il == iu - 1) {
      // 2×2 block: split it when its eigenvalues are real, otherwise rotate
      // it to the standard form with equal diagonal entries.
      const Scalar a00 = t(iu - 1, iu - 1), a01 = t(iu - 1, iu), a10 = t(iu, iu - 1), a11 = t(iu, iu);
      const Scalar p = Scalar(0.5) * (a00 - a11);
      const Scalar disc = p * p + a10 * a01;
      Scalar c(1), s(0);
      if (disc >= Scalar(0)) {
        const Scalar z = std::sqrt(disc);
        Vec2 v(p >= Scalar(0) ? p + z : p - z, a10);
        const Scalar vn = v.norm();
        if (vn > Scalar(0)) {
          c = v[0] / vn;
          s = v[1] / vn;
        }
      } else {
        const Scalar sigma = a01 + a10;
        const Scalar tau = std::hypot(sigma, a00 - a11);
        if (tau > Scalar(0)) {
          c = std::sqrt(Scalar(0.5) * (Scalar(1) + std::abs(sigma) / tau));
          s = -(p / (tau * c)) * (sigma >= Scalar(0) ? Scalar(1) : Scalar(-1));
        }
      }
      rotate(iu - 1, c, s);
      if (disc >= Scalar(0)) {
        t(iu, iu - 1) = Scalar(0);
      } else {
        const Scalar mid = Scalar(0.5) * (t(iu - 1, iu - 1) + t(iu, iu));
        t(iu - 1, iu - 1) = mid;
        t(iu, iu) = mid;
      }
      iu -= 2;
      iter = 0;
      continue;
    }

    if (++total_iter > max_total) {
      throw ConvergenceError("real_schur: Francis QR iteration cap exceeded");
    }
    ++iter;

    // Double shift from the trailing 2×2 block, with exceptional shifts.
    Scalar tr = t(iu - 1, iu - 1) + t(iu, iu);
    Scalar det = t(iu - 1, iu - 1) * t(iu, iu) - t(iu - 1, iu) * t(iu, iu - 1);
    if (iter % 11 == 10) {
      const Scalar s = std::abs(t(iu, iu - 1)) + std::abs(t(iu - 1, iu - 2));
      const Scalar c = t(iu, iu) + Scalar(0.75) * s;
      tr = Scalar(2) * c;
      det = c * c + Scalar(0.4375) * s * s;
    }

    const Scalar h00 = t(il, il), h10 = t(il + 1, il), h01 = t(il, il + 1), h11 = t(il + 1, il + 1);
    Vec3 x(h00 * h00 + h01 * h10 - tr * h00 + det, h10 * (h00 + h11 - tr), h10 * t(il + 2, il + 1));

    for (Eigen::Index k = il; k + 2 <= iu; ++k) {
      detail::SmallReflector<Scalar, 3> h(x);
      const Eigen::Index c0 = k > il ? k - 1 : il;
      h.apply_left(t, k, c0, n);
      h.apply_right(t, k, 0, std::min(k + 4, iu + 1));
      h.apply_right(q, k, 0, n);
      if (k > il) {
        t(k, k - 1) = h.beta;
        t(k + 1, k - 1) = Scalar(0);
        t(k + 2, k - 1) = Scalar(0);
      }
      x[0] = t(k + 1, k);
      x[1] = t(k + 2, k);
      x[2] = (k + 3 <= iu) ? t(k + 3, k) : Scalar(0);
    }
    {
      const Eigen::Index k = iu - 1;
      detail::SmallReflector<Scalar, 2> h(Vec2(x[0], x[1]));
      h.apply_left(t, k, k - 1, n);
      h.apply_right(t, k, 0, iu + 1);
      h.apply_right(q, k, 0, n);
      t(k, k - 1) = h.beta;
      t(k + 1, k - 1) = Scalar(0);
    }
  }

  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j + 2; i < n; ++i) t(i, j) = Scalar(0);
  return out;
}

}  // namespace klyap
