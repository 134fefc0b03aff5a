#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace klyap {

/// Dense LU factorization with partial pivoting, P A = L U stored in place.
/// Unblocked; meant for the small systems of the quasi-triangular solve.
template <typename Scalar>
class DenseLU {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit DenseLU(Matrix a) : lu_(std::move(a)), perm_(lu_.rows()) {
    if (lu_.rows() != lu_.cols()) {
      throw std::invalid_argument("DenseLU: matrix must be square");
    }
    const Eigen::Index n = lu_.rows();
    for (Eigen::Index i = 0; i < n; ++i) perm_[i] = i;

    Scalar scale(0);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) scale = std::max(scale, std::abs(lu_(i, j)));

    for (Eigen::Index k = 0; k < n; ++k) {
      Eigen::Index pivot = k;
      Scalar best = std::abs(lu_(k, k));
      for (Eigen::Index i = k + 1; i < n; ++i) {
        if (std::abs(lu_(i, k)) > best) {
          best = std::abs(lu_(i, k));
          pivot = i;
        }
      }
      if (best <= scale * Eigen::NumTraits<Scalar>::epsilon() * Scalar(n) || best == Scalar(0)) {
        singular_ = true;
      }
      if (pivot != k) {
        lu_.row(k).swap(lu_.row(pivot));
        std::swap(perm_[k], perm_[pivot]);
      }
      if (lu_(k, k) == Scalar(0)) continue;
      const Eigen::Index m = n - k - 1;
      lu_.col(k).tail(m) /= lu_(k, k);
      lu_.bottomRightCorner(m, m).noalias() -= lu_.col(k).tail(m) * lu_.row(k).tail(m);
    }
  }

  /// True when a pivot fell below n·eps relative to the largest entry.
  bool singular() const { return singular_; }

  Vector solve(const Vector& b) const {
    if (singular_) throw std::runtime_error("DenseLU: singular linear system");
    const Eigen::Index n = lu_.rows();
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = b[perm_[i]];
    for (Eigen::Index i = 0; i < n; ++i) x[i] -= lu_.row(i).head(i).dot(x.head(i));
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      x[i] = (x[i] - lu_.row(i).tail(n - i - 1).dot(x.tail(n - i - 1))) / lu_(i, i);
    }
    return x;
  }

 private:
  Matrix lu_;
  std::vector<Eigen::Index> perm_;
  bool singular_ = false;
};

}  // namespace klyap
