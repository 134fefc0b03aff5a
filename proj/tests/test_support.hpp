#pragma once

// Helpers shared by the unit tests: seeded random data and small reference
// computations that do not go through the library code under test.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

namespace klyap::testing {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline std::mt19937_64& rng(std::uint64_t reseed = 0) {
  static std::mt19937_64 gen(12345);
  if (reseed) gen.seed(reseed);
  return gen;
}

inline double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng()); }

inline MatrixXd random_matrix(Eigen::Index r, Eigen::Index c) {
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(-1.0, 1.0);
  return m;
}

inline VectorXd random_point(const VectorXd& lo, const VectorXd& hi) {
  VectorXd x(lo.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = uniform(lo[i], hi[i]);
  return x;
}

/// exp(A) by scaling and squaring of a truncated Taylor series.
inline MatrixXd expm_taylor(const MatrixXd& a) {
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  while (norm / std::ldexp(1.0, squarings) > 0.25) ++squarings;
  const MatrixXd s = a / std::ldexp(1.0, squarings);
  MatrixXd term = MatrixXd::Identity(a.rows(), a.cols());
  MatrixXd sum = term;
  for (int k = 1; k <= 20; ++k) {
    term = term * s / static_cast<double>(k);
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

/// Central finite-difference gradient of a scalar function.
template <typename F>
VectorXd fd_gradient(F&& f, const VectorXd& x, double h = 1e-6) {
  VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline double rel_err(const MatrixXd& a, const MatrixXd& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

/// Stable K = B − (α + λ_max((B+Bᵀ)/2)) I: the symmetric part is ≤ −α·I.
inline MatrixXd random_stable(Eigen::Index n, double alpha = 0.5) {
  const MatrixXd b = random_matrix(n, n);
  const MatrixXd sym = 0.5 * (b + b.transpose());
  const double top = Eigen::SelfAdjointEigenSolver<MatrixXd>(sym, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  return b - (alpha + top) * MatrixXd::Identity(n, n);
}

}  // namespace klyap::testing
