#include "klyap/linalg.hpp"

#include <algorithm>
#include <complex>
#include <sstream>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace klyap {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using testing::random_matrix;
using testing::random_stable;
using testing::rel_err;

MatrixXd am() {
  MatrixXd a(2, 2);
  a << -2, 1, -1, -3;
  return a;
}

MatrixXd x_linear2d() {
  MatrixXd x(2, 2);
  x << 17.0 / 70.0, 1.0 / 70.0, 1.0 / 70.0, 12.0 / 70.0;
  return x;
}

void expect_quasi_triangular(const MatrixXd& t) {
  const Index n = t.rows();
  for (Index j = 0; j < n; ++j)
    for (Index i = j + 2; i < n; ++i) EXPECT_EQ(t(i, j), 0.0);
  // no two consecutive subdiagonal nonzeros
  for (Index i = 1; i + 1 < n; ++i) EXPECT_FALSE(t(i, i - 1) != 0.0 && t(i + 1, i) != 0.0) << "at " << i;
}

TEST(SymEig, DiagonalInput) {
  const MatrixXd s = Eigen::Vector3d(3, 1, 2).asDiagonal();
  const auto e = sym_eig(s);
  EXPECT_TRUE(e.values.isApprox(Eigen::Vector3d(3, 2, 1)));
  EXPECT_NEAR(std::abs(e.vectors(0, 0)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(e.vectors(2, 1)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(e.vectors(1, 2)), 1.0, 1e-15);
}

TEST(SymEig, TwoByTwo) {
  MatrixXd s(2, 2);
  s << 2, 1, 1, 2;
  const auto e = sym_eig(s);
  EXPECT_NEAR(e.values[0], 3.0, 1e-15);
  EXPECT_NEAR(e.values[1], 1.0, 1e-15);
  EXPECT_NEAR(std::abs(e.vectors.col(0).dot(Eigen::Vector2d(1, 1).normalized())), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(e.vectors.col(1).dot(Eigen::Vector2d(1, -1).normalized())), 1.0, 1e-15);
}

TEST(SymEig, RejectsNonSymmetric) {
  EXPECT_THROW(sym_eig(MatrixXd(random_matrix(4, 4))), std::invalid_argument);
}

TEST(SymEig, ReconstructionOnRandomMatrices) {
  for (Index n : {1, 2, 7, 30, 120}) {
    const MatrixXd b = random_matrix(n, n);
    const MatrixXd s = b.transpose() * b;
    const auto e = sym_eig(s);
    const MatrixXd& v = e.vectors;
    EXPECT_LE((s * v - v * e.values.asDiagonal()).norm(), 1e-10 * s.norm()) << n;
    EXPECT_LE((v.transpose() * v - MatrixXd::Identity(n, n)).norm(), 1e-12 * n) << n;
    EXPECT_LE((s - v * e.values.asDiagonal() * v.transpose()).norm(), 1e-10 * s.norm()) << n;
    EXPECT_GE(e.values.minCoeff(), -1e-12 * e.values[0]);
    EXPECT_TRUE(std::is_sorted(e.values.data(), e.values.data() + n, std::greater<>()));
  }
}

TEST(SymEig, TinyClusterBelowNormConverges) {
  // rank-2 matrix plus rounding-level noise, the shape of a discrete Gramian
  const Index n = 143;
  const MatrixXd u = random_matrix(n, 2);
  const MatrixXd r = random_matrix(n, n);
  const MatrixXd s = u * u.transpose() + 1e-15 * (r + r.transpose());
  const auto e = sym_eig(s);
  EXPECT_LE((s * e.vectors - e.vectors * e.values.asDiagonal()).norm(), 1e-10 * s.norm());
  EXPECT_LT(std::abs(e.values[2]), 1e-12 * e.values[0]);
}

TEST(RealSchur, UpperTriangularIsFixed) {
  MatrixXd a(3, 3);
  a << 1, 2, 3, 0, 4, 5, 0, 0, 6;
  const auto s = real_schur(a);
  EXPECT_LT((s.q.cwiseAbs() - MatrixXd::Identity(3, 3)).norm(), 1e-14);
  EXPECT_LT((s.t.cwiseAbs() - a.cwiseAbs()).norm(), 1e-13);
}

TEST(RealSchur, RotationGivesComplexPair) {
  MatrixXd a(2, 2);
  a << 0, 1, -1, 0;
  const auto s = real_schur(a);
  EXPECT_EQ(s.block_starts().size(), 2u);
  const auto ev = s.eigenvalues();
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_NEAR(std::abs(ev[0].real()), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(ev[0].imag()), 1.0, 1e-15);
  EXPECT_NEAR(ev[0].imag(), -ev[1].imag(), 1e-15);
}

TEST(RealSchur, Linear2dSpectrum) {
  const auto s = real_schur(am());
  EXPECT_NEAR(s.spectral_abscissa(), -2.5, 1e-14);
  const auto ev = s.eigenvalues();
  EXPECT_NEAR(std::abs(ev[0].imag()), std::sqrt(3.0) / 2.0, 1e-14);
}

TEST(RealSchur, SymmetricInputMatchesSymEig) {
  const MatrixXd b = random_matrix(20, 20);
  const MatrixXd a = b + b.transpose();
  const auto s = real_schur(a);
  for (Index i = 1; i < 20; ++i) EXPECT_LT(std::abs(s.t(i, i - 1)), 1e-10 * a.norm());
  const VectorXd d = s.t.diagonal();
  std::vector<double> diag(d.data(), d.data() + 20);
  std::sort(diag.begin(), diag.end(), std::greater<>());
  const auto e = sym_eig(a);
  for (Index i = 0; i < 20; ++i) EXPECT_NEAR(diag[static_cast<std::size_t>(i)], e.values[i], 1e-10 * a.norm());
}

TEST(RealSchur, ReconstructionOnRandomMatrices) {
  for (Index n : {1, 2, 3, 10, 50, 200}) {
    const MatrixXd a = random_matrix(n, n);
    const auto s = real_schur(a);
    EXPECT_LE((s.q.transpose() * s.q - MatrixXd::Identity(n, n)).norm(), 1e-12 * n) << n;
    EXPECT_LE((s.q * s.t * s.q.transpose() - a).norm(), 1e-10 * a.norm()) << n;
    expect_quasi_triangular(s.t);
    for (std::size_t b = 0; b + 1 < s.block_starts().size(); ++b) {
      const Index r = s.block_starts()[b];
      if (s.block_starts()[b + 1] - r == 2) {
        // standardized 2x2 block: equal diagonal, complex eigenvalues
        EXPECT_NEAR(s.t(r, r), s.t(r + 1, r + 1), 1e-12 * a.norm());
        EXPECT_LT(s.t(r, r + 1) * s.t(r + 1, r), 0.0);
      }
    }
  }
}

TEST(Lyapunov, DiagonalCase) {
  const MatrixXd k = Eigen::Vector2d(-1, -2).asDiagonal();
  const MatrixXd expected = Eigen::Vector2d(0.5, 0.25).asDiagonal();
  EXPECT_LT((solve_lyapunov(k, MatrixXd::Identity(2, 2)) - expected).norm(), 1e-15);
  EXPECT_LT((solve_lyapunov_kron(k, MatrixXd::Identity(2, 2)) - expected).norm(), 1e-15);
}

TEST(Lyapunov, ScaledIdentity) {
  MatrixXd qs(2, 2);
  qs << 2, 1, 1, 2;
  const MatrixXd k = -2.0 * MatrixXd::Identity(2, 2);
  EXPECT_LT((solve_lyapunov(k, qs) - qs / 4.0).norm(), 1e-15);
  EXPECT_LT((solve_lyapunov_kron(k, qs) - qs / 4.0).norm(), 1e-15);
}

TEST(Lyapunov, Linear2dGramian) {
  const MatrixXd k = am().transpose();
  const MatrixXd p = solve_lyapunov(k, MatrixXd::Identity(2, 2));
  const MatrixXd pk = solve_lyapunov_kron(k, MatrixXd::Identity(2, 2));
  EXPECT_LT((p - x_linear2d()).norm(), 1e-14);
  EXPECT_LT((pk - x_linear2d()).norm(), 1e-14);
  EXPECT_LT((p - pk).norm(), 1e-12);
}

TEST(Lyapunov, ZeroRightHandSide) {
  const MatrixXd k = random_stable(6);
  EXPECT_EQ(solve_lyapunov(k, MatrixXd::Zero(6, 6)).norm(), 0.0);
  EXPECT_EQ(solve_lyapunov_kron(k, MatrixXd::Zero(6, 6)).norm(), 0.0);
}

TEST(Lyapunov, SingularSylvesterNamesEigenvalues) {
  MatrixXd k = MatrixXd::Zero(3, 3);
  k(1, 1) = -1.0;
  k(2, 2) = -2.0;
  try {
    solve_lyapunov(k, MatrixXd::Identity(3, 3));
    FAIL() << "expected SingularSylvesterError";
  } catch (const SingularSylvesterError& e) {
    EXPECT_NE(std::string(e.what()).find("eigenvalues 0 and 0"), std::string::npos) << e.what();
  }
  EXPECT_THROW(solve_lyapunov(MatrixXd(MatrixXd::Identity(2, 2)), MatrixXd(MatrixXd::Identity(2, 2))),
               SingularSylvesterError);
}

TEST(Lyapunov, RandomSolversAgree) {
  testing::rng(7);
  for (Index n : {5, 10, 25}) {
    const MatrixXd k = random_stable(n);
    const MatrixXd b = random_matrix(n, n);
    const MatrixXd qs = b * b.transpose();
    const MatrixXd p = solve_lyapunov(k, qs);
    EXPECT_LE(rel_err(p, solve_lyapunov_kron(k, qs)), 1e-10) << n;
  }
}

TEST(Lyapunov, ResidualSymmetryAndDefiniteness) {
  for (Index n : {3, 17, 60, 100}) {
    const MatrixXd k = random_stable(n, 0.1);
    const MatrixXd b = random_matrix(n, 3);
    const MatrixXd qs = b * b.transpose();
    const MatrixXd p = solve_lyapunov(k, qs);
    EXPECT_LE((k * p + p * k.transpose() + qs).norm(), 1e-10 * qs.norm()) << n;
    EXPECT_EQ((p - p.transpose()).norm(), 0.0);
    const auto e = sym_eig(p);
    EXPECT_GE(e.values.minCoeff(), -1e-10 * e.values[0]) << n;
  }
}

TEST(Lyapunov, KroneckerSizeLimit) {
  EXPECT_THROW(solve_lyapunov_kron(MatrixXd(-MatrixXd::Identity(65, 65)), MatrixXd(MatrixXd::Identity(65, 65))),
               std::invalid_argument);
}

TEST(DenseLU, SolvesAndDetectsSingularity) {
  const MatrixXd a = random_matrix(8, 8) + 4.0 * MatrixXd::Identity(8, 8);
  const VectorXd x = VectorXd::LinSpaced(8, -1, 1);
  DenseLU<double> lu(a);
  EXPECT_FALSE(lu.singular());
  EXPECT_LT((lu.solve(a * x) - x).norm(), 1e-13);
  MatrixXd s = a;
  s.row(3) = s.row(1);
  EXPECT_TRUE(DenseLU<double>(s).singular());
}

TEST(MatrixIo, RoundTripIsExact) {
  const MatrixXd m = random_matrix(4, 3);
  std::stringstream ss;
  write_matrix(ss, m);
  EXPECT_EQ(read_matrix(ss), m);
  std::stringstream bad("2 2\n1 2 3");
  EXPECT_THROW(read_matrix(bad), std::runtime_error);
}

}  // namespace
}  // namespace klyap
