#include "klyap/basis.hpp"
#include "klyap/linalg/sym_eig.hpp"

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace klyap {
namespace {

using testing::fd_gradient;
using testing::random_matrix;
using testing::random_point;
using testing::uniform;

VectorXd vec1(double a) { return VectorXd::Constant(1, a); }
VectorXd vec2(double a, double b) { return (VectorXd(2) << a, b).finished(); }

TensorGrid unit_grid_1d(int n) { return tensor_grid({gauss_legendre(n)}, WeightFunction::constant(1.0, 1)); }

TEST(Legendre, RecurrenceExamples) {
  EXPECT_EQ(legendre_eval(0, 0.3), std::make_pair(1.0, 0.0));
  EXPECT_EQ(legendre_eval(1, 0.3), std::make_pair(0.3, 1.0));
  const auto p2 = legendre_eval(2, 0.5);
  EXPECT_NEAR(p2.first, -0.125, 1e-16);
  EXPECT_NEAR(p2.second, 1.5, 1e-15);
  const auto p3 = legendre_eval(3, 0.5);
  EXPECT_NEAR(p3.first, -0.4375, 1e-16);
  EXPECT_NEAR(p3.second, 0.375, 1e-15);
  for (int k = 0; k <= 20; ++k) {
    EXPECT_NEAR(legendre_eval(k, 1.0).first, 1.0, 1e-14) << k;
    EXPECT_NEAR(legendre_eval(k, 1.0).second, 0.5 * k * (k + 1), 1e-11) << k;
    EXPECT_NEAR(legendre_eval(k, -1.0).first, (k % 2 ? -1.0 : 1.0), 1e-14) << k;
  }
}

TEST(Legendre, DerivativeMatchesFiniteDifferences) {
  for (int k = 0; k <= 15; ++k) {
    const double x = uniform(-0.95, 0.95);
    const double fd = (legendre_eval(k, x + 1e-6).first - legendre_eval(k, x - 1e-6).first) / 2e-6;
    EXPECT_NEAR(legendre_eval(k, x).second, fd, 1e-6 * std::max(1.0, std::abs(fd))) << k;
  }
}

TEST(Basis1D, Counts) {
  EXPECT_EQ(Basis1D::legendre(11).count(), 12);
  EXPECT_EQ(Basis1D::clamped_bspline(-3, 3, 21, 4).count(), 24);
  EXPECT_EQ(Basis1D::bspline({0, 0, 1, 2, 2}, 1).count(), 3);
  EXPECT_EQ(Basis1D::clamped_bspline(0, 1, 5, 2).breakpoints().size(), 5u);
  EXPECT_THROW(Basis1D::bspline({0, 1}, 1), std::invalid_argument);
  EXPECT_THROW(Basis1D::bspline({0, 2, 1}, 1), std::invalid_argument);
}

TEST(BSpline, HatFunction) {
  const Basis1D hat = Basis1D::bspline({0, 0, 1, 2, 2}, 1);
  EXPECT_DOUBLE_EQ(hat.eval(1, 1.0).first, 1.0);
  EXPECT_DOUBLE_EQ(hat.eval(1, 0.5).first, 0.5);
  EXPECT_DOUBLE_EQ(hat.eval(1, 0.5).second, 1.0);
  EXPECT_DOUBLE_EQ(hat.eval(1, 1.5).second, -1.0);
  EXPECT_DOUBLE_EQ(hat.eval(0, 0.0).first, 1.0);
  EXPECT_DOUBLE_EQ(hat.eval(2, 2.0).first, 1.0);
}

TEST(BSpline, PartitionOfUnityAndLocalSupport) {
  for (int degree : {0, 1, 2, 3, 4}) {
    const Basis1D b = Basis1D::clamped_bspline(-3.0, 3.0, 11, degree);
    VectorXd v(b.count()), dv(b.count());
    for (int i = 0; i < 30; ++i) {
      const double x = i == 0 ? 3.0 : uniform(-3.0, 3.0);
      b.eval_all(x, v, dv);
      EXPECT_NEAR(v.sum(), 1.0, 1e-14) << degree;
      EXPECT_NEAR(dv.sum(), 0.0, 1e-12) << degree;
      EXPECT_GE(v.minCoeff(), 0.0);
      EXPECT_LE((v.array() > 0.0).count(), degree + 1);
      for (Index j = 0; j < b.count(); ++j) {
        const double lo = b.knots()[static_cast<std::size_t>(j)];
        const double hi = b.knots()[static_cast<std::size_t>(j + degree + 1)];
        if (x < lo || x > hi) EXPECT_EQ(v[j], 0.0);
      }
    }
  }
}

TEST(BSpline, DerivativeMatchesFiniteDifferences) {
  const Basis1D b = Basis1D::clamped_bspline(-1.0, 1.0, 7, 3);
  for (int i = 0; i < 20; ++i) {
    const double x = uniform(-0.99, 0.99);
    for (Index j = 0; j < b.count(); ++j) {
      const double fd = (b.eval(j, x + 1e-7).first - b.eval(j, x - 1e-7).first) / 2e-7;
      EXPECT_NEAR(b.eval(j, x).second, fd, 1e-5) << j;
    }
  }
}

TEST(GramMatrix, NormalizedLegendreIsIdentity) {
  const TensorBasis tb({Basis1D::legendre(5), Basis1D::legendre(4)});
  const TensorGrid g = tensor_grid({gauss_legendre(8), gauss_legendre(8)}, WeightFunction::constant(1.0, 2));
  EXPECT_LT((gram_matrix(tb, g) - MatrixXd::Identity(30, 30)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(GramMatrix, MonomialPair) {
  const TensorBasis tb({Basis1D::legendre(1, -1.0, 1.0, false)});
  MatrixXd expected(2, 2);
  expected << 2, 0, 0, 2.0 / 3.0;
  EXPECT_LT((gram_matrix(tb, unit_grid_1d(3)) - expected).norm(), 1e-15);
}

TEST(GramMatrix, SymmetricPositiveSemidefinite) {
  const MatrixXd v = random_matrix(40, 12);
  VectorXd w(40);
  for (Index i = 0; i < 40; ++i) w[i] = uniform(0.0, 1.0);
  const MatrixXd g = gram_matrix(v, w);
  EXPECT_EQ((g - g.transpose()).norm(), 0.0);
  EXPECT_GE(sym_eig(g).values.minCoeff(), -1e-13 * g.norm());
}

TEST(Orthonormalize, Examples) {
  const Whitening id = orthonormalize(MatrixXd::Identity(3, 3));
  EXPECT_EQ(id.rank, 3);
  EXPECT_LT((id.w.transpose() * id.w - MatrixXd::Identity(3, 3)).norm(), 1e-15);

  const MatrixXd d = Eigen::Vector2d(4, 1).asDiagonal();
  const Whitening wd = orthonormalize(d);
  EXPECT_LT((wd.w.cwiseAbs() - MatrixXd(Eigen::Vector2d(0.5, 1.0).asDiagonal())).norm(), 1e-15);

  const MatrixXd ones = MatrixXd::Ones(2, 2);
  const Whitening r1 = orthonormalize(ones);
  EXPECT_EQ(r1.rank, 1);
  EXPECT_NEAR((r1.w.transpose() * ones * r1.w)(0, 0), 1.0, 1e-14);
}

TEST(Orthonormalize, RandomGramIsWhitened) {
  const MatrixXd b = random_matrix(30, 10);
  const MatrixXd g = b.transpose() * b;
  const Whitening wh = orthonormalize(g);
  EXPECT_EQ(wh.rank, 10);
  EXPECT_LT((wh.w.transpose() * g * wh.w - MatrixXd::Identity(10, 10)).norm(), 1e-12);
}

TEST(ShiftToEquilibrium, QuadraticLegendreExample) {
  const TensorBasis raw({Basis1D::legendre(2, -1.0, 1.0, false)});
  const TensorBasis s = shift_to_equilibrium(raw, vec1(0.0));
  ASSERT_EQ(s.size(), 2);
  EXPECT_TRUE(s.equilibrium_vanishing());
  for (double x : {-0.7, 0.2, 0.9}) {
    const VectorXd v = s.eval(vec1(x));
    EXPECT_NEAR(v[0], x, 1e-15);
    EXPECT_NEAR(v[1], 1.5 * x * x, 1e-15);
  }
  // already shifted: unchanged
  EXPECT_EQ(shift_to_equilibrium(s, vec1(0.5)).offsets(), s.offsets());
}

TEST(ShiftToEquilibrium, EveryFunctionVanishesAtEquilibrium) {
  const VectorXd eq = vec2(0.3, -0.4);
  const TensorBasis leg({Basis1D::legendre(4, -1, 1), Basis1D::legendre(3, -1, 1)});
  const TensorBasis spl({Basis1D::clamped_bspline(-1, 1, 6, 3), Basis1D::clamped_bspline(-1, 1, 5, 2)});
  for (const TensorBasis* raw : {&leg, &spl}) {
    const TensorBasis s = shift_to_equilibrium(*raw, eq);
    EXPECT_EQ(s.size(), raw->size() - 1);
    EXPECT_EQ(s.eval(eq).cwiseAbs().maxCoeff(), 0.0);
  }
  EXPECT_THROW(shift_to_equilibrium(leg, VectorXd::Zero(3)), std::invalid_argument);
}

TEST(ShiftToEquilibrium, SpanPlusConstantIsUnchanged) {
  const VectorXd eq = vec2(-0.2, 0.5);
  const TensorBasis raw({Basis1D::clamped_bspline(-1, 1, 5, 2), Basis1D::legendre(3, -1, 1)});
  const TensorBasis s = shift_to_equilibrium(raw, eq);
  const int q = 200;
  MatrixXd a(q, raw.size()), b(q, s.size() + 1);
  for (int i = 0; i < q; ++i) {
    const VectorXd x = random_point(vec2(-1, -1), vec2(1, 1));
    a.row(i) = raw.eval(x).transpose();
    b.row(i) << 1.0, s.eval(x).transpose();
  }
  // each raw function is reproduced by {1} ∪ shifted, and vice versa
  const auto qr_b = b.colPivHouseholderQr();
  const auto qr_a = a.colPivHouseholderQr();
  EXPECT_LT((b * qr_b.solve(a) - a).norm(), 1e-10 * a.norm());
  EXPECT_LT((a * qr_a.solve(b) - b).norm(), 1e-10 * b.norm());
}

TEST(TensorBasis, IndexSums) {
  const TensorBasis full({Basis1D::legendre(3), Basis1D::legendre(3)});
  EXPECT_EQ(full.size(), 16);
  const TensorBasis total({Basis1D::legendre(3), Basis1D::legendre(3)}, 3);
  EXPECT_EQ(total.size(), 10);
  for (const auto& idx : total.indices()) EXPECT_LE(idx[0] + idx[1], 3);
}

TEST(TensorBasis, GradientsMatchFiniteDifferences) {
  const TensorBasis raw = shift_to_equilibrium(
      TensorBasis({Basis1D::legendre(5, -2, 2), Basis1D::clamped_bspline(-2, 2, 6, 3)}), vec2(0, 0));
  VectorXd v;
  MatrixXd g;
  for (int i = 0; i < 10; ++i) {
    const VectorXd x = random_point(vec2(-1.9, -1.9), vec2(1.9, 1.9));
    raw.eval_with_gradient(x, v, g);
    EXPECT_LT((v - raw.eval(x)).norm(), 1e-14);
    for (Index j = 0; j < raw.size(); ++j) {
      const VectorXd fd = fd_gradient([&](const VectorXd& y) { return raw.eval(y)[j]; }, x);
      EXPECT_LE((g.col(j) - fd).norm(), 1e-6 * std::max(1.0, fd.norm())) << j;
    }
  }
}

TEST(OrthonormalBasis, DiscreteOrthonormality) {
  const Problem lin = builtin_system("linear2d");
  const TensorGrid g1 = tensor_grid({gauss_legendre(12, -1, 1), gauss_legendre(12, -1, 1)}, lin.weight,
                                    MeasureNormalization::probability);
  const OrthonormalBasis a(
      shift_to_equilibrium(TensorBasis({Basis1D::legendre(11, -1, 1), Basis1D::legendre(11, -1, 1)}), vec2(0, 0)), g1);
  EXPECT_EQ(a.rank(), 143);
  EXPECT_LE(a.orthonormality_defect(), 1e-9);

  const Problem vdp = builtin_system("vdp_modified");
  const TensorGrid g2 = tensor_grid({composite_rule({-3, -1, 0, 1, 3}, 6), composite_rule({-3, -1, 0, 1, 3}, 6)},
                                    vdp.weight);
  const OrthonormalBasis b(shift_to_equilibrium(TensorBasis({Basis1D::bspline({-3, -3, -3, -1, 0, 1, 3, 3, 3}, 2),
                                                             Basis1D::bspline({-3, -3, -3, -1, 0, 1, 3, 3, 3}, 2)}),
                                                vec2(0, 0)),
                           g2);
  EXPECT_LE(b.orthonormality_defect(), 1e-9);
  EXPECT_EQ(b.eval(vec2(0, 0)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(OrthonormalBasis, ProjectionExamples) {
  // normalized Legendre on [-1, 1] with the probability measure: φ_k = √2·P̃_k
  const TensorGrid g = tensor_grid({gauss_legendre(6)}, WeightFunction::constant(1.0, 1),
                                   MeasureNormalization::probability);
  const OrthonormalBasis onb(TensorBasis({Basis1D::legendre(3)}), g);
  ASSERT_EQ(onb.rank(), 4);
  VectorXd samples = onb.table().values.col(2);
  VectorXd c = project(samples, onb);
  EXPECT_NEAR(c[2], 1.0, 1e-13);
  EXPECT_NEAR(c.norm(), 1.0, 1e-13);

  // a function inside the span is reproduced exactly
  samples = g.points.row(0).transpose().array().cube();
  c = project(samples, onb);
  EXPECT_LT((onb.table().values * c - samples).norm(), 1e-13);
  EXPECT_NEAR(c.squaredNorm(), onb.inner(samples, samples), 1e-14);
}

TEST(OrthonormalBasis, IndependentOfRawParametrization) {
  // two raw bases with the same span give the same projections' norms
  const TensorGrid g = tensor_grid({gauss_legendre(10, -1, 2)}, WeightFunction::constant(1.0, 1));
  const OrthonormalBasis a(TensorBasis({Basis1D::legendre(5, -1, 2, true)}), g);
  const OrthonormalBasis b(TensorBasis({Basis1D::legendre(5, -3, 4, false)}), g);
  for (int i = 0; i < 5; ++i) {
    VectorXd s(g.size());
    for (Index q = 0; q < g.size(); ++q) s[q] = std::sin(3.0 * g.points(0, q) + i);
    EXPECT_NEAR(project(s, a).norm(), project(s, b).norm(), 1e-12);
    const double x = uniform(-1, 2);
    const VectorXd pa = a.eval(vec1(x)).transpose() * project(s, a);
    const VectorXd pb = b.eval(vec1(x)).transpose() * project(s, b);
    EXPECT_NEAR(pa[0], pb[0], 1e-11);
  }
}

TEST(OrthonormalBasis, RotationPreservesOrthonormality) {
  const TensorGrid g = unit_grid_1d(8);
  const OrthonormalBasis onb(TensorBasis({Basis1D::clamped_bspline(-1, 1, 4, 2)}), g);
  const MatrixXd o = random_matrix(onb.rank(), onb.rank()).householderQr().householderQ();
  const OrthonormalBasis r = onb.rotated(o);
  EXPECT_LE(r.orthonormality_defect(), 1e-12);
  const VectorXd x = vec1(0.37);
  EXPECT_NEAR(r.eval(x).squaredNorm(), onb.eval(x).squaredNorm(), 1e-12);
}

}  // namespace
}  // namespace klyap
