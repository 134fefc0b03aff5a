#include "klyap/flow.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "klyap/errors.hpp"
#include "test_support.hpp"

namespace klyap {
namespace {

using testing::expm_taylor;
using testing::random_point;
using testing::uniform;

VectorXd vec1(double a) { return VectorXd::Constant(1, a); }
VectorXd vec2(double a, double b) { return (VectorXd(2) << a, b).finished(); }

const PolynomialMap& decay1d() {
  static const PolynomialMap f = PolynomialMap::linear(-MatrixXd::Identity(1, 1));
  return f;
}

PolynomialMap hamiltonian_half_norm() { return PolynomialMap(2, {{Term{0.5, {{2, 0}}}, Term{0.5, {{0, 2}}}}}); }

MatrixXd am() {
  MatrixXd a(2, 2);
  a << -2, 1, -1, -3;
  return a;
}

TEST(IntegrateFlow, ScalarDecay) {
  const VectorXd x = integrate_flow(decay1d(), vec1(1.0), 1.0);
  EXPECT_NEAR(x[0], std::exp(-1.0), 1e-10 * std::exp(-1.0));
}

TEST(IntegrateFlow, LinearFieldMatchesMatrixExponential) {
  const Problem p = builtin_system("linear2d");
  const VectorXd x = integrate_flow(p.dynamics, vec2(1, 1), 0.5);
  const VectorXd expected = expm_taylor(0.5 * am()) * vec2(1, 1);
  EXPECT_LT((x - expected).norm(), 1e-9 * expected.norm());
}

TEST(IntegrateFlow, EquilibriumIsFixed) {
  for (const char* name : {"linear2d", "vdp_modified", "port_hamiltonian_demo"}) {
    const Problem p = builtin_system(name);
    EXPECT_EQ(integrate_flow(p.dynamics, p.domain.equilibrium(), 3.7), p.domain.equilibrium()) << name;
  }
}

TEST(IntegrateFlow, FiniteTimeBlowUpRaises) {
  const PolynomialMap f(1, {{Term{1.0, {{2}}}}});
  EXPECT_THROW(integrate_flow(f, vec1(1.0), 2.0), IntegrationError);
  EXPECT_THROW(integrate_flow(f, vec1(1.0), -1.0), std::invalid_argument);
}

TEST(IntegrateFlow, SemigroupProperty) {
  const Problem p = builtin_system("vdp_modified");
  const IntegratorConfig cfg;
  for (int i = 0; i < 10; ++i) {
    const VectorXd z = random_point(vec2(-2, -2), vec2(2, 2));
    const double s = uniform(0.0, 3.0), t = uniform(0.0, 3.0);
    const VectorXd a = integrate_flow(p.dynamics, integrate_flow(p.dynamics, z, s), t);
    const VectorXd b = integrate_flow(p.dynamics, z, s + t);
    EXPECT_LE((a - b).norm(), 10.0 * (cfg.rel_tol * b.norm() + cfg.abs_tol)) << i;
  }
}

TEST(IntegrateFlow, TrajectoriesStayInsideWhenTangentHolds) {
  for (const char* name : {"linear2d", "vdp_modified"}) {
    const Problem p = builtin_system(name);
    ASSERT_TRUE(check_tangent(p.dynamics, p.domain).passed);
    IntegratorConfig cfg;
    cfg.max_time = 60.0;
    for (int i = 0; i < 10; ++i) {
      const VectorXd z = random_point(p.domain.lower(), p.domain.upper());
      const FlowResult r = integrate_flow_checked(p.dynamics, z, cfg.max_time, p.domain, cfg);
      EXPECT_LE(r.max_overshoot, 1e-8) << name;
    }
  }
}

TEST(IntegrateFlow, ExitIsReportedNotClamped) {
  const PolynomialMap f = PolynomialMap::linear(MatrixXd::Identity(2, 2));
  const FlowResult r = integrate_flow_checked(f, vec2(0.5, 0), 1.0, BoxDomain::cube(2, 1.0));
  EXPECT_NEAR(r.state[0], 0.5 * std::exp(1.0), 1e-8);
  EXPECT_NEAR(r.max_overshoot, 0.5 * std::exp(1.0) - 1.0, 1e-8);
}

TEST(CostOracle, ScalarDecay) {
  const CostIntegral c = cost_oracle(decay1d(), NuclearCost::coordinates(1), vec1(1.0));
  EXPECT_NEAR(c.value, 0.5, 1e-9);
  EXPECT_GE(c.tail_bound, 0.0);
  EXPECT_LT(c.tail_bound, 1e-10);
  EXPECT_GT(c.horizon, 0.0);
}

TEST(CostOracle, Linear2dQuadraticForm) {
  const Problem p = builtin_system("linear2d");
  MatrixXd x(2, 2);
  x << 17.0 / 70.0, 1.0 / 70.0, 1.0 / 70.0, 12.0 / 70.0;
  for (int i = 0; i < 10; ++i) {
    const VectorXd z = random_point(vec2(-1, -1), vec2(1, 1));
    EXPECT_NEAR(cost_oracle(p.dynamics, p.cost, z).value, z.dot(x * z), 1e-9);
  }
}

TEST(CostOracle, EquilibriumHasZeroCost) {
  const Problem p = builtin_system("vdp_modified");
  const CostIntegral c = cost_oracle(p.dynamics, p.cost, vec2(0, 0));
  EXPECT_EQ(c.value, 0.0);
  EXPECT_EQ(c.horizon, 0.0);
}

TEST(CostOracle, NonDecayingCostRaises) {
  IntegratorConfig cfg;
  cfg.max_time = 5.0;
  EXPECT_THROW(cost_oracle(PolynomialMap::zero(1, 1), NuclearCost::coordinates(1), vec1(1.0), cfg), IntegrationError);
}

TEST(CostOracle, NonIncreasingAlongFlow) {
  const Problem p = builtin_system("vdp_modified");
  const double tail_tol = 1e-10;
  for (int i = 0; i < 5; ++i) {
    const VectorXd z = random_point(vec2(-2, -2), vec2(2, 2));
    const double v0 = cost_oracle(p.dynamics, p.cost, z, {}, tail_tol).value;
    const VectorXd zt = integrate_flow(p.dynamics, z, uniform(0.1, 2.0));
    EXPECT_LE(cost_oracle(p.dynamics, p.cost, zt, {}, tail_tol).value, v0 + 10.0 * tail_tol);
  }
}

TEST(CheckTangent, Linear2d) {
  const Problem p = builtin_system("linear2d");
  const HypothesisReport r = check_tangent(p.dynamics, p.domain);
  EXPECT_TRUE(r.passed);
  EXPECT_DOUBLE_EQ(r.witness.at("max_boundary_flux"), -1.0);
}

TEST(CheckTangent, OutwardFieldFails) {
  const PolynomialMap f = PolynomialMap::linear(MatrixXd::Identity(2, 2));
  const HypothesisReport r = check_tangent(f, BoxDomain::cube(2, 1.0));
  EXPECT_FALSE(r.passed);
  // unit face normals: νᵀf = x_k = 1 on every face
  EXPECT_DOUBLE_EQ(r.witness.at("max_boundary_flux"), 1.0);
}

TEST(CheckTangent, VanDerPolPasses) {
  const Problem p = builtin_system("vdp_modified");
  EXPECT_TRUE(check_tangent(p.dynamics, p.domain).passed);
}

TEST(EstimateOmega0, ClosedForms) {
  const Problem lin = builtin_system("linear2d");
  const auto grid = uniform_grid(lin.domain, 41, &lin.weight);
  EXPECT_NEAR(estimate_omega0(lin.dynamics, lin.weight, grid), -2.0, 1e-9);

  const PolynomialMap neg = PolynomialMap::linear(-MatrixXd::Identity(2, 2));
  EXPECT_NEAR(estimate_omega0(neg, lin.weight, grid), -1.0, 1e-9);

  EXPECT_EQ(estimate_omega0(lin.dynamics, WeightFunction::constant(2.0, 2), grid), 0.0);
  EXPECT_THROW(estimate_omega0(lin.dynamics, lin.weight, {}), std::invalid_argument);
}

TEST(EstimateOmega0, RefinementNeverDecreases) {
  const Problem p = builtin_system("vdp_modified");
  double previous = -1e300;
  for (int n : {5, 9, 17, 33}) {  // nested uniform grids
    const double est = estimate_omega0(p.dynamics, p.weight, uniform_grid(p.domain, n, &p.weight));
    EXPECT_GE(est, previous) << n;
    previous = est;
  }
}

TEST(CheckDecayBound, ScalarDecayIsTight) {
  const PolynomialMap f = PolynomialMap::linear(-MatrixXd::Identity(2, 2));
  const auto w = WeightFunction::inverse_norm(vec2(0, 0));
  const HypothesisReport r = check_decay_bound(f, w, vec2(0.6, -0.3), {0.0, 0.5, 1.0, 2.0, 4.0}, -1.0);
  EXPECT_TRUE(r.passed);
  EXPECT_NEAR(r.witness.at("max_violation"), 0.0, 1e-8);
}

TEST(CheckDecayBound, Linear2dRandomStarts) {
  const Problem p = builtin_system("linear2d");
  std::vector<double> times;
  for (int i = 0; i <= 40; ++i) times.push_back(0.1 * i);
  for (int i = 0; i < 10; ++i) {
    const VectorXd z = random_point(vec2(-1, -1), vec2(1, 1));
    EXPECT_TRUE(check_decay_bound(p.dynamics, p.weight, z, times, -2.0).passed);
  }
  EXPECT_FALSE(check_decay_bound(p.dynamics, p.weight, vec2(0.5, 0.5), times, -10.0).passed);
}

TEST(CheckPortHamiltonian, DampingSetsOmega0) {
  const PolynomialMap h = hamiltonian_half_norm();
  MatrixXd j(2, 2);
  j << 0, 1, -1, 0;
  const auto grid = uniform_grid(BoxDomain::cube(2, 1.0), 20);
  const auto jm = PolynomialMatrix::constant(j);
  const auto r1 = check_port_hamiltonian(h, jm, PolynomialMatrix::constant(MatrixXd::Identity(2, 2)), grid);
  EXPECT_TRUE(r1.passed);
  EXPECT_NEAR(r1.witness.at("omega0"), -1.0, 1e-12);
  const auto r0 = check_port_hamiltonian(h, jm, PolynomialMatrix::constant(MatrixXd::Zero(2, 2)), grid);
  EXPECT_FALSE(r0.passed);
  EXPECT_EQ(r0.witness.at("omega0"), 0.0);
  const auto r2 = check_port_hamiltonian(h, jm, PolynomialMatrix::constant(2.0 * MatrixXd::Identity(2, 2)), grid);
  EXPECT_TRUE(r2.passed);
  EXPECT_NEAR(r2.witness.at("omega0"), -2.0, 1e-12);
  EXPECT_THROW(check_port_hamiltonian(h, jm, PolynomialMatrix::constant(MatrixXd::Identity(2, 2)), {vec2(0, 0)}),
               std::domain_error);
}

TEST(CheckLinearization, Examples) {
  const auto vdp = check_linearization(builtin_system("vdp_modified").dynamics, vec2(0, 0));
  EXPECT_TRUE(vdp.passed);
  EXPECT_NEAR(vdp.witness.at("spectral_abscissa"), -0.1, 1e-9);
  const auto lin = check_linearization(builtin_system("linear2d").dynamics, vec2(0, 0));
  EXPECT_NEAR(lin.witness.at("spectral_abscissa"), -2.5, 1e-12);
  const auto up = check_linearization(PolynomialMap::linear(MatrixXd::Identity(2, 2)), vec2(0, 0));
  EXPECT_FALSE(up.passed);
  EXPECT_NEAR(up.witness.at("spectral_abscissa"), 1.0, 1e-14);
  EXPECT_THROW(check_linearization(PolynomialMap::linear(MatrixXd::Identity(2, 2)), vec2(1, 0)), std::invalid_argument);
}

}  // namespace
}  // namespace klyap
