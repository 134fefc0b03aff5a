#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "klyap/model.hpp"

namespace klyap {

struct IntegratorConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double max_step = 1.0;
  double max_time = 200.0;
};

/// Right-hand side y' = F(t, y).
using OdeRhs = std::function<void(double t, const VectorXd& y, VectorXd& dydt)>;
/// Called after every accepted step with (t, y).
using StepObserver = std::function<bool(double t, const VectorXd& y)>;

/// Adaptive Dormand–Prince 5(4) integration from t0 to t1. The observer may
/// return false to stop early; the time actually reached is returned.
double integrate_ode(const OdeRhs& rhs, double t0, double t1, VectorXd& y, const IntegratorConfig& cfg,
                     const StepObserver& observer = {});

struct FlowResult {
  VectorXd state;
  /// Largest distance outside the domain seen at accepted steps (0 when no
  /// domain was given or the trajectory stayed inside).
  double max_overshoot = 0.0;
};

/// Φᵗ(z) for the autonomous field f.
VectorXd integrate_flow(const PolynomialMap& f, const VectorXd& z, double t, const IntegratorConfig& cfg = {});
/// Same, reporting (not clamping) excursions outside `domain`.
FlowResult integrate_flow_checked(const PolynomialMap& f, const VectorXd& z, double t, const BoxDomain& domain,
                                  const IntegratorConfig& cfg = {});

struct CostIntegral {
  double value = 0.0;
  double horizon = 0.0;
  double tail_bound = 0.0;
};

/// v(z) = ∫₀^∞ g(Φᵗ(z)) dt by integrating ẋ = f, v̇ = g(x) until the
/// extrapolated exponential tail g(x(T))/|d log g/dt| drops below tail_tol.
/// Throws IntegrationError when the cost has not decayed by cfg.max_time.
CostIntegral cost_oracle(const PolynomialMap& f, const NuclearCost& g, const VectorXd& z,
                         const IntegratorConfig& cfg = {}, double tail_tol = 1e-10);

struct HypothesisReport {
  std::string name;
  bool passed = false;
  std::map<std::string, double> witness;
};

/// max of νᵀf over a uniform grid on every face of the box.
HypothesisReport check_tangent(const PolynomialMap& f, const BoxDomain& domain, int n_per_face = 41,
                               double tol_boundary = 1e-12);

/// Uniform grid with n points per dimension, omitting singular points of w.
std::vector<VectorXd> uniform_grid(const BoxDomain& domain, int n_per_dim, const WeightFunction* w = nullptr);

/// max over the grid of −f(x)ᵀ∇w(x)/w(x): a lower bound on the contraction type ω₀.
double estimate_omega0(const PolynomialMap& f, const WeightFunction& w, const std::vector<VectorXd>& grid);

/// max over t of w(z)/(e^{tω₀} w(Φᵗ(z))) − 1; passes when ≤ 1e-6.
HypothesisReport check_decay_bound(const PolynomialMap& f, const WeightFunction& w, const VectorXd& z,
                                   const std::vector<double>& times, double omega0,
                                   const IntegratorConfig& cfg = {});

/// ω₀ = max −∇HᵀR∇H/(2H) on the grid, plus skewness of J and symmetry/PSD of R.
HypothesisReport check_port_hamiltonian(const PolynomialMap& h, const PolynomialMatrix& j, const PolynomialMatrix& r,
                                        const std::vector<VectorXd>& grid);

/// Spectral abscissa of Df(x_eq) from the real Schur form; passes when < 0.
HypothesisReport check_linearization(const PolynomialMap& f, const VectorXd& x_eq);

}  // namespace klyap
