#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "klyap/model.hpp"

namespace klyap {

/// One-dimensional quadrature rule on [a, b].
struct Rule1D {
  VectorXd nodes;
  VectorXd weights;
  double a = 0.0;
  double b = 0.0;

  Index size() const { return nodes.size(); }
  template <typename F>
  double integrate(F&& f) const {
    double s = 0.0;
    for (Index i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
    return s;
  }
};

/// n-point Gauss–Legendre rule on [a, b], exact for degree ≤ 2n − 1.
Rule1D gauss_legendre(int n, double a = -1.0, double b = 1.0);

/// Gauss–Legendre with n_per_cell points on every cell between consecutive breakpoints.
Rule1D composite_rule(const std::vector<double>& breakpoints, int n_per_cell);

/// How the discrete inner product scales the volume weights.
enum class MeasureNormalization {
  none,        ///< ⟨φ,ψ⟩ = Σ ω_q w²(x_q) φ ψ, Σ ω_q = |Ω|
  probability  ///< ⟨φ,ψ⟩ = Σ ω_q w²(x_q) φ ψ / |Ω|
};

/// Tensor-product grid with cached w² factors. Points are stored column-wise
/// (d × Q); the last dimension varies fastest.
struct TensorGrid {
  MatrixXd points;
  VectorXd vol_weights;
  VectorXd w2_factors;
  double measure_scale = 1.0;
  std::vector<Index> shape;

  Index size() const { return points.cols(); }
  Index dim() const { return points.rows(); }
  /// ω_q · w²(x_q) · measure_scale, the weights of the discrete inner product.
  VectorXd inner_weights() const { return measure_scale * vol_weights.cwiseProduct(w2_factors); }
};

/// Cartesian product of the rules. Throws std::domain_error when a node
/// coincides with a singular point of w (use even node counts around it).
TensorGrid tensor_grid(const std::vector<Rule1D>& rules, const WeightFunction& w,
                       MeasureNormalization normalization = MeasureNormalization::none);

/// CSV dump: x_1..x_d, omega, w2.
void write_grid_csv(std::ostream& os, const TensorGrid& grid);

}  // namespace klyap
