#pragma once

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "klyap/model.hpp"
#include "klyap/quadrature.hpp"

namespace klyap {

/// (P_k(x), P_k'(x)) on [-1, 1] by the three-term recurrence.
std::pair<double, double> legendre_eval(int k, double x);

/// A family of univariate functions on [a, b]: Legendre polynomials (optionally
/// L²-normalized on [a, b]) or B-splines over a knot vector.
class Basis1D {
 public:
  enum class Kind { legendre, bspline };

  static Basis1D legendre(int max_degree, double a = -1.0, double b = 1.0, bool normalized = true);
  /// B-splines of the given degree over a full (non-decreasing) knot vector.
  static Basis1D bspline(std::vector<double> knots, int degree);
  /// Clamped B-splines on uniformly spaced breakpoints (endpoints included).
  static Basis1D clamped_bspline(double a, double b, int breakpoints, int degree);

  Kind kind() const { return kind_; }
  Index count() const;
  int degree() const { return degree_; }
  double a() const { return a_; }
  double b() const { return b_; }
  const std::vector<double>& knots() const { return knots_; }
  /// Distinct knots (spline cell boundaries), or {a, b} for Legendre.
  std::vector<double> breakpoints() const;

  /// Values and first derivatives of every function at x.
  void eval_all(double x, Eigen::Ref<VectorXd> values, Eigen::Ref<VectorXd> derivs) const;
  std::pair<double, double> eval(Index i, double x) const;

 private:
  Kind kind_ = Kind::legendre;
  int degree_ = 0;
  double a_ = -1.0, b_ = 1.0;
  bool normalized_ = true;
  std::vector<double> knots_;
};

/// (B_i(x), B_i'(x)) by Cox–de Boor recursion.
std::pair<double, double> bspline_eval(const Basis1D& basis, Index i, double x);

/// Tensor products Π_k B_{k,i_k}(x_k) over a retained multi-index set, with an
/// optional per-function offset making every function vanish at x_eq.
class TensorBasis {
 public:
  TensorBasis() = default;
  /// Full tensor index set, or all multi-indices with Σ i_k ≤ max_index_sum.
  explicit TensorBasis(std::vector<Basis1D> factors, std::optional<int> max_index_sum = std::nullopt);

  Index dim() const { return static_cast<Index>(factors_.size()); }
  Index size() const { return static_cast<Index>(indices_.size()); }
  const std::vector<Basis1D>& factors() const { return factors_; }
  const std::vector<std::vector<Index>>& indices() const { return indices_; }
  bool equilibrium_vanishing() const { return equilibrium_vanishing_; }
  const VectorXd& offsets() const { return offsets_; }

  VectorXd eval(const VectorXd& x) const;
  /// values (size m) and gradients (d × m).
  void eval_with_gradient(const VectorXd& x, VectorXd& values, MatrixXd& gradients) const;

  friend TensorBasis shift_to_equilibrium(const TensorBasis& basis, const VectorXd& x_eq);

 private:
  std::vector<Basis1D> factors_;
  std::vector<std::vector<Index>> indices_;
  VectorXd offsets_;
  bool equilibrium_vanishing_ = false;
};

/// Drops the constant tensor function and replaces every other b_j by
/// b_j − b_j(x_eq). For spline factors, whose constant is a partition of unity,
/// the dropped function is the one largest in magnitude at x_eq.
TensorBasis shift_to_equilibrium(const TensorBasis& basis, const VectorXd& x_eq);

/// Function values (Q × m) and partial derivatives (d matrices Q × m) on a grid.
struct EvalTable {
  MatrixXd values;
  std::vector<MatrixXd> gradients;
};

EvalTable tabulate(const TensorBasis& basis, const MatrixXd& points);

/// G_jk = Σ_q ω_q w²(x_q) b_j(x_q) b_k(x_q) (times the grid's measure scale).
MatrixXd gram_matrix(const TensorBasis& basis, const TensorGrid& grid);
MatrixXd gram_matrix(const MatrixXd& values, const VectorXd& inner_weights);

struct Whitening {
  MatrixXd w;  ///< raw-to-orthonormal coefficient map, m × rank
  Index rank = 0;
  VectorXd gram_eigenvalues;
};

/// G = V Λ Vᵀ; keeps λ_i > drop_tol·λ_max and returns W = V Λ^{-1/2}, so WᵀGW = I.
Whitening orthonormalize(const MatrixXd& gram, double drop_tol = 1e-12);

/// Raw basis whitened against the grid's discrete weighted inner product.
class OrthonormalBasis {
 public:
  OrthonormalBasis(TensorBasis raw, TensorGrid grid, double drop_tol = 1e-12);

  const TensorBasis& raw() const { return *raw_; }
  std::shared_ptr<const TensorBasis> raw_ptr() const { return raw_; }
  const TensorGrid& grid() const { return grid_; }
  const MatrixXd& whitener() const { return whitening_.w; }
  const VectorXd& gram_eigenvalues() const { return whitening_.gram_eigenvalues; }
  Index rank() const { return whitening_.rank; }
  /// Orthonormal functions tabulated on the grid.
  const EvalTable& table() const { return table_; }
  const VectorXd& inner_weights() const { return inner_weights_; }

  VectorXd eval(const VectorXd& x) const;
  void eval_with_gradient(const VectorXd& x, VectorXd& values, MatrixXd& gradients) const;

  /// Discrete inner product of two sample vectors on the grid.
  double inner(const VectorXd& a, const VectorXd& b) const;
  /// max |⟨φ_i, φ_j⟩ − δ_ij| over the grid.
  double orthonormality_defect() const;

  /// Copy with W replaced by W·O for an orthogonal O (rank × rank).
  OrthonormalBasis rotated(const MatrixXd& orthogonal) const;

 private:
  std::shared_ptr<const TensorBasis> raw_;
  TensorGrid grid_;
  Whitening whitening_;
  EvalTable table_;
  VectorXd inner_weights_;
};

/// Coefficients ⟨samples, φ_j⟩ of grid samples in the discrete inner product.
VectorXd project(const VectorXd& samples, const OrthonormalBasis& onb);

}  // namespace klyap
