#pragma once

#include <memory>
#include <vector>

#include <Eigen/Core>

#include "klyap/basis.hpp"
#include "klyap/flow.hpp"
#include "klyap/linalg/sym_eig.hpp"
#include "klyap/model.hpp"

namespace klyap {

/// Matrix of the Koopman generator φ ↦ fᵀ∇φ in an orthonormal basis:
/// K_jk = ⟨φ_j, fᵀ∇φ_k⟩.
struct GeneratorMatrix {
  MatrixXd k;
  double spectral_abscissa = 0.0;
};

/// Chat_ij = ⟨c_i, φ_j⟩ with the grid residual ‖c_i − Π c_i‖ of every observable.
struct ObservationMatrix {
  MatrixXd chat;
  VectorXd span_residual;
};

struct GramianSolution {
  MatrixXd phat;
  SymEig<double> eigen;  ///< clamped to be non-negative, descending
  double max_clamped = 0.0;
};

GeneratorMatrix assemble_generator(const PolynomialMap& f, const OrthonormalBasis& onb);
ObservationMatrix assemble_observation(const NuclearCost& g, const OrthonormalBasis& onb);

/// Solves K P̂ + P̂ Kᵀ + ChatᵀChat = 0 and decomposes P̂. Negative eigenvalues
/// up to 1e-10·λ_max are clamped to zero; larger ones raise an error.
GramianSolution solve_gramian(const GeneratorMatrix& gen, const ObservationMatrix& obs);

/// ‖K P̂ + P̂Kᵀ + ChatᵀChat‖_F / max(‖ChatᵀChat‖_F, ε).
double lyap_residual(const GeneratorMatrix& gen, const ObservationMatrix& obs, const MatrixXd& phat);
double lyap_residual(const GeneratorMatrix& gen, const ObservationMatrix& obs, const GramianSolution& sol);

/// v(x) = Σᵢ pᵢ(x)² with pᵢ = √λᵢ φᵀvᵢ, stored as raw-basis coefficients.
class SumOfSquares {
 public:
  SumOfSquares(std::shared_ptr<const TensorBasis> basis, MatrixXd raw_coefficients, VectorXd lambdas);

  Index terms() const { return lambdas_.size(); }
  const VectorXd& lambdas() const { return lambdas_; }
  const TensorBasis& basis() const { return *basis_; }
  /// Column i holds the raw-basis coefficients of pᵢ.
  const MatrixXd& raw_coefficients() const { return coeffs_; }

  double value(const VectorXd& x) const;
  /// (v(x), ∇v(x)).
  std::pair<double, VectorXd> eval(const VectorXd& x) const;
  /// pᵢ(x) for every term.
  VectorXd terms_at(const VectorXd& x) const;
  /// The first k terms only.
  SumOfSquares truncated(Index k) const;

 private:
  std::shared_ptr<const TensorBasis> basis_;
  MatrixXd coeffs_;
  VectorXd lambdas_;
};

/// Keeps the terms with λᵢ > trunc_tol·λ₁.
SumOfSquares make_sum_of_squares(const GramianSolution& sol, const OrthonormalBasis& onb, double trunc_tol = 1e-14);

std::pair<double, VectorXd> sos_eval(const SumOfSquares& sos, const VectorXd& x);

struct ResidualStats {
  double max = 0.0;
  double rms = 0.0;
};

/// Statistics of r(z) = ∇v(z)ᵀf(z) + g(z) over the points.
ResidualStats pde_residual(const SumOfSquares& sos, const PolynomialMap& f, const NuclearCost& g,
                           const std::vector<VectorXd>& points);

struct DecayFit {
  double m_hat = 0.0;
  double fit_quality = 0.0;  ///< coefficient of determination
};

/// Least-squares slope of log(Σ_{n≥N} λ_n) against log N for N in [n_min, n_max]
/// (1-based). Only positive eigenvalues enter; n_max defaults to half their count.
DecayFit decay_fit(const VectorXd& eigenvalues, int n_min, int n_max = 0);

struct LaguerreDecomposition {
  VectorXd coefficients;  ///< a_n = ∫ c(Φᵗz) e^{−t/2} L_n(t) dt, n = 0..N−1
  double horizon = 0.0;
  Index cells = 0;
  int nodes_per_cell = 0;
  double tail_bound = 0.0;

  /// Σ_{n<N} a_n² for N = 1..size.
  VectorXd partial_parseval() const;
};

struct LaguerreOptions {
  int nodes_per_cell = 24;
  double first_cell = 0.25;
  double growth = 1.25;
  double max_cell = 2.0;
  double tail_tol = 1e-12;
};

/// Laguerre coefficients of t ↦ c(Φᵗ(z)) by composite Gauss–Legendre over
/// geometrically graded time cells.
LaguerreDecomposition laguerre_coefficients(const PolynomialMap& f, const PolynomialMap& c, const VectorXd& z, int n,
                                            const IntegratorConfig& cfg = {}, const LaguerreOptions& opts = {});

/// e^{−t/2} L_n(t) for n = 0..count−1, orthonormal on [0, ∞).
VectorXd laguerre_functions(int count, double t);

}  // namespace klyap
