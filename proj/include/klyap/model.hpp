#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace klyap {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Exponents of a monomial x₁^e₁ ⋯ x_d^e_d.
struct MultiIndex {
  std::vector<int> exponents;

  int total_degree() const;
  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
};

struct Term {
  double coeff = 0.0;
  MultiIndex monomial;
};

/// Polynomial map ℝ^d → ℝ^m given by explicit monomial lists, one per output
/// component. Evaluation multiplies per-term power products; derivatives are
/// formal term-by-term.
class PolynomialMap {
 public:
  PolynomialMap() = default;
  PolynomialMap(Index dim_in, std::vector<std::vector<Term>> components);

  /// f(x) = A x.
  static PolynomialMap linear(const MatrixXd& a);
  /// The scalar polynomial x ↦ x_k on ℝ^dim.
  static PolynomialMap coordinate(Index dim, Index k);
  /// The zero map ℝ^dim_in → ℝ^dim_out.
  static PolynomialMap zero(Index dim_in, Index dim_out);

  Index dim_in() const { return dim_in_; }
  Index dim_out() const { return static_cast<Index>(components_.size()); }
  const std::vector<std::vector<Term>>& components() const { return components_; }
  int max_degree() const;

  VectorXd operator()(const VectorXd& x) const;
  /// First component only; shortcut for scalar observables.
  double scalar(const VectorXd& x) const;
  MatrixXd jacobian(const VectorXd& x) const;
  /// ∇ of the single output of a scalar polynomial.
  VectorXd gradient(const VectorXd& x) const;

  /// Formal partial derivative with respect to x_var, for every component.
  PolynomialMap derivative(Index var) const;
  /// Output component i as a scalar polynomial.
  PolynomialMap component(Index i) const;

  friend PolynomialMap operator+(const PolynomialMap& a, const PolynomialMap& b);
  friend PolynomialMap operator*(double s, const PolynomialMap& p);

 private:
  void check_dim(const VectorXd& x) const;

  Index dim_in_ = 0;
  std::vector<std::vector<Term>> components_;
};

VectorXd poly_eval(const PolynomialMap& p, const VectorXd& x);
MatrixXd poly_jacobian(const PolynomialMap& p, const VectorXd& x);

/// Square matrix of scalar polynomials, stored row-major in one map.
class PolynomialMatrix {
 public:
  PolynomialMatrix() = default;
  PolynomialMatrix(Index rows, Index cols, PolynomialMap entries);
  static PolynomialMatrix constant(const MatrixXd& m);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  MatrixXd operator()(const VectorXd& x) const;

 private:
  Index rows_ = 0, cols_ = 0;
  PolynomialMap entries_;
};

/// g(x) = Σᵢ cᵢ(x)² for scalar polynomial observables cᵢ.
class NuclearCost {
 public:
  NuclearCost() = default;
  explicit NuclearCost(std::vector<PolynomialMap> observables);
  /// cᵢ(x) = x_i for i = 1..dim.
  static NuclearCost coordinates(Index dim);

  Index rank() const { return static_cast<Index>(observables_.size()); }
  Index dim() const { return observables_.empty() ? 0 : observables_.front().dim_in(); }
  const std::vector<PolynomialMap>& observables() const { return observables_; }

  VectorXd observe(const VectorXd& x) const;
  double operator()(const VectorXd& x) const;
  VectorXd gradient(const VectorXd& x) const;

 private:
  std::vector<PolynomialMap> observables_;
};

/// The weight w: Ω → ℝ₊ defining H = L²_{w²}(Ω).
class WeightFunction {
 public:
  enum class Kind { constant, inverse_norm, hamiltonian };

  struct Value {
    double value;
    VectorXd gradient;
  };

  static WeightFunction constant(double c, Index dim);
  /// w(x) = 1/‖x − center‖.
  static WeightFunction inverse_norm(VectorXd center);
  /// w(x) = H(x)^{-1/2}; H must vanish exactly at the listed singular points.
  static WeightFunction hamiltonian(PolynomialMap h, std::vector<VectorXd> singular_points);

  Kind kind() const { return kind_; }
  Index dim() const { return dim_; }
  const std::vector<VectorXd>& singular_points() const { return singular_; }
  const PolynomialMap& hamiltonian_polynomial() const { return hamiltonian_; }

  /// True when x lies within `tol` (max-norm) of a singular point.
  bool near_singular(const VectorXd& x, double tol = 1e-13) const;

  /// (w(x), ∇w(x)); throws std::domain_error at a singular point.
  Value eval(const VectorXd& x) const;
  double value(const VectorXd& x) const;

 private:
  Kind kind_ = Kind::constant;
  Index dim_ = 0;
  double constant_ = 1.0;
  VectorXd center_;
  PolynomialMap hamiltonian_;
  std::vector<VectorXd> singular_;
};

WeightFunction::Value weight_eval(const WeightFunction& w, const VectorXd& x);

/// Axis-aligned box Ω = [lower, upper] with the equilibrium strictly inside.
class BoxDomain {
 public:
  BoxDomain() = default;
  BoxDomain(VectorXd lower, VectorXd upper, std::optional<VectorXd> equilibrium = std::nullopt);
  static BoxDomain cube(Index dim, double half_width);

  Index dim() const { return lower_.size(); }
  const VectorXd& lower() const { return lower_; }
  const VectorXd& upper() const { return upper_; }
  const VectorXd& equilibrium() const { return equilibrium_; }
  double volume() const;
  bool contains(const VectorXd& x, double tol = 0.0) const;
  /// Largest distance by which x lies outside the box (0 if inside).
  double overshoot(const VectorXd& x) const;

 private:
  VectorXd lower_, upper_, equilibrium_;
};

/// Port-Hamiltonian structure f = (J − R)∇H.
struct PortHamiltonian {
  PolynomialMap h;
  PolynomialMatrix j;
  PolynomialMatrix r;
};

struct Problem {
  std::string name;
  PolynomialMap dynamics;
  NuclearCost cost;
  WeightFunction weight;
  BoxDomain domain;
  std::optional<PortHamiltonian> port_hamiltonian;
};

/// Named scalar parameters of a built-in system; unknown keys are rejected.
using SystemParams = std::map<std::string, double>;

/// linear2d (a11,a12,a21,a22), vdp_modified (mu,eta,alpha),
/// port_hamiltonian_demo (damping). Defaults reproduce the published setups.
Problem builtin_system(const std::string& name, const SystemParams& params = {});

std::vector<std::string> builtin_system_names();

}  // namespace klyap
