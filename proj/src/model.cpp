#include "klyap/model.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace klyap {

namespace {

double ipow(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

double monomial_value(const MultiIndex& m, const VectorXd& x) {
  double v = 1.0;
  for (std::size_t k = 0; k < m.exponents.size(); ++k) v *= ipow(x[static_cast<Index>(k)], m.exponents[k]);
  return v;
}

// ∂/∂x_var of the monomial, without the coefficient.
double monomial_partial(const MultiIndex& m, const VectorXd& x, std::size_t var) {
  const int e = m.exponents[var];
  if (e == 0) return 0.0;
  double v = static_cast<double>(e);
  for (std::size_t k = 0; k < m.exponents.size(); ++k) {
    v *= (k == var) ? ipow(x[static_cast<Index>(k)], e - 1) : ipow(x[static_cast<Index>(k)], m.exponents[k]);
  }
  return v;
}

void require_params(const std::string& name, const SystemParams& params, std::initializer_list<const char*> known) {
  for (const auto& [key, value] : params) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument("builtin_system " + name + ": unknown parameter '" + key + "'");
    if (!std::isfinite(value)) throw std::invalid_argument("builtin_system " + name + ": parameter '" + key + "' is not finite");
  }
}

double param(const SystemParams& params, const char* key, double fallback) {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

Term term(double c, std::vector<int> e) { return Term{c, MultiIndex{std::move(e)}}; }

}  // namespace

int MultiIndex::total_degree() const { return std::accumulate(exponents.begin(), exponents.end(), 0); }

// ---------------------------------------------------------------------------

PolynomialMap::PolynomialMap(Index dim_in, std::vector<std::vector<Term>> components)
    : dim_in_(dim_in), components_(std::move(components)) {
  if (dim_in_ < 1) throw std::invalid_argument("PolynomialMap: dim_in must be positive");
  for (const auto& comp : components_) {
    for (const auto& t : comp) {
      if (static_cast<Index>(t.monomial.exponents.size()) != dim_in_) {
        throw std::invalid_argument("PolynomialMap: monomial length differs from dim_in");
      }
      for (int e : t.monomial.exponents)
        if (e < 0) throw std::invalid_argument("PolynomialMap: negative exponent");
      if (!std::isfinite(t.coeff)) throw std::invalid_argument("PolynomialMap: non-finite coefficient");
    }
  }
}

PolynomialMap PolynomialMap::linear(const MatrixXd& a) {
  std::vector<std::vector<Term>> comps(static_cast<std::size_t>(a.rows()));
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) == 0.0) continue;
      std::vector<int> e(static_cast<std::size_t>(a.cols()), 0);
      e[static_cast<std::size_t>(j)] = 1;
      comps[static_cast<std::size_t>(i)].push_back(term(a(i, j), std::move(e)));
    }
  }
  return PolynomialMap(a.cols(), std::move(comps));
}

PolynomialMap PolynomialMap::coordinate(Index dim, Index k) {
  std::vector<int> e(static_cast<std::size_t>(dim), 0);
  e[static_cast<std::size_t>(k)] = 1;
  return PolynomialMap(dim, {{term(1.0, std::move(e))}});
}

PolynomialMap PolynomialMap::zero(Index dim_in, Index dim_out) {
  return PolynomialMap(dim_in, std::vector<std::vector<Term>>(static_cast<std::size_t>(dim_out)));
}

int PolynomialMap::max_degree() const {
  int d = 0;
  for (const auto& comp : components_)
    for (const auto& t : comp) d = std::max(d, t.monomial.total_degree());
  return d;
}

void PolynomialMap::check_dim(const VectorXd& x) const {
  if (x.size() != dim_in_) {
    throw std::invalid_argument("PolynomialMap: point has dimension " + std::to_string(x.size()) + ", expected " +
                                std::to_string(dim_in_));
  }
}

VectorXd PolynomialMap::operator()(const VectorXd& x) const {
  check_dim(x);
  VectorXd out = VectorXd::Zero(dim_out());
  for (std::size_t i = 0; i < components_.size(); ++i) {
    double s = 0.0;
    for (const auto& t : components_[i]) s += t.coeff * monomial_value(t.monomial, x);
    out[static_cast<Index>(i)] = s;
  }
  return out;
}

double PolynomialMap::scalar(const VectorXd& x) const {
  check_dim(x);
  if (components_.empty()) throw std::invalid_argument("PolynomialMap: no output component");
  double s = 0.0;
  for (const auto& t : components_.front()) s += t.coeff * monomial_value(t.monomial, x);
  return s;
}

MatrixXd PolynomialMap::jacobian(const VectorXd& x) const {
  check_dim(x);
  MatrixXd jac = MatrixXd::Zero(dim_out(), dim_in_);
  for (std::size_t i = 0; i < components_.size(); ++i) {
    for (const auto& t : components_[i]) {
      for (std::size_t k = 0; k < static_cast<std::size_t>(dim_in_); ++k) {
        jac(static_cast<Index>(i), static_cast<Index>(k)) += t.coeff * monomial_partial(t.monomial, x, k);
      }
    }
  }
  return jac;
}

VectorXd PolynomialMap::gradient(const VectorXd& x) const {
  if (dim_out() != 1) throw std::invalid_argument("PolynomialMap::gradient: map is not scalar");
  return jacobian(x).row(0).transpose();
}

PolynomialMap PolynomialMap::derivative(Index var) const {
  if (var < 0 || var >= dim_in_) throw std::invalid_argument("PolynomialMap::derivative: variable out of range");
  std::vector<std::vector<Term>> comps(components_.size());
  for (std::size_t i = 0; i < components_.size(); ++i) {
    for (const auto& t : components_[i]) {
      const int e = t.monomial.exponents[static_cast<std::size_t>(var)];
      if (e == 0) continue;
      Term d = t;
      d.coeff *= e;
      d.monomial.exponents[static_cast<std::size_t>(var)] = e - 1;
      comps[i].push_back(std::move(d));
    }
  }
  return PolynomialMap(dim_in_, std::move(comps));
}

PolynomialMap PolynomialMap::component(Index i) const {
  if (i < 0 || i >= dim_out()) throw std::invalid_argument("PolynomialMap::component: index out of range");
  return PolynomialMap(dim_in_, {components_[static_cast<std::size_t>(i)]});
}

PolynomialMap operator+(const PolynomialMap& a, const PolynomialMap& b) {
  if (a.dim_in() != b.dim_in() || a.dim_out() != b.dim_out()) {
    throw std::invalid_argument("PolynomialMap: cannot add maps of different shape");
  }
  auto comps = a.components_;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    comps[i].insert(comps[i].end(), b.components_[i].begin(), b.components_[i].end());
  }
  return PolynomialMap(a.dim_in(), std::move(comps));
}

PolynomialMap operator*(double s, const PolynomialMap& p) {
  auto comps = p.components_;
  for (auto& comp : comps)
    for (auto& t : comp) t.coeff *= s;
  return PolynomialMap(p.dim_in(), std::move(comps));
}

VectorXd poly_eval(const PolynomialMap& p, const VectorXd& x) { return p(x); }
MatrixXd poly_jacobian(const PolynomialMap& p, const VectorXd& x) { return p.jacobian(x); }

// ---------------------------------------------------------------------------

PolynomialMatrix::PolynomialMatrix(Index rows, Index cols, PolynomialMap entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (entries_.dim_out() != rows * cols) throw std::invalid_argument("PolynomialMatrix: entry count mismatch");
}

PolynomialMatrix PolynomialMatrix::constant(const MatrixXd& m) {
  // Constant entries still need an input dimension; use the column count.
  const Index dim = m.cols();
  std::vector<std::vector<Term>> comps;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      std::vector<Term> c;
      if (m(i, j) != 0.0) c.push_back(term(m(i, j), std::vector<int>(static_cast<std::size_t>(dim), 0)));
      comps.push_back(std::move(c));
    }
  }
  return PolynomialMatrix(m.rows(), m.cols(), PolynomialMap(dim, std::move(comps)));
}

MatrixXd PolynomialMatrix::operator()(const VectorXd& x) const {
  const VectorXd flat = entries_(x);
  MatrixXd m(rows_, cols_);
  for (Index i = 0; i < rows_; ++i)
    for (Index j = 0; j < cols_; ++j) m(i, j) = flat[i * cols_ + j];
  return m;
}

// ---------------------------------------------------------------------------

NuclearCost::NuclearCost(std::vector<PolynomialMap> observables) : observables_(std::move(observables)) {
  for (const auto& c : observables_) {
    if (c.dim_out() != 1) throw std::invalid_argument("NuclearCost: observables must be scalar polynomials");
    if (c.dim_in() != observables_.front().dim_in()) {
      throw std::invalid_argument("NuclearCost: observables have different input dimensions");
    }
  }
}

NuclearCost NuclearCost::coordinates(Index dim) {
  std::vector<PolynomialMap> obs;
  for (Index k = 0; k < dim; ++k) obs.push_back(PolynomialMap::coordinate(dim, k));
  return NuclearCost(std::move(obs));
}

VectorXd NuclearCost::observe(const VectorXd& x) const {
  VectorXd c(rank());
  for (Index i = 0; i < rank(); ++i) c[i] = observables_[static_cast<std::size_t>(i)].scalar(x);
  return c;
}

double NuclearCost::operator()(const VectorXd& x) const { return observe(x).squaredNorm(); }

VectorXd NuclearCost::gradient(const VectorXd& x) const {
  VectorXd g = VectorXd::Zero(x.size());
  for (const auto& c : observables_) g += 2.0 * c.scalar(x) * c.gradient(x);
  return g;
}

// ---------------------------------------------------------------------------

WeightFunction WeightFunction::constant(double c, Index dim) {
  if (!(c > 0.0)) throw std::invalid_argument("WeightFunction::constant: value must be positive");
  WeightFunction w;
  w.kind_ = Kind::constant;
  w.constant_ = c;
  w.dim_ = dim;
  return w;
}

WeightFunction WeightFunction::inverse_norm(VectorXd center) {
  WeightFunction w;
  w.kind_ = Kind::inverse_norm;
  w.dim_ = center.size();
  w.singular_.push_back(center);
  w.center_ = std::move(center);
  return w;
}

WeightFunction WeightFunction::hamiltonian(PolynomialMap h, std::vector<VectorXd> singular_points) {
  if (h.dim_out() != 1) throw std::invalid_argument("WeightFunction::hamiltonian: H must be scalar");
  WeightFunction w;
  w.kind_ = Kind::hamiltonian;
  w.dim_ = h.dim_in();
  w.hamiltonian_ = std::move(h);
  w.singular_ = std::move(singular_points);
  return w;
}

bool WeightFunction::near_singular(const VectorXd& x, double tol) const {
  for (const auto& s : singular_)
    if ((x - s).cwiseAbs().maxCoeff() <= tol) return true;
  return false;
}

WeightFunction::Value WeightFunction::eval(const VectorXd& x) const {
  if (x.size() != dim_) throw std::invalid_argument("WeightFunction: dimension mismatch");
  switch (kind_) {
    case Kind::constant:
      return {constant_, VectorXd::Zero(dim_)};
    case Kind::inverse_norm: {
      const VectorXd r = x - center_;
      const double n = r.norm();
      if (n == 0.0) throw std::domain_error("WeightFunction: evaluation at the singular point of 1/|x - x_eq|");
      return {1.0 / n, -r / (n * n * n)};
    }
    case Kind::hamiltonian: {
      const double h = hamiltonian_.scalar(x);
      if (!(h > 0.0)) throw std::domain_error("WeightFunction: H(x) <= 0, H^{-1/2} undefined");
      const double w = 1.0 / std::sqrt(h);
      return {w, -0.5 * w / h * hamiltonian_.gradient(x)};
    }
  }
  throw std::logic_error("WeightFunction: unknown kind");
}

double WeightFunction::value(const VectorXd& x) const { return eval(x).value; }

WeightFunction::Value weight_eval(const WeightFunction& w, const VectorXd& x) { return w.eval(x); }

// ---------------------------------------------------------------------------

BoxDomain::BoxDomain(VectorXd lower, VectorXd upper, std::optional<VectorXd> equilibrium)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() == 0 || lower_.size() != upper_.size()) {
    throw std::invalid_argument("BoxDomain: lower and upper must be non-empty and of equal length");
  }
  if (!(lower_.array() < upper_.array()).all()) throw std::invalid_argument("BoxDomain: need lower < upper");
  equilibrium_ = equilibrium ? *equilibrium : VectorXd::Zero(lower_.size());
  if (equilibrium_.size() != lower_.size()) throw std::invalid_argument("BoxDomain: equilibrium dimension mismatch");
  if (!((equilibrium_.array() > lower_.array()).all() && (equilibrium_.array() < upper_.array()).all())) {
    throw std::invalid_argument("BoxDomain: equilibrium must lie strictly inside the box");
  }
}

BoxDomain BoxDomain::cube(Index dim, double half_width) {
  return BoxDomain(VectorXd::Constant(dim, -half_width), VectorXd::Constant(dim, half_width));
}

double BoxDomain::volume() const { return (upper_ - lower_).prod(); }

bool BoxDomain::contains(const VectorXd& x, double tol) const {
  return ((x.array() >= lower_.array() - tol).all() && (x.array() <= upper_.array() + tol).all());
}

double BoxDomain::overshoot(const VectorXd& x) const {
  double o = 0.0;
  for (Index k = 0; k < x.size(); ++k) o = std::max({o, lower_[k] - x[k], x[k] - upper_[k]});
  return o;
}

// ---------------------------------------------------------------------------

std::vector<std::string> builtin_system_names() { return {"linear2d", "vdp_modified", "port_hamiltonian_demo"}; }

Problem builtin_system(const std::string& name, const SystemParams& params) {
  Problem p;
  p.name = name;
  if (name == "linear2d") {
    require_params(name, params, {"a11", "a12", "a21", "a22"});
    MatrixXd a(2, 2);
    a << param(params, "a11", -2.0), param(params, "a12", 1.0), param(params, "a21", -1.0), param(params, "a22", -3.0);
    p.dynamics = PolynomialMap::linear(a);
    p.cost = NuclearCost::coordinates(2);
    p.domain = BoxDomain::cube(2, 1.0);
    p.weight = WeightFunction::inverse_norm(p.domain.equilibrium());
    return p;
  }
  if (name == "vdp_modified") {
    require_params(name, params, {"mu", "eta", "alpha"});
    const double mu = param(params, "mu", 2.0);
    const double eta = param(params, "eta", 2.2);
    const double alpha = param(params, "alpha", 0.15);
    if (!(alpha > 0.0)) throw std::invalid_argument("builtin_system vdp_modified: alpha must be positive");
    // Linearization [[0,1],[-1,mu-eta]] is Hurwitz iff mu - eta < 0.
    if (!(mu - eta < 0.0)) {
      throw std::invalid_argument("builtin_system vdp_modified: linearization not Hurwitz (need eta > mu)");
    }
    // f1 = x2 − α x1³,  f2 = −μ x1² x2 + μ x2 − x1 − η x2
    p.dynamics = PolynomialMap(2, {{term(1.0, {0, 1}), term(-alpha, {3, 0})},
                                   {term(-mu, {2, 1}), term(mu - eta, {0, 1}), term(-1.0, {1, 0})}});
    p.cost = NuclearCost::coordinates(2);
    p.domain = BoxDomain::cube(2, 3.0);
    p.weight = WeightFunction::inverse_norm(p.domain.equilibrium());
    return p;
  }
  if (name == "port_hamiltonian_demo") {
    require_params(name, params, {"damping"});
    const double r = param(params, "damping", 1.0);
    if (!(r >= 0.0)) throw std::invalid_argument("builtin_system port_hamiltonian_demo: damping must be >= 0");
    MatrixXd j(2, 2), rm(2, 2);
    j << 0.0, 1.0, -1.0, 0.0;
    rm = r * MatrixXd::Identity(2, 2);
    PolynomialMap h(2, {{term(0.5, {2, 0}), term(0.5, {0, 2})}});
    // ∇H = x, so f = (J − R) x.
    p.dynamics = PolynomialMap::linear(j - rm);
    p.cost = NuclearCost::coordinates(2);
    p.domain = BoxDomain::cube(2, 1.0);
    p.weight = WeightFunction::hamiltonian(h, {p.domain.equilibrium()});
    p.port_hamiltonian = PortHamiltonian{h, PolynomialMatrix::constant(j), PolynomialMatrix::constant(rm)};
    return p;
  }
  throw std::invalid_argument("builtin_system: unknown system '" + name + "'");
}

}  // namespace klyap
