#include "klyap/basis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "klyap/linalg/sym_eig.hpp"

namespace klyap {

std::pair<double, double> legendre_eval(int k, double x) {
  if (k < 0) throw std::invalid_argument("legendre_eval: negative degree");
  if (std::abs(x) > 1.0 + 1e-12) throw std::invalid_argument("legendre_eval: x outside [-1, 1]");
  double p0 = 1.0, d0 = 0.0;
  if (k == 0) return {p0, d0};
  double p1 = x, d1 = 1.0;
  for (int j = 1; j < k; ++j) {
    const double p2 = ((2.0 * j + 1.0) * x * p1 - j * p0) / (j + 1.0);
    const double d2 = d0 + (2.0 * j + 1.0) * p1;
    p0 = p1;
    p1 = p2;
    d0 = d1;
    d1 = d2;
  }
  return {p1, d1};
}

// ---------------------------------------------------------------------------

Basis1D Basis1D::legendre(int max_degree, double a, double b, bool normalized) {
  if (max_degree < 0) throw std::invalid_argument("Basis1D::legendre: negative degree");
  if (!(a < b)) throw std::invalid_argument("Basis1D::legendre: need a < b");
  Basis1D basis;
  basis.kind_ = Kind::legendre;
  basis.degree_ = max_degree;
  basis.a_ = a;
  basis.b_ = b;
  basis.normalized_ = normalized;
  return basis;
}

Basis1D Basis1D::bspline(std::vector<double> knots, int degree) {
  if (degree < 0) throw std::invalid_argument("Basis1D::bspline: negative degree");
  if (knots.size() < static_cast<std::size_t>(degree) + 2) {
    throw std::invalid_argument("Basis1D::bspline: need at least degree + 2 knots");
  }
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (knots[i] < knots[i - 1]) throw std::invalid_argument("Basis1D::bspline: knots must be non-decreasing");
  }
  Basis1D basis;
  basis.kind_ = Kind::bspline;
  basis.degree_ = degree;
  basis.a_ = knots[static_cast<std::size_t>(degree)];
  basis.b_ = knots[knots.size() - 1 - static_cast<std::size_t>(degree)];
  if (!(basis.a_ < basis.b_)) throw std::invalid_argument("Basis1D::bspline: empty parameter interval");
  basis.knots_ = std::move(knots);
  return basis;
}

Basis1D Basis1D::clamped_bspline(double a, double b, int breakpoints, int degree) {
  if (breakpoints < 2) throw std::invalid_argument("Basis1D::clamped_bspline: need at least two breakpoints");
  if (!(a < b)) throw std::invalid_argument("Basis1D::clamped_bspline: need a < b");
  std::vector<double> knots(static_cast<std::size_t>(degree), a);
  for (int i = 0; i < breakpoints; ++i) {
    knots.push_back(i == breakpoints - 1 ? b : a + (b - a) * i / (breakpoints - 1));
  }
  knots.insert(knots.end(), static_cast<std::size_t>(degree), b);
  return bspline(std::move(knots), degree);
}

Index Basis1D::count() const {
  if (kind_ == Kind::legendre) return degree_ + 1;
  return static_cast<Index>(knots_.size()) - degree_ - 1;
}

std::vector<double> Basis1D::breakpoints() const {
  if (kind_ == Kind::legendre) return {a_, b_};
  std::vector<double> bp;
  for (double t : knots_) {
    if (t < a_ || t > b_) continue;
    if (bp.empty() || t > bp.back()) bp.push_back(t);
  }
  return bp;
}

void Basis1D::eval_all(double x, Eigen::Ref<VectorXd> values, Eigen::Ref<VectorXd> derivs) const {
  const Index m = count();
  if (kind_ == Kind::legendre) {
    const double scale = 2.0 / (b_ - a_);
    const double t = std::clamp((2.0 * x - a_ - b_) / (b_ - a_), -1.0, 1.0);
    double p0 = 1.0, d0 = 0.0, p1 = t, d1 = 1.0;
    for (Index k = 0; k < m; ++k) {
      double p, d;
      if (k == 0) {
        p = p0;
        d = d0;
      } else if (k == 1) {
        p = p1;
        d = d1;
      } else {
        const double j = static_cast<double>(k - 1);
        p = ((2.0 * j + 1.0) * t * p1 - j * p0) / (j + 1.0);
        d = d0 + (2.0 * j + 1.0) * p1;
        p0 = p1;
        p1 = p;
        d0 = d1;
        d1 = d;
      }
      const double norm = normalized_ ? std::sqrt((2.0 * static_cast<double>(k) + 1.0) / (b_ - a_)) : 1.0;
      values[k] = norm * p;
      derivs[k] = norm * d * scale;
    }
    return;
  }

  // Cox–de Boor over all functions at once.
  const auto& t = knots_;
  const int p = degree_;
  const Index nk = static_cast<Index>(t.size());
  const double xc = std::clamp(x, a_, b_);
  // span s with t[s] <= xc < t[s+1]; at the right end use the last non-empty span
  Index span = -1;
  for (Index i = p; i < nk - p - 1; ++i) {
    if (t[static_cast<std::size_t>(i)] <= xc && xc < t[static_cast<std::size_t>(i) + 1]) {
      span = i;
      break;
    }
  }
  if (span < 0) {
    for (Index i = nk - p - 2; i >= p; --i) {
      if (t[static_cast<std::size_t>(i)] < t[static_cast<std::size_t>(i) + 1]) {
        span = i;
        break;
      }
    }
  }
  VectorXd n = VectorXd::Zero(nk - 1);
  n[span] = 1.0;
  VectorXd prev;
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  for (int r = 1; r <= p; ++r) {
    prev = n;
    const Index len = nk - 1 - r;
    VectorXd next = VectorXd::Zero(len);
    for (Index i = 0; i < len; ++i) {
      const double ti = t[static_cast<std::size_t>(i)];
      const double tir = t[static_cast<std::size_t>(i + r)];
      const double ti1 = t[static_cast<std::size_t>(i + 1)];
      const double tir1 = t[static_cast<std::size_t>(i + r + 1)];
      next[i] = ratio(xc - ti, tir - ti) * prev[i] + ratio(tir1 - xc, tir1 - ti1) * prev[i + 1];
    }
    n = std::move(next);
  }
  for (Index i = 0; i < m; ++i) values[i] = n[i];
  if (p == 0) {
    derivs.setZero();
    return;
  }
  for (Index i = 0; i < m; ++i) {
    const double ti = t[static_cast<std::size_t>(i)];
    const double tip = t[static_cast<std::size_t>(i + p)];
    const double ti1 = t[static_cast<std::size_t>(i + 1)];
    const double tip1 = t[static_cast<std::size_t>(i + p + 1)];
    derivs[i] = ratio(p, tip - ti) * prev[i] - ratio(p, tip1 - ti1) * prev[i + 1];
  }
}

std::pair<double, double> Basis1D::eval(Index i, double x) const {
  if (i < 0 || i >= count()) throw std::out_of_range("Basis1D::eval: index " + std::to_string(i) + " out of range");
  VectorXd v(count()), d(count());
  eval_all(x, v, d);
  return {v[i], d[i]};
}

std::pair<double, double> bspline_eval(const Basis1D& basis, Index i, double x) {
  if (basis.kind() != Basis1D::Kind::bspline) throw std::invalid_argument("bspline_eval: not a B-spline basis");
  return basis.eval(i, x);
}

// ---------------------------------------------------------------------------

TensorBasis::TensorBasis(std::vector<Basis1D> factors, std::optional<int> max_index_sum)
    : factors_(std::move(factors)) {
  if (factors_.empty()) throw std::invalid_argument("TensorBasis: need at least one factor");
  const Index d = dim();
  std::vector<Index> idx(static_cast<std::size_t>(d), 0);
  while (true) {
    Index sum = 0;
    for (Index v : idx) sum += v;
    if (!max_index_sum || sum <= *max_index_sum) indices_.push_back(idx);
    Index k = d - 1;
    for (; k >= 0; --k) {
      if (++idx[static_cast<std::size_t>(k)] < factors_[static_cast<std::size_t>(k)].count()) break;
      idx[static_cast<std::size_t>(k)] = 0;
    }
    if (k < 0) break;
  }
  offsets_ = VectorXd::Zero(size());
}

VectorXd TensorBasis::eval(const VectorXd& x) const {
  VectorXd values;
  MatrixXd grads;
  eval_with_gradient(x, values, grads);
  return values;
}

void TensorBasis::eval_with_gradient(const VectorXd& x, VectorXd& values, MatrixXd& gradients) const {
  const Index d = dim();
  if (x.size() != d) throw std::invalid_argument("TensorBasis: dimension mismatch");
  std::vector<VectorXd> v1(static_cast<std::size_t>(d)), d1(static_cast<std::size_t>(d));
  for (Index k = 0; k < d; ++k) {
    const auto& f = factors_[static_cast<std::size_t>(k)];
    v1[static_cast<std::size_t>(k)].resize(f.count());
    d1[static_cast<std::size_t>(k)].resize(f.count());
    f.eval_all(x[k], v1[static_cast<std::size_t>(k)], d1[static_cast<std::size_t>(k)]);
  }
  const Index m = size();
  values.resize(m);
  gradients.resize(d, m);
  for (Index j = 0; j < m; ++j) {
    const auto& idx = indices_[static_cast<std::size_t>(j)];
    double prod = 1.0;
    for (Index k = 0; k < d; ++k) prod *= v1[static_cast<std::size_t>(k)][idx[static_cast<std::size_t>(k)]];
    values[j] = prod - offsets_[j];
    for (Index g = 0; g < d; ++g) {
      double pg = 1.0;
      for (Index k = 0; k < d; ++k) {
        const auto& src = (k == g) ? d1[static_cast<std::size_t>(k)] : v1[static_cast<std::size_t>(k)];
        pg *= src[idx[static_cast<std::size_t>(k)]];
      }
      gradients(g, j) = pg;
    }
  }
}

TensorBasis shift_to_equilibrium(const TensorBasis& basis, const VectorXd& x_eq) {
  if (basis.equilibrium_vanishing_) return basis;
  if (x_eq.size() != basis.dim()) throw std::invalid_argument("shift_to_equilibrium: dimension mismatch");
  const VectorXd at_eq = basis.eval(x_eq);

  // Candidates for the dropped constant: Legendre factors at index 0.
  Index drop = -1;
  for (Index j = 0; j < basis.size(); ++j) {
    const auto& idx = basis.indices_[static_cast<std::size_t>(j)];
    bool candidate = true;
    for (Index k = 0; k < basis.dim(); ++k) {
      if (basis.factors_[static_cast<std::size_t>(k)].kind() == Basis1D::Kind::legendre && idx[static_cast<std::size_t>(k)] != 0) {
        candidate = false;
      }
    }
    if (candidate && (drop < 0 || std::abs(at_eq[j]) > std::abs(at_eq[drop]))) drop = j;
  }
  if (drop < 0 || at_eq[drop] == 0.0) {
    throw std::invalid_argument("shift_to_equilibrium: basis has no constant function in its span");
  }

  TensorBasis out;
  out.factors_ = basis.factors_;
  out.equilibrium_vanishing_ = true;
  std::vector<double> offs;
  for (Index j = 0; j < basis.size(); ++j) {
    if (j == drop) continue;
    out.indices_.push_back(basis.indices_[static_cast<std::size_t>(j)]);
    offs.push_back(at_eq[j] + basis.offsets_[j]);
  }
  out.offsets_ = Eigen::Map<VectorXd>(offs.data(), static_cast<Index>(offs.size()));
  return out;
}

// ---------------------------------------------------------------------------

EvalTable tabulate(const TensorBasis& basis, const MatrixXd& points) {
  const Index q = points.cols(), m = basis.size(), d = basis.dim();
  EvalTable t;
  t.values.resize(q, m);
  t.gradients.assign(static_cast<std::size_t>(d), MatrixXd(q, m));
  VectorXd v;
  MatrixXd g;
  for (Index i = 0; i < q; ++i) {
    basis.eval_with_gradient(points.col(i), v, g);
    t.values.row(i) = v.transpose();
    for (Index k = 0; k < d; ++k) t.gradients[static_cast<std::size_t>(k)].row(i) = g.row(k);
  }
  return t;
}

MatrixXd gram_matrix(const MatrixXd& values, const VectorXd& inner_weights) {
  MatrixXd g = values.transpose() * inner_weights.asDiagonal() * values;
  return 0.5 * (g + g.transpose());
}

MatrixXd gram_matrix(const TensorBasis& basis, const TensorGrid& grid) {
  return gram_matrix(tabulate(basis, grid.points).values, grid.inner_weights());
}

Whitening orthonormalize(const MatrixXd& gram, double drop_tol) {
  const auto eig = sym_eig(gram);
  Whitening out;
  out.gram_eigenvalues = eig.values;
  if (eig.values.size() == 0 || !(eig.values[0] > 0.0)) {
    throw std::invalid_argument("orthonormalize: Gram matrix has no positive eigenvalue");
  }
  const double cut = drop_tol * eig.values[0];
  Index rank = 0;
  while (rank < eig.values.size() && eig.values[rank] > cut) ++rank;
  out.rank = rank;
  out.w = eig.vectors.leftCols(rank) * eig.values.head(rank).cwiseSqrt().cwiseInverse().asDiagonal();
  return out;
}

// ---------------------------------------------------------------------------

OrthonormalBasis::OrthonormalBasis(TensorBasis raw, TensorGrid grid, double drop_tol)
    : raw_(std::make_shared<const TensorBasis>(std::move(raw))), grid_(std::move(grid)) {
  if (raw_->dim() != grid_.dim()) throw std::invalid_argument("OrthonormalBasis: basis/grid dimension mismatch");
  inner_weights_ = grid_.inner_weights();
  EvalTable raw_table = tabulate(*raw_, grid_.points);
  whitening_ = orthonormalize(gram_matrix(raw_table.values, inner_weights_), drop_tol);
  table_.values = raw_table.values * whitening_.w;
  for (const auto& g : raw_table.gradients) table_.gradients.push_back(g * whitening_.w);
}

VectorXd OrthonormalBasis::eval(const VectorXd& x) const { return whitening_.w.transpose() * raw_->eval(x); }

void OrthonormalBasis::eval_with_gradient(const VectorXd& x, VectorXd& values, MatrixXd& gradients) const {
  VectorXd v;
  MatrixXd g;
  raw_->eval_with_gradient(x, v, g);
  values = whitening_.w.transpose() * v;
  gradients = g * whitening_.w;
}

double OrthonormalBasis::inner(const VectorXd& a, const VectorXd& b) const {
  return (a.array() * b.array() * inner_weights_.array()).sum();
}

double OrthonormalBasis::orthonormality_defect() const {
  const MatrixXd g = gram_matrix(table_.values, inner_weights_);
  return (g - MatrixXd::Identity(rank(), rank())).cwiseAbs().maxCoeff();
}

OrthonormalBasis OrthonormalBasis::rotated(const MatrixXd& orthogonal) const {
  if (orthogonal.rows() != rank() || orthogonal.cols() != rank()) {
    throw std::invalid_argument("OrthonormalBasis::rotated: rotation must be rank × rank");
  }
  OrthonormalBasis out = *this;
  out.whitening_.w = whitening_.w * orthogonal;
  out.table_.values = table_.values * orthogonal;
  for (auto& g : out.table_.gradients) g = g * orthogonal;
  return out;
}

VectorXd project(const VectorXd& samples, const OrthonormalBasis& onb) {
  if (samples.size() != onb.grid().size()) throw std::invalid_argument("project: sample count differs from grid size");
  return onb.table().values.transpose() * samples.cwiseProduct(onb.inner_weights());
}

}  // namespace klyap
