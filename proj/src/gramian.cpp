#include "klyap/gramian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "klyap/errors.hpp"
#include "klyap/linalg/lyapunov.hpp"
#include "klyap/linalg/real_schur.hpp"
#include "klyap/quadrature.hpp"

namespace klyap {

GeneratorMatrix assemble_generator(const PolynomialMap& f, const OrthonormalBasis& onb) {
  const auto& grid = onb.grid();
  const auto& table = onb.table();
  const Index d = grid.dim();
  if (f.dim_in() != d || f.dim_out() != d) throw std::invalid_argument("assemble_generator: grid/basis mismatch");
  const Index q = grid.size();
  // fᵀ∇φ_k at every grid point
  MatrixXd lie = MatrixXd::Zero(q, onb.rank());
  for (Index i = 0; i < q; ++i) {
    const VectorXd fx = f(grid.points.col(i));
    for (Index k = 0; k < d; ++k) lie.row(i) += fx[k] * table.gradients[static_cast<std::size_t>(k)].row(i);
  }
  GeneratorMatrix gen;
  gen.k = table.values.transpose() * onb.inner_weights().asDiagonal() * lie;
  gen.spectral_abscissa = gen.k.size() ? real_schur(gen.k).spectral_abscissa() : 0.0;
  return gen;
}

ObservationMatrix assemble_observation(const NuclearCost& g, const OrthonormalBasis& onb) {
  const auto& grid = onb.grid();
  if (g.rank() > 0 && g.dim() != grid.dim()) throw std::invalid_argument("assemble_observation: dimension mismatch");
  ObservationMatrix obs;
  obs.chat.resize(g.rank(), onb.rank());
  obs.span_residual.resize(g.rank());
  for (Index i = 0; i < g.rank(); ++i) {
    const auto& c = g.observables()[static_cast<std::size_t>(i)];
    VectorXd samples(grid.size());
    for (Index q = 0; q < grid.size(); ++q) samples[q] = c.scalar(grid.points.col(q));
    const VectorXd coeff = project(samples, onb);
    obs.chat.row(i) = coeff.transpose();
    const VectorXd resid = samples - onb.table().values * coeff;
    obs.span_residual[i] = std::sqrt(std::max(0.0, onb.inner(resid, resid)));
  }
  return obs;
}

GramianSolution solve_gramian(const GeneratorMatrix& gen, const ObservationMatrix& obs) {
  if (gen.k.rows() != obs.chat.cols()) throw std::invalid_argument("solve_gramian: shape mismatch");
  const MatrixXd qs = obs.chat.transpose() * obs.chat;
  GramianSolution sol;
  try {
    sol.phat = solve_lyapunov(gen.k, qs);
  } catch (const SingularSylvesterError& e) {
    throw SingularSylvesterError(std::string(e.what()) +
                                 "; a constant mode is probably retained, enable the equilibrium-vanishing basis");
  }
  sol.eigen = sym_eig(sol.phat);
  const double lmax = sol.eigen.values.size() ? std::max(0.0, sol.eigen.values[0]) : 0.0;
  for (Index i = 0; i < sol.eigen.values.size(); ++i) {
    double& l = sol.eigen.values[i];
    if (l >= 0.0) continue;
    if (-l > 1e-10 * lmax) {
      std::ostringstream os;
      os << "solve_gramian: Gramian has eigenvalue " << l << " below -1e-10 * lambda_max (" << lmax << ")";
      throw std::runtime_error(os.str());
    }
    sol.max_clamped = std::max(sol.max_clamped, -l);
    l = 0.0;
  }
  return sol;
}

double lyap_residual(const GeneratorMatrix& gen, const ObservationMatrix& obs, const MatrixXd& phat) {
  const MatrixXd qs = obs.chat.transpose() * obs.chat;
  const MatrixXd r = gen.k * phat + phat * gen.k.transpose() + qs;
  return r.norm() / std::max(qs.norm(), std::numeric_limits<double>::min());
}

double lyap_residual(const GeneratorMatrix& gen, const ObservationMatrix& obs, const GramianSolution& sol) {
  return lyap_residual(gen, obs, sol.phat);
}

// ---------------------------------------------------------------------------

SumOfSquares::SumOfSquares(std::shared_ptr<const TensorBasis> basis, MatrixXd raw_coefficients, VectorXd lambdas)
    : basis_(std::move(basis)), coeffs_(std::move(raw_coefficients)), lambdas_(std::move(lambdas)) {
  if (!basis_) throw std::invalid_argument("SumOfSquares: null basis");
  if (coeffs_.rows() != basis_->size() || coeffs_.cols() != lambdas_.size()) {
    throw std::invalid_argument("SumOfSquares: coefficient shape mismatch");
  }
}

VectorXd SumOfSquares::terms_at(const VectorXd& x) const { return coeffs_.transpose() * basis_->eval(x); }

double SumOfSquares::value(const VectorXd& x) const { return terms_at(x).squaredNorm(); }

std::pair<double, VectorXd> SumOfSquares::eval(const VectorXd& x) const {
  VectorXd b;
  MatrixXd gb;
  basis_->eval_with_gradient(x, b, gb);
  const VectorXd p = coeffs_.transpose() * b;
  return {p.squaredNorm(), 2.0 * (gb * coeffs_) * p};
}

SumOfSquares SumOfSquares::truncated(Index k) const {
  k = std::clamp<Index>(k, 0, terms());
  return SumOfSquares(basis_, coeffs_.leftCols(k), lambdas_.head(k));
}

SumOfSquares make_sum_of_squares(const GramianSolution& sol, const OrthonormalBasis& onb, double trunc_tol) {
  const auto& vals = sol.eigen.values;
  Index keep = 0;
  if (vals.size() && vals[0] > 0.0) {
    while (keep < vals.size() && vals[keep] > trunc_tol * vals[0]) ++keep;
  }
  const MatrixXd coeffs =
      onb.whitener() * sol.eigen.vectors.leftCols(keep) * vals.head(keep).cwiseSqrt().asDiagonal();
  return SumOfSquares(onb.raw_ptr(), coeffs, vals.head(keep));
}

std::pair<double, VectorXd> sos_eval(const SumOfSquares& sos, const VectorXd& x) { return sos.eval(x); }

ResidualStats pde_residual(const SumOfSquares& sos, const PolynomialMap& f, const NuclearCost& g,
                           const std::vector<VectorXd>& points) {
  ResidualStats s;
  if (points.empty()) return s;
  double sq = 0.0;
  for (const auto& z : points) {
    const auto [v, grad] = sos.eval(z);
    const double r = std::abs(grad.dot(f(z)) + g(z));
    s.max = std::max(s.max, r);
    sq += r * r;
  }
  s.rms = std::sqrt(sq / static_cast<double>(points.size()));
  return s;
}

// ---------------------------------------------------------------------------

DecayFit decay_fit(const VectorXd& eigenvalues, int n_min, int n_max) {
  if (n_min < 1) throw std::invalid_argument("decay_fit: n_min must be >= 1");
  std::vector<double> pos;
  for (Index i = 0; i < eigenvalues.size(); ++i)
    if (eigenvalues[i] > 0.0) pos.push_back(eigenvalues[i]);
  const int count = static_cast<int>(pos.size());
  if (count < n_min + 5) {
    throw std::invalid_argument("decay_fit: need at least n_min + 5 positive eigenvalues, have " + std::to_string(count));
  }
  if (n_max <= 0) n_max = std::max(count / 2, n_min + 4);
  n_max = std::min(n_max, count);
  if (n_max < n_min + 1) throw std::invalid_argument("decay_fit: empty fit range");

  // tail[N-1] = Σ_{n ≥ N} λ_n, summed from the small end
  std::vector<double> tail(static_cast<std::size_t>(count));
  double acc = 0.0;
  for (int i = count - 1; i >= 0; --i) {
    acc += pos[static_cast<std::size_t>(i)];
    tail[static_cast<std::size_t>(i)] = acc;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  const double cnt = n_max - n_min + 1;
  for (int nn = n_min; nn <= n_max; ++nn) {
    const double x = std::log(static_cast<double>(nn));
    const double y = std::log(tail[static_cast<std::size_t>(nn - 1)]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double vx = sxx - sx * sx / cnt, vy = syy - sy * sy / cnt, cxy = sxy - sx * sy / cnt;
  DecayFit fit;
  const double slope = cxy / vx;
  fit.m_hat = -slope;
  fit.fit_quality = vy > 0.0 ? (cxy * cxy) / (vx * vy) : 1.0;
  return fit;
}

// ---------------------------------------------------------------------------

VectorXd laguerre_functions(int count, double t) {
  VectorXd h(std::max(count, 0));
  if (count <= 0) return h;
  const double damp = std::exp(-0.5 * t);
  double l0 = 1.0, l1 = 1.0 - t;
  h[0] = damp * l0;
  if (count > 1) h[1] = damp * l1;
  for (int n = 1; n + 1 < count; ++n) {
    const double l2 = ((2.0 * n + 1.0 - t) * l1 - n * l0) / (n + 1.0);
    l0 = l1;
    l1 = l2;
    h[n + 1] = damp * l2;
  }
  return h;
}

VectorXd LaguerreDecomposition::partial_parseval() const {
  VectorXd s(coefficients.size());
  double acc = 0.0;
  for (Index i = 0; i < coefficients.size(); ++i) {
    acc += coefficients[i] * coefficients[i];
    s[i] = acc;
  }
  return s;
}

LaguerreDecomposition laguerre_coefficients(const PolynomialMap& f, const PolynomialMap& c, const VectorXd& z, int n,
                                            const IntegratorConfig& cfg, const LaguerreOptions& opts) {
  if (n < 1 || n > 60) throw std::invalid_argument("laguerre_coefficients: need 1 <= N <= 60");
  if (c.dim_out() != 1 || c.dim_in() != z.size()) throw std::invalid_argument("laguerre_coefficients: bad observable");
  LaguerreDecomposition out;
  out.coefficients = VectorXd::Zero(n);
  out.nodes_per_cell = opts.nodes_per_cell;

  bool zero_observable = true;
  for (const auto& t : c.components().front()) zero_observable = zero_observable && t.coeff == 0.0;
  if (zero_observable) return out;

  // Horizon from the trajectory cost oracle on g = c²; by Cauchy–Schwarz and
  // ‖e^{−t/2}L_n‖ = 1 the neglected tail of every a_n is at most √(tail of g).
  const CostIntegral oracle = cost_oracle(f, NuclearCost({c}), z, cfg, opts.tail_tol * opts.tail_tol);
  out.horizon = oracle.horizon;
  out.tail_bound = std::sqrt(oracle.tail_bound);
  if (out.tail_bound > opts.tail_tol) {
    throw IntegrationError("laguerre_coefficients: horizon insufficient, integrand tail above tolerance");
  }

  VectorXd x = z;
  double t_now = 0.0;
  double cell_start = 0.0, width = opts.first_cell;
  while (cell_start < out.horizon) {
    const double cell_end = std::min(cell_start + width, out.horizon);
    const Rule1D rule = gauss_legendre(opts.nodes_per_cell, cell_start, cell_end);
    for (Index i = 0; i < rule.size(); ++i) {
      const double t = rule.nodes[i];
      x = integrate_flow(f, x, t - t_now, cfg);
      t_now = t;
      out.coefficients += rule.weights[i] * c.scalar(x) * laguerre_functions(n, t);
    }
    ++out.cells;
    cell_start = cell_end;
    width = std::min(width * opts.growth, opts.max_cell);
  }
  return out;
}

}  // namespace klyap
