#include "klyap/quadrature.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

#include "klyap/errors.hpp"

namespace klyap {

Rule1D gauss_legendre(int n, double a, double b) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  if (!(a < b)) throw std::invalid_argument("gauss_legendre: need a < b");
  VectorXd x(n), w(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // i-th largest root, Chebyshev-like initial guess
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) <= 4.0 * std::numeric_limits<double>::epsilon()) {
        converged = true;
        // one more derivative evaluation at the final root
        p0 = 1.0;
        p1 = z;
        for (int k = 2; k <= n; ++k) {
          const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = pk;
        }
        if (n == 1) p0 = 1.0;
        dp = n * (z * p1 - p0) / (z * z - 1.0);
        break;
      }
    }
    if (!converged) throw ConvergenceError("gauss_legendre: Newton iteration did not converge");
    const double wi = 2.0 / ((1.0 - z * z) * dp * dp);
    x[n - 1 - i] = z;
    x[i] = -z;
    w[n - 1 - i] = wi;
    w[i] = wi;
  }
  if (n % 2 == 1) x[n / 2] = 0.0;

  Rule1D r;
  r.a = a;
  r.b = b;
  const double mid = 0.5 * (a + b), half_len = 0.5 * (b - a);
  r.nodes = (mid + half_len * x.array()).matrix();
  r.weights = half_len * w;
  return r;
}

Rule1D composite_rule(const std::vector<double>& breakpoints, int n_per_cell) {
  if (breakpoints.size() < 2) throw std::invalid_argument("composite_rule: need at least two breakpoints");
  if (n_per_cell < 1) throw std::invalid_argument("composite_rule: n_per_cell must be >= 1");
  for (std::size_t i = 1; i < breakpoints.size(); ++i) {
    if (!(breakpoints[i] > breakpoints[i - 1])) throw std::invalid_argument("composite_rule: breakpoints must increase");
  }
  const Index cells = static_cast<Index>(breakpoints.size()) - 1;
  Rule1D r;
  r.a = breakpoints.front();
  r.b = breakpoints.back();
  r.nodes.resize(cells * n_per_cell);
  r.weights.resize(cells * n_per_cell);
  for (Index c = 0; c < cells; ++c) {
    const Rule1D cell = gauss_legendre(n_per_cell, breakpoints[static_cast<std::size_t>(c)],
                                       breakpoints[static_cast<std::size_t>(c) + 1]);
    r.nodes.segment(c * n_per_cell, n_per_cell) = cell.nodes;
    r.weights.segment(c * n_per_cell, n_per_cell) = cell.weights;
  }
  return r;
}

TensorGrid tensor_grid(const std::vector<Rule1D>& rules, const WeightFunction& w, MeasureNormalization normalization) {
  if (rules.empty()) throw std::invalid_argument("tensor_grid: need at least one rule");
  if (w.dim() != static_cast<Index>(rules.size())) throw std::invalid_argument("tensor_grid: weight dimension mismatch");
  const Index d = static_cast<Index>(rules.size());
  Index total = 1;
  double volume = 1.0;
  TensorGrid g;
  for (const auto& r : rules) {
    if (r.size() == 0) throw std::invalid_argument("tensor_grid: empty rule");
    total *= r.size();
    volume *= r.b - r.a;
    g.shape.push_back(r.size());
  }
  g.points.resize(d, total);
  g.vol_weights.resize(total);
  g.w2_factors.resize(total);
  g.measure_scale = normalization == MeasureNormalization::probability ? 1.0 / volume : 1.0;

  std::vector<Index> idx(static_cast<std::size_t>(d), 0);
  for (Index q = 0; q < total; ++q) {
    double omega = 1.0;
    for (Index k = 0; k < d; ++k) {
      const auto& r = rules[static_cast<std::size_t>(k)];
      g.points(k, q) = r.nodes[idx[static_cast<std::size_t>(k)]];
      omega *= r.weights[idx[static_cast<std::size_t>(k)]];
    }
    g.vol_weights[q] = omega;
    const VectorXd x = g.points.col(q);
    if (w.near_singular(x, 1e-14 * (1.0 + x.cwiseAbs().maxCoeff()))) {
      throw std::domain_error("tensor_grid: quadrature node coincides with a singular point of the weight "
                              "(choose even node counts or shift the cells)");
    }
    const double wv = w.value(x);
    g.w2_factors[q] = wv * wv;
    for (Index k = d - 1; k >= 0; --k) {
      if (++idx[static_cast<std::size_t>(k)] < rules[static_cast<std::size_t>(k)].size()) break;
      idx[static_cast<std::size_t>(k)] = 0;
    }
  }
  return g;
}

void write_grid_csv(std::ostream& os, const TensorGrid& grid) {
  for (Index k = 0; k < grid.dim(); ++k) os << "x" << (k + 1) << ',';
  os << "omega,w2\n";
  os << std::setprecision(17);
  for (Index q = 0; q < grid.size(); ++q) {
    for (Index k = 0; k < grid.dim(); ++k) os << grid.points(k, q) << ',';
    os << grid.vol_weights[q] << ',' << grid.w2_factors[q] << '\n';
  }
}

}  // namespace klyap
