#include "klyap/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "klyap/errors.hpp"
#include "klyap/linalg/real_schur.hpp"
#include "klyap/linalg/sym_eig.hpp"

namespace klyap {

namespace {

// Dormand–Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

void validate(const IntegratorConfig& cfg) {
  if (!(cfg.rel_tol > 0.0) || !(cfg.abs_tol > 0.0)) throw std::invalid_argument("IntegratorConfig: tolerances must be positive");
  if (!(cfg.max_time > 0.0)) throw std::invalid_argument("IntegratorConfig: max_time must be positive");
  if (!(cfg.max_step > 0.0)) throw std::invalid_argument("IntegratorConfig: max_step must be positive");
}

OdeRhs autonomous(const PolynomialMap& f) {
  return [&f](double, const VectorXd& y, VectorXd& dydt) { dydt = f(y); };
}

}  // namespace

double integrate_ode(const OdeRhs& rhs, double t0, double t1, VectorXd& y, const IntegratorConfig& cfg,
                     const StepObserver& observer) {
  validate(cfg);
  if (t1 < t0) throw std::invalid_argument("integrate_ode: backward integration is not supported");
  const Index n = y.size();
  if (t1 == t0) return t0;

  VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);
  rhs(t0, y, k1);

  auto scaled_norm = [&](const VectorXd& v) {
    double s = 0.0;
    for (Index i = 0; i < n; ++i) s += std::pow(v[i] / (cfg.abs_tol + cfg.rel_tol * std::abs(y[i])), 2);
    return std::sqrt(s / std::max<Index>(n, 1));
  };
  double h;
  {
    const double d0 = scaled_norm(y), d1 = scaled_norm(k1);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min({h, cfg.max_step, t1 - t0});
  }

  double t = t0;
  while (t < t1) {
    const double h_min = 1e-14 * std::max(1.0, std::abs(t));
    if (h < h_min) {
      std::ostringstream os;
      os << "integrate_ode: step size underflow at t = " << t;
      throw IntegrationError(os.str());
    }
    const bool last = t + h >= t1;
    if (last) h = t1 - t;

    ytmp = y + h * a21 * k1;
    rhs(t + c2 * h, ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    rhs(t + c3 * h, ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(t + c4 * h, ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(t + c5 * h, ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(t + h, ytmp, k6);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    rhs(t + h, ynew, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double en = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      en += (err[i] / sc) * (err[i] / sc);
    }
    en = std::sqrt(en / std::max<Index>(n, 1));
    if (!std::isfinite(en)) {
      if (!ynew.allFinite() && h <= h_min) throw IntegrationError("integrate_ode: non-finite state");
      h *= 0.25;
      continue;
    }

    if (en <= 1.0) {
      t = last ? t1 : t + h;
      y = ynew;
      k1 = k7;
      if (!y.allFinite()) throw IntegrationError("integrate_ode: non-finite state");
      if (observer && !observer(t, y)) return t;
      const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
      h = std::min(h * fac, cfg.max_step);
    } else {
      h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
    }
  }
  return t;
}

VectorXd integrate_flow(const PolynomialMap& f, const VectorXd& z, double t, const IntegratorConfig& cfg) {
  if (t < 0.0) throw std::invalid_argument("integrate_flow: t must be non-negative");
  if (z.size() != f.dim_in() || f.dim_out() != f.dim_in()) throw std::invalid_argument("integrate_flow: dimension mismatch");
  VectorXd y = z;
  integrate_ode(autonomous(f), 0.0, t, y, cfg);
  return y;
}

FlowResult integrate_flow_checked(const PolynomialMap& f, const VectorXd& z, double t, const BoxDomain& domain,
                                  const IntegratorConfig& cfg) {
  if (t < 0.0) throw std::invalid_argument("integrate_flow: t must be non-negative");
  if (z.size() != f.dim_in() || f.dim_out() != f.dim_in()) throw std::invalid_argument("integrate_flow: dimension mismatch");
  FlowResult r;
  r.max_overshoot = domain.overshoot(z);
  VectorXd y = z;
  integrate_ode(autonomous(f), 0.0, t, y, cfg, [&](double, const VectorXd& s) {
    r.max_overshoot = std::max(r.max_overshoot, domain.overshoot(s));
    return true;
  });
  r.state = y;
  return r;
}

CostIntegral cost_oracle(const PolynomialMap& f, const NuclearCost& g, const VectorXd& z, const IntegratorConfig& cfg,
                         double tail_tol) {
  if (!(tail_tol > 0.0)) throw std::invalid_argument("cost_oracle: tail_tol must be positive");
  const Index d = f.dim_in();
  if (z.size() != d) throw std::invalid_argument("cost_oracle: dimension mismatch");

  CostIntegral out;
  const double g0 = g(z);
  if (g0 == 0.0 && f(z).isZero(0.0)) return out;  // resting at an equilibrium with zero cost

  OdeRhs rhs = [&](double, const VectorXd& y, VectorXd& dydt) {
    const VectorXd x = y.head(d);
    dydt.resize(d + 1);
    dydt.head(d) = f(x);
    dydt[d] = g(x);
  };

  struct Sample {
    double t, log_g;
  };
  std::vector<Sample> samples;
  samples.push_back({0.0, g0 > 0.0 ? std::log(g0) : -std::numeric_limits<double>::infinity()});
  bool done = false;
  double last_g = g0;

  auto observer = [&](double t, const VectorXd& y) {
    const VectorXd x = y.head(d);
    const double gx = g(x);
    last_g = gx;
    if (gx == 0.0) {
      if (f(x).isZero(0.0)) {
        done = true;
        out.tail_bound = 0.0;
        return false;
      }
      return true;
    }
    const double lg = std::log(gx);
    samples.push_back({t, lg});
    // Window: samples since g last exceeded ten times its current value, and
    // at least four of them (large steps can cross a decade in one).
    std::size_t start = samples.size();
    bool decade = false;
    while (start > 0) {
      --start;
      if (samples[start].log_g - lg >= std::log(10.0)) {
        decade = true;
        break;
      }
    }
    if (!decade || samples.size() < 4) return true;
    start = std::min(start, samples.size() - 4);
    double st = 0, sl = 0, stt = 0, stl = 0;
    const double cnt = static_cast<double>(samples.size() - start);
    for (std::size_t i = start; i < samples.size(); ++i) {
      st += samples[i].t;
      sl += samples[i].log_g;
      stt += samples[i].t * samples[i].t;
      stl += samples[i].t * samples[i].log_g;
    }
    const double denom = cnt * stt - st * st;
    if (!(denom > 0.0)) return true;
    const double slope = (cnt * stl - st * sl) / denom;
    if (!(slope < 0.0)) return true;
    const double tail = gx / std::abs(slope);
    if (tail < tail_tol) {
      out.tail_bound = tail;
      done = true;
      return false;
    }
    return true;
  };

  VectorXd y(d + 1);
  y.head(d) = z;
  y[d] = 0.0;
  const double t_end = integrate_ode(rhs, 0.0, cfg.max_time, y, cfg, observer);
  if (!done) {
    std::ostringstream os;
    os << "cost_oracle: cost did not decay by max_time = " << cfg.max_time << " (g(x(T)) = " << last_g
       << ", partial integral = " << y[d] << ")";
    throw IntegrationError(os.str());
  }
  out.value = y[d];
  out.horizon = t_end;
  return out;
}

// ---------------------------------------------------------------------------

HypothesisReport check_tangent(const PolynomialMap& f, const BoxDomain& domain, int n_per_face, double tol_boundary) {
  if (n_per_face < 2) throw std::invalid_argument("check_tangent: n_per_face must be >= 2");
  const Index d = domain.dim();
  HypothesisReport rep;
  rep.name = "tangent_condition";
  double worst = -std::numeric_limits<double>::infinity();
  Index points = 0;
  for (Index k = 0; k < d; ++k) {
    for (int side = 0; side < 2; ++side) {
      const double normal = side == 0 ? -1.0 : 1.0;
      // uniform grid over the remaining d−1 coordinates
      Index total = 1;
      for (Index j = 0; j < d - 1; ++j) total *= n_per_face;
      for (Index q = 0; q < total; ++q) {
        VectorXd x(d);
        Index rem = q;
        for (Index j = 0; j < d; ++j) {
          if (j == k) {
            x[j] = side == 0 ? domain.lower()[j] : domain.upper()[j];
            continue;
          }
          const Index i = rem % n_per_face;
          rem /= n_per_face;
          x[j] = domain.lower()[j] + (domain.upper()[j] - domain.lower()[j]) * static_cast<double>(i) / (n_per_face - 1);
        }
        worst = std::max(worst, normal * f(x)[k]);
        ++points;
      }
    }
  }
  rep.witness["max_boundary_flux"] = worst;
  rep.witness["points"] = static_cast<double>(points);
  rep.witness["tol_boundary"] = tol_boundary;
  rep.passed = worst <= tol_boundary;
  return rep;
}

std::vector<VectorXd> uniform_grid(const BoxDomain& domain, int n_per_dim, const WeightFunction* w) {
  if (n_per_dim < 2) throw std::invalid_argument("uniform_grid: need at least two points per dimension");
  const Index d = domain.dim();
  Index total = 1;
  for (Index j = 0; j < d; ++j) total *= n_per_dim;
  std::vector<VectorXd> pts;
  pts.reserve(static_cast<std::size_t>(total));
  for (Index q = 0; q < total; ++q) {
    VectorXd x(d);
    Index rem = q;
    for (Index j = d - 1; j >= 0; --j) {
      const Index i = rem % n_per_dim;
      rem /= n_per_dim;
      x[j] = domain.lower()[j] + (domain.upper()[j] - domain.lower()[j]) * static_cast<double>(i) / (n_per_dim - 1);
    }
    if (w && w->near_singular(x, 1e-12)) continue;
    pts.push_back(std::move(x));
  }
  return pts;
}

double estimate_omega0(const PolynomialMap& f, const WeightFunction& w, const std::vector<VectorXd>& grid) {
  if (grid.empty()) throw std::invalid_argument("estimate_omega0: empty grid");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& x : grid) {
    const auto wv = w.eval(x);
    best = std::max(best, -f(x).dot(wv.gradient) / wv.value);
  }
  return best;
}

HypothesisReport check_decay_bound(const PolynomialMap& f, const WeightFunction& w, const VectorXd& z,
                                   const std::vector<double>& times, double omega0, const IntegratorConfig& cfg) {
  HypothesisReport rep;
  rep.name = "decay_bound";
  std::vector<double> ts = times;
  std::sort(ts.begin(), ts.end());
  if (!ts.empty() && ts.front() < 0.0) throw std::invalid_argument("check_decay_bound: times must be non-negative");
  const double wz = w.value(z);
  VectorXd x = z;
  double t_prev = 0.0;
  double worst = -std::numeric_limits<double>::infinity();
  for (double t : ts) {
    integrate_ode(autonomous(f), t_prev, t, x, cfg);
    t_prev = t;
    const double ratio = wz / (std::exp(t * omega0) * w.value(x));
    worst = std::max(worst, ratio - 1.0);
  }
  rep.witness["max_violation"] = worst;
  rep.witness["omega0"] = omega0;
  rep.passed = worst <= 1e-6;
  return rep;
}

HypothesisReport check_port_hamiltonian(const PolynomialMap& h, const PolynomialMatrix& j, const PolynomialMatrix& r,
                                        const std::vector<VectorXd>& grid) {
  if (grid.empty()) throw std::invalid_argument("check_port_hamiltonian: empty grid");
  HypothesisReport rep;
  rep.name = "port_hamiltonian";
  double omega0 = -std::numeric_limits<double>::infinity();
  double skew = 0.0, sym = 0.0, min_eig = std::numeric_limits<double>::infinity();
  for (const auto& x : grid) {
    const double hv = h.scalar(x);
    if (!(hv > 0.0)) throw std::domain_error("check_port_hamiltonian: H <= 0 at a grid point");
    const VectorXd dh = h.gradient(x);
    const MatrixXd jm = j(x), rm = r(x);
    skew = std::max(skew, (jm + jm.transpose()).cwiseAbs().maxCoeff());
    sym = std::max(sym, (rm - rm.transpose()).cwiseAbs().maxCoeff());
    const MatrixXd rs = 0.5 * (rm + rm.transpose());
    min_eig = std::min(min_eig, sym_eig(rs).values.minCoeff());
    omega0 = std::max(omega0, -dh.dot(rm * dh) / (2.0 * hv));
  }
  rep.witness["omega0"] = omega0;
  rep.witness["max_skew_defect"] = skew;
  rep.witness["max_symmetry_defect"] = sym;
  rep.witness["min_r_eigenvalue"] = min_eig;
  rep.passed = omega0 < 0.0 && skew <= 1e-12 && sym <= 1e-12 && min_eig >= -1e-12;
  return rep;
}

HypothesisReport check_linearization(const PolynomialMap& f, const VectorXd& x_eq) {
  const VectorXd f_eq = f(x_eq);
  if (f_eq.norm() > 1e-10) throw std::invalid_argument("check_linearization: f(x_eq) != 0, not an equilibrium");
  HypothesisReport rep;
  rep.name = "linearization";
  const auto schur = real_schur(f.jacobian(x_eq));
  const double abscissa = schur.spectral_abscissa();
  rep.witness["spectral_abscissa"] = abscissa;
  rep.witness["equilibrium_residual"] = f_eq.norm();
  rep.passed = abscissa < 0.0;
  return rep;
}

}  // namespace klyap
