#include "klyap/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "klyap/linalg/lyapunov.hpp"

namespace klyap::cli {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Grammar

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

json parse_scalar(const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  if (!text.empty()) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() + text.size()) {
      const bool integral = text.find_first_of(".eEnN") == std::string::npos;
      if (integral) return static_cast<long long>(v);
      return v;
    }
  }
  return text;
}

struct Entry {
  json value;
  int line = 0;
};

std::map<std::string, Entry> tokenize(const std::string& text) {
  std::map<std::string, Entry> out;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']' && t.find('=') == std::string::npos) {
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;

    const int start = lineno;
    json value;
    if (!val.empty() && (val[0] == '[' || val[0] == '{' || val[0] == '"')) {
      // JSON values may continue over several lines until they parse
      while (!json::accept(val)) {
        if (!std::getline(in, line)) {
          throw ConfigError("line " + std::to_string(start) + ": malformed JSON value for '" + key + "'");
        }
        ++lineno;
        val += "\n" + line;
      }
      value = json::parse(val);
    } else {
      const auto hash = val.find(" #");
      if (hash != std::string::npos) val = trim(val.substr(0, hash));
      value = parse_scalar(val);
    }
    if (out.count(key)) throw ConfigError("line " + std::to_string(start) + ": duplicate key '" + key + "'");
    out[key] = Entry{std::move(value), start};
  }
  return out;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "system",
      "dynamics.f",
      "cost.c",
      "weight.kind",
      "weight.value",
      "weight.H",
      "weight.singular_points",
      "domain.lower",
      "domain.upper",
      "domain.equilibrium",
      "basis.kind",
      "basis.degree",
      "basis.breakpoints",
      "basis.equilibrium_vanishing",
      "basis.max_index_sum",
      "basis.drop_tol",
      "quadrature.nodes",
      "quadrature.per_cell",
      "quadrature.normalize_measure",
      "tolerances.rel_tol",
      "tolerances.abs_tol",
      "tolerances.max_step",
      "tolerances.max_time",
      "tolerances.oracle_tail",
      "tolerances.laguerre_tail",
      "tolerances.trunc",
      "tolerances.boundary",
      "tolerances.decay_violation",
      "check.face_points",
      "check.omega_grid",
      "check.trajectories",
      "check.horizon",
      "check.samples",
      "compare.grid",
      "compare.random_points",
      "compare.lower",
      "compare.upper",
      "compare.interior_scale",
      "compare.exclude_radius",
      "compare.reference",
      "solve.eigenfunctions",
      "oracle.points",
      "oracle.random_points",
      "laguerre.z",
      "laguerre.n",
      "laguerre.observable",
      "output_dir",
  };
  return keys;
}

class Reader {
 public:
  explicit Reader(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  const json& raw(const std::string& key) const { return entries_.at(key).value; }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<double>();
  }
  int integer(const std::string& key, int fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<int>();
  }
  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    return v.get<bool>();
  }
  std::string string(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }
  VectorXd vector(const std::string& key) const { return to_vector(raw(key), key); }
  /// A single integer broadcast to `dim` entries, or an explicit list.
  std::vector<int> int_list(const std::string& key, Index dim, int fallback) const {
    if (!has(key)) return std::vector<int>(static_cast<std::size_t>(dim), fallback);
    const json& v = raw(key);
    if (v.is_number_integer()) return std::vector<int>(static_cast<std::size_t>(dim), v.get<int>());
    if (!v.is_array() || static_cast<Index>(v.size()) != dim) {
      fail(key, "expected an integer or a list of " + std::to_string(dim) + " integers");
    }
    std::vector<int> out;
    for (const auto& e : v) {
      if (!e.is_number_integer()) fail(key, "expected integers");
      out.push_back(e.get<int>());
    }
    return out;
  }

  VectorXd to_vector(const json& v, const std::string& key) const {
    if (!v.is_array() || v.empty()) fail(key, "expected a non-empty list of numbers");
    VectorXd out(static_cast<Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(key, "expected a list of numbers");
      out[static_cast<Index>(i)] = v[i].get<double>();
    }
    return out;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const auto it = entries_.find(key);
    const std::string where = it != entries_.end() ? "line " + std::to_string(it->second.line) + ": " : "";
    throw ConfigError(where + key + ": " + msg);
  }

  const std::map<std::string, Entry>& entries() const { return entries_; }

 private:
  std::map<std::string, Entry> entries_;
};

template <typename F>
auto stage(const std::string& name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Problem assembly

std::vector<Term> terms_from_json(const json& terms, Index dim, const std::string& key) {
  if (!terms.is_array()) throw ConfigError(key + ": a polynomial is a list of {coeff, exponents}");
  std::vector<Term> out;
  for (const auto& t : terms) {
    if (!t.is_object() || !t.contains("coeff") || !t.contains("exponents")) {
      throw ConfigError(key + ": every term needs 'coeff' and 'exponents'");
    }
    Term term;
    term.coeff = t.at("coeff").get<double>();
    term.monomial.exponents = t.at("exponents").get<std::vector<int>>();
    if (static_cast<Index>(term.monomial.exponents.size()) != dim) {
      throw ConfigError(key + ": exponent list length must equal the state dimension " + std::to_string(dim));
    }
    for (int e : term.monomial.exponents) {
      if (e < 0) throw ConfigError(key + ": negative exponent");
    }
    out.push_back(std::move(term));
  }
  return out;
}

bool is_affine(const PolynomialMap& p, bool allow_constant) {
  for (const auto& comp : p.components()) {
    for (const auto& t : comp) {
      if (t.coeff == 0.0) continue;
      const int deg = t.monomial.total_degree();
      if (deg > 1 || (deg == 0 && !allow_constant)) return false;
    }
  }
  return true;
}

void build_problem(const Reader& r, ProblemConfig& cfg) {
  const bool custom_dynamics = r.has("dynamics.f");
  cfg.system = r.string("system", custom_dynamics ? "custom" : "");
  if (cfg.system.empty()) throw ConfigError("missing required key: system (or dynamics.f for a custom system)");

  for (const auto& [key, entry] : r.entries()) {
    if (key.rfind("system.", 0) == 0) {
      if (!entry.value.is_number()) r.fail(key, "expected a number");
      cfg.params[key.substr(7)] = entry.value.get<double>();
    }
  }

  Problem& p = cfg.problem;
  if (cfg.system != "custom") {
    try {
      p = builtin_system(cfg.system, cfg.params);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("system: ") + e.what());
    }
  } else {
    if (!cfg.params.empty()) throw ConfigError("system.* parameters apply to builtin systems only");
    p.name = "custom";
    for (const char* key : {"dynamics.f", "cost.c", "domain.lower", "domain.upper"}) {
      if (!r.has(key)) throw ConfigError(std::string("custom system requires ") + key);
    }
  }

  Index dim = p.dynamics.dim_in();
  if (custom_dynamics) {
    const json& f = r.raw("dynamics.f");
    if (!f.is_array() || f.empty()) r.fail("dynamics.f", "expected a list of component polynomials");
    dim = static_cast<Index>(f.size());
    std::vector<std::vector<Term>> comps;
    for (const auto& c : f) comps.push_back(terms_from_json(c, dim, "dynamics.f"));
    p.dynamics = PolynomialMap(dim, std::move(comps));
    p.port_hamiltonian.reset();
  }
  if (r.has("cost.c")) {
    const json& c = r.raw("cost.c");
    if (c.is_string() && c.get<std::string>() == "coordinates") {
      p.cost = NuclearCost::coordinates(dim);
    } else {
      if (!c.is_array() || c.empty()) r.fail("cost.c", "expected a list of observables or \"coordinates\"");
      std::vector<PolynomialMap> obs;
      for (const auto& o : c) obs.emplace_back(dim, std::vector<std::vector<Term>>{terms_from_json(o, dim, "cost.c")});
      p.cost = NuclearCost(std::move(obs));
    }
  }

  const bool domain_changed = r.has("domain.lower") || r.has("domain.upper") || r.has("domain.equilibrium");
  if (domain_changed) {
    const VectorXd lo = r.has("domain.lower") ? r.vector("domain.lower") : p.domain.lower();
    const VectorXd hi = r.has("domain.upper") ? r.vector("domain.upper") : p.domain.upper();
    std::optional<VectorXd> eq;
    if (r.has("domain.equilibrium")) eq = r.vector("domain.equilibrium");
    else if (p.domain.dim() == lo.size()) eq = p.domain.equilibrium();
    if (lo.size() != dim || hi.size() != dim) throw ConfigError("domain bounds must have the state dimension");
    try {
      p.domain = BoxDomain(lo, hi, eq);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("domain: ") + e.what());
    }
  }
  const VectorXd& x_eq = p.domain.equilibrium();

  if (r.has("weight.kind") || cfg.system == "custom") {
    const std::string kind = r.string("weight.kind", "inverse_norm");
    if (kind == "constant") {
      p.weight = WeightFunction::constant(r.number("weight.value", 1.0), dim);
    } else if (kind == "inverse_norm") {
      p.weight = WeightFunction::inverse_norm(x_eq);
    } else if (kind == "hamiltonian") {
      if (!r.has("weight.H")) throw ConfigError("weight.kind = hamiltonian requires the polynomial weight.H");
      const PolynomialMap h(dim, {terms_from_json(r.raw("weight.H"), dim, "weight.H")});
      std::vector<VectorXd> singular{x_eq};
      if (r.has("weight.singular_points")) {
        singular.clear();
        const json& pts = r.raw("weight.singular_points");
        if (!pts.is_array()) r.fail("weight.singular_points", "expected a list of points");
        for (const auto& pt : pts) singular.push_back(r.to_vector(pt, "weight.singular_points"));
      }
      p.weight = WeightFunction::hamiltonian(h, std::move(singular));
    } else {
      r.fail("weight.kind", "expected constant, inverse_norm or hamiltonian");
    }
  } else if (p.weight.kind() == WeightFunction::Kind::inverse_norm && domain_changed) {
    p.weight = WeightFunction::inverse_norm(x_eq);
  }
  for (const char* key : {"weight.value", "weight.H", "weight.singular_points"}) {
    if (r.has(key) && !r.has("weight.kind")) throw ConfigError(std::string(key) + " requires weight.kind");
  }

  if (p.cost.rank() == 0) throw ConfigError("cost.c: at least one observable is required");
  if (p.cost.dim() != dim || p.domain.dim() != dim) throw ConfigError("dynamics, cost and domain dimensions differ");
}

void build_discretization_settings(const Reader& r, ProblemConfig& cfg) {
  const Index dim = cfg.problem.dynamics.dim_in();
  const std::string kind = r.string("basis.kind", "legendre");
  if (kind == "legendre") cfg.basis.kind = Basis1D::Kind::legendre;
  else if (kind == "bspline") cfg.basis.kind = Basis1D::Kind::bspline;
  else r.fail("basis.kind", "expected legendre or bspline");
  const bool spline = cfg.basis.kind == Basis1D::Kind::bspline;

  cfg.basis.degree = r.int_list("basis.degree", dim, spline ? 4 : 11);
  for (int d : cfg.basis.degree) {
    if (d < 0) r.fail("basis.degree", "degree must be non-negative, got " + std::to_string(d));
  }
  if (spline) {
    cfg.basis.breakpoints = r.int_list("basis.breakpoints", dim, 21);
    for (int b : cfg.basis.breakpoints) {
      if (b < 2) r.fail("basis.breakpoints", "need at least 2 breakpoints per dimension");
    }
  } else if (r.has("basis.breakpoints")) {
    r.fail("basis.breakpoints", "only valid with basis.kind = bspline");
  }
  cfg.basis.equilibrium_vanishing = r.boolean("basis.equilibrium_vanishing", true);
  if (r.has("basis.max_index_sum")) {
    cfg.basis.max_index_sum = r.integer("basis.max_index_sum", 0);
    if (*cfg.basis.max_index_sum < 0) r.fail("basis.max_index_sum", "must be non-negative");
  }
  cfg.basis.drop_tol = r.number("basis.drop_tol", 1e-12);

  std::vector<int> default_nodes;
  for (int d : cfg.basis.degree) default_nodes.push_back(std::max(2, d + 1 + (d + 1) % 2));
  if (spline) {
    if (r.has("quadrature.nodes")) r.fail("quadrature.nodes", "spline bases use quadrature.per_cell");
    cfg.quadrature.per_cell = r.integer("quadrature.per_cell", 6);
    if (cfg.quadrature.per_cell < 1) r.fail("quadrature.per_cell", "must be positive");
  } else {
    if (r.has("quadrature.per_cell")) r.fail("quadrature.per_cell", "only valid with basis.kind = bspline");
    cfg.quadrature.nodes.resize(static_cast<std::size_t>(dim));
    if (r.has("quadrature.nodes")) {
      cfg.quadrature.nodes = r.int_list("quadrature.nodes", dim, 0);
    } else {
      cfg.quadrature.nodes = default_nodes;
    }
    for (int n : cfg.quadrature.nodes) {
      if (n < 1) r.fail("quadrature.nodes", "must be positive");
    }
  }
  cfg.quadrature.normalize_measure = r.boolean("quadrature.normalize_measure", true);

  auto& tol = cfg.tolerances;
  tol.integrator.rel_tol = r.number("tolerances.rel_tol", tol.integrator.rel_tol);
  tol.integrator.abs_tol = r.number("tolerances.abs_tol", tol.integrator.abs_tol);
  tol.integrator.max_step = r.number("tolerances.max_step", tol.integrator.max_step);
  tol.integrator.max_time = r.number("tolerances.max_time", tol.integrator.max_time);
  tol.oracle_tail = r.number("tolerances.oracle_tail", tol.oracle_tail);
  tol.laguerre_tail = r.number("tolerances.laguerre_tail", tol.laguerre_tail);
  tol.trunc = r.number("tolerances.trunc", tol.trunc);
  tol.boundary = r.number("tolerances.boundary", tol.boundary);
  tol.decay_violation = r.number("tolerances.decay_violation", tol.decay_violation);
  for (const auto& [key, entry] : r.entries()) {
    if (key.rfind("tolerances.", 0) == 0 && !(entry.value.get<double>() > 0.0)) r.fail(key, "must be positive");
  }

  cfg.check.face_points = r.integer("check.face_points", cfg.check.face_points);
  cfg.check.omega_grid = r.integer("check.omega_grid", cfg.check.omega_grid);
  cfg.check.trajectories = r.integer("check.trajectories", cfg.check.trajectories);
  cfg.check.horizon = r.number("check.horizon", cfg.check.horizon);
  cfg.check.samples = r.integer("check.samples", cfg.check.samples);
  if (cfg.check.face_points < 2 || cfg.check.omega_grid < 2 || cfg.check.samples < 2 || cfg.check.trajectories < 0) {
    throw ConfigError("check: grid and sample counts must be at least 2");
  }

  auto& cmp = cfg.compare;
  cmp.grid = r.integer("compare.grid", cmp.grid);
  cmp.random_points = r.integer("compare.random_points", cmp.random_points);
  cmp.lower = r.has("compare.lower") ? r.vector("compare.lower") : cfg.problem.domain.lower();
  cmp.upper = r.has("compare.upper") ? r.vector("compare.upper") : cfg.problem.domain.upper();
  cmp.interior_scale = r.number("compare.interior_scale", cmp.interior_scale);
  cmp.exclude_radius = r.number("compare.exclude_radius", cmp.exclude_radius);
  cmp.reference = r.string("compare.reference", cmp.reference);
  if (cmp.grid < 2) r.fail("compare.grid", "need at least 2 points per dimension");
  if (cmp.random_points < 0) r.fail("compare.random_points", "must be non-negative");
  if (cmp.lower.size() != dim || cmp.upper.size() != dim || (cmp.upper - cmp.lower).minCoeff() <= 0.0) {
    throw ConfigError("compare.lower/upper must describe a non-empty box of the state dimension");
  }
  if (cmp.reference != "auto" && cmp.reference != "analytic" && cmp.reference != "oracle") {
    r.fail("compare.reference", "expected auto, analytic or oracle");
  }

  if (r.has("oracle.points")) {
    const json& pts = r.raw("oracle.points");
    if (!pts.is_array()) r.fail("oracle.points", "expected a list of points");
    for (const auto& pt : pts) {
      cfg.oracle_points.push_back(r.to_vector(pt, "oracle.points"));
      if (cfg.oracle_points.back().size() != dim) r.fail("oracle.points", "point dimension mismatch");
    }
  }
  cfg.oracle_random_points = r.integer("oracle.random_points", cfg.oracle_random_points);

  const VectorXd& x_eq = cfg.problem.domain.equilibrium();
  cfg.laguerre.z = r.has("laguerre.z") ? r.vector("laguerre.z")
                                       : VectorXd(x_eq + 0.5 * (cfg.problem.domain.upper() - x_eq));
  cfg.laguerre.n = r.integer("laguerre.n", cfg.laguerre.n);
  cfg.laguerre.observable = r.integer("laguerre.observable", 0);
  if (cfg.laguerre.z.size() != dim) r.fail("laguerre.z", "point dimension mismatch");
  if (cfg.laguerre.n < 1 || cfg.laguerre.n > 60) r.fail("laguerre.n", "must lie in [1, 60]");
  if (cfg.laguerre.observable < 0 || cfg.laguerre.observable >= cfg.problem.cost.rank()) {
    r.fail("laguerre.observable", "index out of range");
  }

  cfg.eigenfunctions = r.integer("solve.eigenfunctions", cfg.eigenfunctions);
  if (cfg.eigenfunctions < 0) r.fail("solve.eigenfunctions", "must be non-negative");
  cfg.output_dir = r.string("output_dir", cfg.output_dir);
}

std::vector<Rule1D> build_rules(const ProblemConfig& cfg, const TensorBasis* basis) {
  const BoxDomain& dom = cfg.problem.domain;
  std::vector<Rule1D> rules;
  for (Index k = 0; k < dom.dim(); ++k) {
    if (cfg.basis.kind == Basis1D::Kind::legendre) {
      rules.push_back(gauss_legendre(cfg.quadrature.nodes[static_cast<std::size_t>(k)], dom.lower()[k], dom.upper()[k]));
    } else {
      const auto& factor = basis->factors()[static_cast<std::size_t>(k)];
      rules.push_back(composite_rule(factor.breakpoints(), cfg.quadrature.per_cell));
    }
  }
  return rules;
}

}  // namespace

// ---------------------------------------------------------------------------

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

ProblemConfig parse_config(const std::string& text) {
  Reader reader(tokenize(text));
  std::vector<std::string> unknown;
  for (const auto& [key, entry] : reader.entries()) {
    if (key.rfind("system.", 0) == 0) continue;
    if (!known_keys().count(key)) unknown.push_back(key);
  }
  if (!unknown.empty()) {
    std::string msg = "unknown configuration keys:";
    for (const auto& k : unknown) msg += " " + k + " (line " + std::to_string(reader.entries().at(k).line) + ")";
    throw ConfigError(msg);
  }

  ProblemConfig cfg;
  cfg.hash = fnv1a(text);
  build_problem(reader, cfg);
  build_discretization_settings(reader, cfg);

  // Node placement is only known once the rules exist; a node on a singular
  // point of w makes the weighted inner product undefined.
  try {
    build_grid(cfg);
  } catch (const std::domain_error& e) {
    throw ConfigError(std::string("quadrature: ") + e.what());
  }
  return cfg;
}

ProblemConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

json polynomial_to_json(const PolynomialMap& scalar) {
  json terms = json::array();
  for (const auto& t : scalar.components().front()) {
    terms.push_back({{"coeff", t.coeff}, {"exponents", t.monomial.exponents}});
  }
  return terms;
}

PolynomialMap polynomial_from_json(const json& terms, Index dim) {
  return PolynomialMap(dim, {terms_from_json(terms, dim, "polynomial")});
}

std::string serialize_problem(const Problem& problem) {
  const Index dim = problem.dynamics.dim_in();
  json f = json::array();
  for (Index i = 0; i < problem.dynamics.dim_out(); ++i) f.push_back(polynomial_to_json(problem.dynamics.component(i)));
  json c = json::array();
  for (const auto& o : problem.cost.observables()) c.push_back(polynomial_to_json(o));
  auto vec = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };

  std::ostringstream os;
  os << "system = custom\n";
  os << "dynamics.f = " << f.dump() << "\n";
  os << "cost.c = " << c.dump() << "\n\n[domain]\n";
  os << "lower = " << json(vec(problem.domain.lower())).dump() << "\n";
  os << "upper = " << json(vec(problem.domain.upper())).dump() << "\n";
  os << "equilibrium = " << json(vec(problem.domain.equilibrium())).dump() << "\n\n[weight]\n";
  switch (problem.weight.kind()) {
    case WeightFunction::Kind::constant:
      os << "kind = constant\nvalue = " << fmt(problem.weight.value(VectorXd::Zero(dim))) << "\n";
      break;
    case WeightFunction::Kind::inverse_norm:
      os << "kind = inverse_norm\n";
      break;
    case WeightFunction::Kind::hamiltonian: {
      json pts = json::array();
      for (const auto& s : problem.weight.singular_points()) pts.push_back(vec(s));
      os << "kind = hamiltonian\nH = " << polynomial_to_json(problem.weight.hamiltonian_polynomial()).dump() << "\n";
      os << "singular_points = " << pts.dump() << "\n";
      break;
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------

TensorBasis build_basis(const ProblemConfig& cfg) {
  const BoxDomain& dom = cfg.problem.domain;
  std::vector<Basis1D> factors;
  for (Index k = 0; k < dom.dim(); ++k) {
    const auto ks = static_cast<std::size_t>(k);
    if (cfg.basis.kind == Basis1D::Kind::legendre) {
      factors.push_back(Basis1D::legendre(cfg.basis.degree[ks], dom.lower()[k], dom.upper()[k]));
    } else {
      factors.push_back(
          Basis1D::clamped_bspline(dom.lower()[k], dom.upper()[k], cfg.basis.breakpoints[ks], cfg.basis.degree[ks]));
    }
  }
  TensorBasis raw(std::move(factors), cfg.basis.max_index_sum);
  if (!cfg.basis.equilibrium_vanishing) return raw;
  return shift_to_equilibrium(raw, dom.equilibrium());
}

TensorGrid build_grid(const ProblemConfig& cfg) {
  std::optional<TensorBasis> basis;
  if (cfg.basis.kind == Basis1D::Kind::bspline) basis = build_basis(cfg);
  const auto norm = cfg.quadrature.normalize_measure ? MeasureNormalization::probability : MeasureNormalization::none;
  return tensor_grid(build_rules(cfg, basis ? &*basis : nullptr), cfg.problem.weight, norm);
}

Discretization discretize(const ProblemConfig& cfg) {
  const Problem& p = cfg.problem;
  Discretization d;
  TensorBasis raw = stage("basis", [&] { return build_basis(cfg); });
  TensorGrid grid = stage("quadrature", [&] { return build_grid(cfg); });
  d.onb = stage("orthonormalize", [&] {
    return std::make_shared<const OrthonormalBasis>(std::move(raw), std::move(grid), cfg.basis.drop_tol);
  });
  if (d.onb->rank() == 0) throw StageError("orthonormalize", "basis has rank zero");
  d.generator = stage("assemble_generator", [&] { return assemble_generator(p.dynamics, *d.onb); });
  d.observation = stage("assemble_observation", [&] { return assemble_observation(p.cost, *d.onb); });
  d.gramian = stage("solve_gramian", [&] { return solve_gramian(d.generator, d.observation); });
  d.sos = stage("sum_of_squares", [&] { return make_sum_of_squares(d.gramian, *d.onb, cfg.tolerances.trunc); });
  return d;
}

std::optional<MatrixXd> analytic_quadratic_value(const Problem& problem) {
  if (!is_affine(problem.dynamics, false)) return std::nullopt;
  for (const auto& c : problem.cost.observables()) {
    if (!is_affine(c, false)) return std::nullopt;
  }
  const Index n = problem.dynamics.dim_in();
  if (problem.domain.dim() == n && problem.domain.equilibrium().norm() != 0.0) return std::nullopt;
  const VectorXd zero = VectorXd::Zero(n);
  const MatrixXd a = problem.dynamics.jacobian(zero);
  MatrixXd c(problem.cost.rank(), n);
  for (Index i = 0; i < problem.cost.rank(); ++i) c.row(i) = problem.cost.observables()[static_cast<std::size_t>(i)].gradient(zero).transpose();
  // v(z) = zᵀXz with AᵀX + XA + CᵀC = 0
  return solve_lyapunov_kron(MatrixXd(a.transpose()), MatrixXd(c.transpose() * c));
}

Command parse_command(const std::string& name) {
  if (name == "check") return Command::check;
  if (name == "solve") return Command::solve;
  if (name == "oracle") return Command::oracle;
  if (name == "compare") return Command::compare;
  if (name == "laguerre") return Command::laguerre;
  throw ConfigError("unknown command '" + name + "' (expected check, solve, oracle, compare or laguerre)");
}

// ---------------------------------------------------------------------------
// Commands

namespace {

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::uint64_t hash, const std::vector<std::string>& columns)
      : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << "# config_hash=" << hex64(hash) << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << "\n";
  }
  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << fmt(values[i]);
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

std::vector<std::string> coordinate_names(Index dim) {
  std::vector<std::string> names;
  for (Index i = 1; i <= dim; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

std::vector<double> as_row(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

/// Uniform points in [lo, hi] from 53-bit draws, identical on every platform.
std::vector<VectorXd> random_points(const VectorXd& lo, const VectorXd& hi, int count, std::mt19937_64& rng,
                                    const WeightFunction* avoid = nullptr) {
  std::vector<VectorXd> pts;
  while (static_cast<int>(pts.size()) < count) {
    VectorXd x(lo.size());
    for (Index j = 0; j < lo.size(); ++j) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      x[j] = lo[j] + (hi[j] - lo[j]) * u;
    }
    if (avoid && avoid->near_singular(x, 1e-8)) continue;
    pts.push_back(std::move(x));
  }
  return pts;
}

json witness_json(const HypothesisReport& h) {
  json j = {{"name", h.name}, {"passed", h.passed}};
  for (const auto& [k, v] : h.witness) j["witness"][k] = v;
  return j;
}

struct Stats {
  double max = 0.0;
  double sq = 0.0;
  std::size_t count = 0;
  void add(double e) {
    max = std::max(max, e);
    sq += e * e;
    ++count;
  }
  json to_json() const {
    return {{"max", max}, {"rms", count ? std::sqrt(sq / static_cast<double>(count)) : 0.0}, {"count", count}};
  }
};

bool interior(const ProblemConfig& cfg, const VectorXd& x) {
  const VectorXd mid = 0.5 * (cfg.compare.lower + cfg.compare.upper);
  const VectorXd half = 0.5 * cfg.compare.interior_scale * (cfg.compare.upper - cfg.compare.lower);
  if (((x - mid).cwiseAbs() - half).maxCoeff() > 1e-12) return false;
  return (x - cfg.problem.domain.equilibrium()).norm() >= cfg.compare.exclude_radius;
}

std::vector<VectorXd> interior_grid(const ProblemConfig& cfg, int n) {
  const VectorXd mid = 0.5 * (cfg.compare.lower + cfg.compare.upper);
  const VectorXd half = 0.5 * cfg.compare.interior_scale * (cfg.compare.upper - cfg.compare.lower);
  const BoxDomain box(mid - half, mid + half, mid);
  std::vector<VectorXd> pts;
  for (auto& x : uniform_grid(box, n)) {
    if ((x - cfg.problem.domain.equilibrium()).norm() >= cfg.compare.exclude_radius) pts.push_back(std::move(x));
  }
  return pts;
}

class Timer {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

void run_check(const ProblemConfig& cfg, std::mt19937_64& rng, RunReport& rep) {
  const Problem& p = cfg.problem;
  std::vector<HypothesisReport> reports;
  reports.push_back(stage("check_tangent", [&] {
    return check_tangent(p.dynamics, p.domain, cfg.check.face_points, cfg.tolerances.boundary);
  }));

  const auto grid = uniform_grid(p.domain, cfg.check.omega_grid, &p.weight);
  const double omega0 = stage("estimate_omega0", [&] { return estimate_omega0(p.dynamics, p.weight, grid); });
  HypothesisReport contraction{"contraction_type", omega0 < 0.0, {{"omega0", omega0}}};
  reports.push_back(contraction);

  reports.push_back(stage("check_linearization", [&] { return check_linearization(p.dynamics, p.domain.equilibrium()); }));

  if (p.port_hamiltonian) {
    const auto& ph = *p.port_hamiltonian;
    reports.push_back(stage("check_port_hamiltonian", [&] { return check_port_hamiltonian(ph.h, ph.j, ph.r, grid); }));
  }

  if (cfg.check.trajectories > 0) {
    std::vector<double> times(static_cast<std::size_t>(cfg.check.samples));
    for (int i = 0; i < cfg.check.samples; ++i) times[static_cast<std::size_t>(i)] = cfg.check.horizon * i / (cfg.check.samples - 1);
    HypothesisReport decay{"decay_bound", true, {{"max_violation", 0.0}, {"trajectories", cfg.check.trajectories}}};
    const auto starts = random_points(p.domain.lower(), p.domain.upper(), cfg.check.trajectories, rng, &p.weight);
    for (const auto& z : starts) {
      const auto r = stage("check_decay_bound", [&] {
        return check_decay_bound(p.dynamics, p.weight, z, times, omega0, cfg.tolerances.integrator);
      });
      decay.witness["max_violation"] = std::max(decay.witness["max_violation"], r.witness.at("max_violation"));
    }
    decay.passed = decay.witness["max_violation"] <= cfg.tolerances.decay_violation;
    reports.push_back(decay);
  }

  json hyps = json::array();
  for (const auto& h : reports) {
    hyps.push_back(witness_json(h));
    rep.hypotheses_passed = rep.hypotheses_passed && h.passed;
  }
  rep.doc["hypotheses"] = hyps;
}

void write_solution_files(const ProblemConfig& cfg, const Discretization& d, const std::filesystem::path& out,
                          int eigenfunctions) {
  const Index dim = cfg.problem.dynamics.dim_in();
  {
    CsvWriter csv(out / "eigenvalues.csv", cfg.hash, {"index", "lambda"});
    for (Index i = 0; i < d.gramian.eigen.values.size(); ++i) csv.row({static_cast<double>(i + 1), d.gramian.eigen.values[i]});
  }
  const auto pts = uniform_grid(BoxDomain(cfg.compare.lower, cfg.compare.upper,
                                          VectorXd(0.5 * (cfg.compare.lower + cfg.compare.upper))),
                                cfg.compare.grid);
  const SumOfSquares& sos = *d.sos;
  const Index nfun = std::min<Index>(eigenfunctions, sos.terms());
  for (Index i = 0; i < nfun; ++i) {
    auto cols = coordinate_names(dim);
    cols.push_back("p_" + std::to_string(i + 1));
    CsvWriter csv(out / ("eigenfunctions_" + std::to_string(i + 1) + ".csv"), cfg.hash, cols);
    for (const auto& x : pts) {
      auto row = as_row(x);
      row.push_back(sos.terms_at(x)[i]);
      csv.row(row);
    }
  }
  auto cols = coordinate_names(dim);
  cols.push_back("v");
  for (Index k = 1; k <= dim; ++k) cols.push_back("dv_dx" + std::to_string(k));
  CsvWriter csv(out / "value.csv", cfg.hash, cols);
  for (const auto& x : pts) {
    const auto [v, g] = sos.eval(x);
    auto row = as_row(x);
    row.push_back(v);
    for (Index k = 0; k < dim; ++k) row.push_back(g[k]);
    csv.row(row);
  }
}

json solution_summary(const ProblemConfig& cfg, const Discretization& d) {
  const auto& vals = d.gramian.eigen.values;
  json s;
  s["raw_size"] = d.onb->raw().size();
  s["rank"] = d.onb->rank();
  s["orthonormality_defect"] = d.onb->orthonormality_defect();
  s["spectral_abscissa"] = d.generator.spectral_abscissa;
  s["lyap_residual"] = lyap_residual(d.generator, d.observation, d.gramian);
  s["max_clamped"] = d.gramian.max_clamped;
  s["span_residuals"] = as_row(d.observation.span_residual);
  s["retained_terms"] = d.sos->terms();
  s["leading_eigenvalues"] = as_row(vals.head(std::min<Index>(10, vals.size())));
  s["trace"] = vals.sum();
  const auto pts = interior_grid(cfg, 20);
  const ResidualStats r = pde_residual(*d.sos, cfg.problem.dynamics, cfg.problem.cost, pts);
  s["pde_residual"] = {{"max", r.max}, {"rms", r.rms}, {"points", pts.size()}};
  try {
    const DecayFit fit = decay_fit(vals, 5);
    s["decay_fit"] = {{"m_hat", fit.m_hat}, {"fit_quality", fit.fit_quality}, {"n_min", 5}};
  } catch (const std::invalid_argument& e) {
    s["decay_fit"] = {{"skipped", e.what()}};
  }
  return s;
}

void run_solve(const ProblemConfig& cfg, const std::filesystem::path& out, RunReport& rep, Timer& timer) {
  const Discretization d = discretize(cfg);
  rep.doc["timings"]["discretize"] = timer.lap();
  rep.doc["solution"] = solution_summary(cfg, d);
  stage("write_output", [&] { write_solution_files(cfg, d, out, cfg.eigenfunctions); });
  rep.doc["timings"]["output"] = timer.lap();
}

void run_oracle(const ProblemConfig& cfg, const std::filesystem::path& out, std::mt19937_64& rng, RunReport& rep) {
  const Problem& p = cfg.problem;
  auto pts = cfg.oracle_points;
  if (pts.empty()) pts = random_points(cfg.compare.lower, cfg.compare.upper, cfg.oracle_random_points, rng);
  auto cols = coordinate_names(p.dynamics.dim_in());
  for (const char* c : {"v", "horizon", "tail_bound"}) cols.emplace_back(c);
  CsvWriter csv(out / "oracle.csv", cfg.hash, cols);
  double max_horizon = 0.0;
  for (const auto& z : pts) {
    const CostIntegral ci = stage("cost_oracle", [&] {
      return cost_oracle(p.dynamics, p.cost, z, cfg.tolerances.integrator, cfg.tolerances.oracle_tail);
    });
    auto row = as_row(z);
    row.insert(row.end(), {ci.value, ci.horizon, ci.tail_bound});
    csv.row(row);
    max_horizon = std::max(max_horizon, ci.horizon);
  }
  rep.doc["oracle"] = {{"points", pts.size()}, {"max_horizon", max_horizon}};
}

void run_compare(const ProblemConfig& cfg, const std::filesystem::path& out, std::mt19937_64& rng, RunReport& rep,
                 Timer& timer) {
  const Problem& p = cfg.problem;
  const Discretization d = discretize(cfg);
  rep.doc["timings"]["discretize"] = timer.lap();
  rep.doc["solution"] = solution_summary(cfg, d);
  stage("write_output", [&] { write_solution_files(cfg, d, out, cfg.eigenfunctions); });

  std::optional<MatrixXd> x;
  if (cfg.compare.reference != "oracle") x = stage("analytic_reference", [&] { return analytic_quadratic_value(p); });
  if (cfg.compare.reference == "analytic" && !x) {
    throw StageError("analytic_reference", "no closed form: dynamics and observables must be linear");
  }
  auto reference = [&](const VectorXd& z) {
    if (x) return z.dot(*x * z);
    return stage("cost_oracle", [&] {
      return cost_oracle(p.dynamics, p.cost, z, cfg.tolerances.integrator, cfg.tolerances.oracle_tail).value;
    });
  };
  rep.doc["compare"]["reference"] = x ? "analytic" : "oracle";

  const VectorXd mid = 0.5 * (cfg.compare.lower + cfg.compare.upper);
  const auto grid = uniform_grid(BoxDomain(cfg.compare.lower, cfg.compare.upper, mid), cfg.compare.grid);
  const auto rnd = random_points(cfg.compare.lower, cfg.compare.upper, cfg.compare.random_points, rng);

  auto cols = coordinate_names(p.dynamics.dim_in());
  cols.insert(cols.begin(), "set");
  for (const char* c : {"v_sos", "v_ref", "abs_error"}) cols.emplace_back(c);
  CsvWriter csv(out / "compare.csv", cfg.hash, cols);
  Stats all, inner, random;
  auto visit = [&](const VectorXd& z, double set, Stats& stats) {
    const double v = d.sos->value(z);
    const double ref = reference(z);
    const double err = std::abs(v - ref);
    stats.add(err);
    if (set == 0.0 && interior(cfg, z)) inner.add(err);
    auto row = as_row(z);
    row.insert(row.begin(), set);
    row.insert(row.end(), {v, ref, err});
    csv.row(row);
  };
  for (const auto& z : grid) visit(z, 0.0, all);
  for (const auto& z : rnd) visit(z, 1.0, random);
  rep.doc["compare"]["grid"] = all.to_json();
  rep.doc["compare"]["interior"] = inner.to_json();
  rep.doc["compare"]["random"] = random.to_json();
  rep.doc["timings"]["compare"] = timer.lap();
}

void run_laguerre(const ProblemConfig& cfg, const std::filesystem::path& out, RunReport& rep) {
  const Problem& p = cfg.problem;
  const auto& c = p.cost.observables()[static_cast<std::size_t>(cfg.laguerre.observable)];
  LaguerreOptions opts;
  opts.tail_tol = cfg.tolerances.laguerre_tail;
  const LaguerreDecomposition dec = stage("laguerre_coefficients", [&] {
    return laguerre_coefficients(p.dynamics, c, cfg.laguerre.z, cfg.laguerre.n, cfg.tolerances.integrator, opts);
  });
  const CostIntegral ci = stage("cost_oracle", [&] {
    return cost_oracle(p.dynamics, NuclearCost({c}), cfg.laguerre.z, cfg.tolerances.integrator,
                       cfg.tolerances.oracle_tail);
  });
  const VectorXd parseval = dec.partial_parseval();
  CsvWriter csv(out / "laguerre.csv", cfg.hash, {"n", "a_n", "partial_sum"});
  for (Index n = 0; n < dec.coefficients.size(); ++n) csv.row({static_cast<double>(n), dec.coefficients[n], parseval[n]});
  rep.doc["laguerre"] = {{"z", as_row(cfg.laguerre.z)},
                         {"observable", cfg.laguerre.observable},
                         {"horizon", dec.horizon},
                         {"cells", dec.cells},
                         {"nodes_per_cell", dec.nodes_per_cell},
                         {"tail_bound", dec.tail_bound},
                         {"parseval_sum", parseval[parseval.size() - 1]},
                         {"oracle_cost", ci.value},
                         {"parseval_gap", ci.value - parseval[parseval.size() - 1]}};
}

const char* command_name(Command c) {
  switch (c) {
    case Command::check: return "check";
    case Command::solve: return "solve";
    case Command::oracle: return "oracle";
    case Command::compare: return "compare";
    case Command::laguerre: return "laguerre";
  }
  return "";
}

}  // namespace

RunReport run(Command command, const ProblemConfig& cfg, const std::filesystem::path& out_dir, std::uint64_t seed) {
  std::filesystem::create_directories(out_dir);
  RunReport rep;
  rep.doc["command"] = command_name(command);
  rep.doc["config_hash"] = hex64(cfg.hash);
  rep.doc["seed"] = seed;
  rep.doc["system"] = cfg.system;
  rep.doc["dimension"] = cfg.problem.dynamics.dim_in();
  std::mt19937_64 rng(seed);
  Timer timer;

  switch (command) {
    case Command::check: run_check(cfg, rng, rep); break;
    case Command::solve: run_solve(cfg, out_dir, rep, timer); break;
    case Command::oracle: run_oracle(cfg, out_dir, rng, rep); break;
    case Command::compare: run_compare(cfg, out_dir, rng, rep, timer); break;
    case Command::laguerre: run_laguerre(cfg, out_dir, rep); break;
  }
  rep.doc["hypotheses_passed"] = rep.hypotheses_passed;
  std::ofstream(out_dir / "report.txt") << rep.text() << "\n";
  return rep;
}

}  // namespace klyap::cli
