#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "klyap/basis.hpp"
#include "klyap/flow.hpp"
#include "klyap/gramian.hpp"
#include "klyap/model.hpp"
#include "klyap/quadrature.hpp"

namespace klyap::cli {

/// Raised for malformed or inconsistent configuration text.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Any failure inside a pipeline stage, prefixed with the stage name.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct BasisConfig {
  Basis1D::Kind kind = Basis1D::Kind::legendre;
  std::vector<int> degree;       ///< per dimension
  std::vector<int> breakpoints;  ///< per dimension, splines only
  bool equilibrium_vanishing = true;
  std::optional<int> max_index_sum;
  double drop_tol = 1e-12;
};

struct QuadratureConfig {
  std::vector<int> nodes;  ///< Gauss points per dimension (Legendre bases)
  int per_cell = 0;        ///< Gauss points per knot cell (spline bases)
  bool normalize_measure = true;
};

struct Tolerances {
  IntegratorConfig integrator;
  double oracle_tail = 1e-10;
  double laguerre_tail = 1e-12;
  double trunc = 1e-14;
  double boundary = 1e-12;
  double decay_violation = 1e-6;
};

struct CheckConfig {
  int face_points = 41;
  int omega_grid = 41;
  int trajectories = 20;
  double horizon = 10.0;
  int samples = 50;
};

struct CompareConfig {
  int grid = 50;
  int random_points = 100;
  VectorXd lower, upper;  ///< sampling box, defaults to the domain
  double interior_scale = 0.9;
  double exclude_radius = 0.1;
  std::string reference = "auto";  ///< auto | analytic | oracle
};

struct LaguerreConfig {
  VectorXd z;
  int n = 40;
  int observable = 0;
};

/// Fully validated configuration with defaults applied.
struct ProblemConfig {
  std::string system;  ///< builtin name, or "custom"
  SystemParams params;
  Problem problem;
  BasisConfig basis;
  QuadratureConfig quadrature;
  Tolerances tolerances;
  CheckConfig check;
  CompareConfig compare;
  std::vector<VectorXd> oracle_points;
  int oracle_random_points = 10;
  LaguerreConfig laguerre;
  int eigenfunctions = 5;  ///< eigenfunction grids written by solve
  std::string output_dir = "out";
  std::uint64_t hash = 0;  ///< FNV-1a of the configuration text
};

/// Parses the configuration grammar:
///
///   # comment
///   system = linear2d
///   [basis]
///   degree = 11
///   basis.drop_tol = 1e-12      (dotted keys work in any section)
///
/// Values beginning with '[', '{' or '"' are JSON. Polynomials are lists of
/// {"coeff": c, "exponents": [...]}; vector fields and cost lists are lists
/// of such lists.
ProblemConfig parse_config(const std::string& text);
ProblemConfig load_config(const std::filesystem::path& path);

/// Config text reproducing a problem with explicit polynomial lists.
std::string serialize_problem(const Problem& problem);

nlohmann::json polynomial_to_json(const PolynomialMap& scalar);
PolynomialMap polynomial_from_json(const nlohmann::json& terms, Index dim);

std::uint64_t fnv1a(const std::string& text);

/// Every stage from basis construction to the sum-of-squares value.
struct Discretization {
  std::shared_ptr<const OrthonormalBasis> onb;
  GeneratorMatrix generator;
  ObservationMatrix observation;
  GramianSolution gramian;
  std::optional<SumOfSquares> sos;
};

TensorBasis build_basis(const ProblemConfig& cfg);
TensorGrid build_grid(const ProblemConfig& cfg);
Discretization discretize(const ProblemConfig& cfg);

/// v(z) = zᵀXz for linear dynamics with linear observables; nullopt otherwise.
std::optional<MatrixXd> analytic_quadratic_value(const Problem& problem);

enum class Command { check, solve, oracle, compare, laguerre };
Command parse_command(const std::string& name);

struct RunReport {
  nlohmann::json doc;
  bool hypotheses_passed = true;

  int exit_code() const { return hypotheses_passed ? 0 : 2; }
  /// Pretty-printed JSON, keys in sorted order.
  std::string text() const { return doc.dump(2); }
};

/// Runs one subcommand, writing CSV files and report.txt into out_dir.
RunReport run(Command command, const ProblemConfig& cfg, const std::filesystem::path& out_dir, std::uint64_t seed);

}  // namespace klyap::cli
