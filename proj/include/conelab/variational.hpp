#pragma once

// Family scans over lambda, quotient gradients and minimization, and the
// cone / non-cone rigidity verdict.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "conelab/functionals.hpp"
#include "conelab/grid_quadrature.hpp"
#include "conelab/space.hpp"

namespace conelab {

enum class FamilyKind { Hpw, Ckn };

std::string to_string(FamilyKind k);

// 61 log-spaced points in [1e-3, 1e3].
std::vector<double> default_lambda_grid();

inline constexpr double kVerdictThreshold = 1e-6;

struct FamilyScanResult {
  FamilyKind kind = FamilyKind::Hpw;
  std::vector<double> lambdas;
  std::vector<double> slacks;
  std::vector<double> slack_errors;
  double min_value = 0.0;
  double argmin_lambda = 0.0;
};

// HPW needs N; CKN uses params.
FamilyScanResult family_scan(const Density& d, double N, const std::optional<CknParams>& params, FamilyKind kind,
                             const std::vector<double>& lambdas, const QuadratureConfig& cfg = {});

// Gradient of log Q with respect to every nodal value except the last.
std::vector<double> quotient_gradient(const Density& d, const std::optional<CknParams>& params,
                                      const GridFunction& u, QuotientKind kind);

struct MinimizeOptions {
  std::size_t max_iters = 5000;
  // Stop when |grad log Q| * |v| <= tolerance.
  double tolerance = 1e-4;
  std::size_t memory = 8;
  double armijo = 1e-4;
  double backtrack = 0.5;
};

enum class StopReason { Tolerance, MaxIterations, LineSearch };

std::string to_string(StopReason r);

struct MinimizeResult {
  GridFunction u;
  double quotient = 0.0;           // adaptive quadrature on the best iterate
  double quotient_error = 0.0;
  double discrete_quotient = 0.0;  // fixed-rule value driving the search
  double sharp_constant = 0.0;
  double stationarity = 0.0;
  bool converged = false;
  StopReason stop_reason = StopReason::MaxIterations;
  std::size_t iterations = 0;
  std::vector<double> trace;  // discrete quotient after each accepted step
};

// L-BFGS on log Q with Armijo backtracking; every iterate is projected back
// onto the normalization set (normalizer = 1).
MinimizeResult minimize_quotient(const Density& d, double N, const std::optional<CknParams>& params,
                                 QuotientKind kind, const GridFunction& init, const MinimizeOptions& opt = {});

// ---------------------------------------------------------------------------

struct ConeVerdict {
  double A = 0.0;
};

struct NonConeWitness {
  double lambda = 0.0;
  double slack = 0.0;
  FamilyKind kind = FamilyKind::Hpw;
};

struct VerdictConfig {
  McpGrid mcp_grid{};
  double mcp_rel_tol = 1e-12;
  std::vector<double> cone_radii = default_cone_radii();
  double cone_tolerance = kDefaultConeTolerance;
  std::vector<double> lambdas = default_lambda_grid();
  double threshold = kVerdictThreshold;
  QuadratureConfig quad{};
};

struct Verdict {
  std::variant<ConeVerdict, NonConeWitness> outcome;
  McpSlackReport mcp;
  ConeFit cone;
  FamilyScanResult hpw_scan;
  std::optional<FamilyScanResult> ckn_scan;

  bool is_cone() const { return std::holds_alternative<ConeVerdict>(outcome); }
};

// Throws PreconditionError when d fails the MCP(0,N) check and
// InconsistencyError when cone_fit and the slack scans disagree.
Verdict rigidity_verdict(const Density& d, double N, const std::optional<CknParams>& params,
                         const VerdictConfig& cfg = {});

}  // namespace conelab
