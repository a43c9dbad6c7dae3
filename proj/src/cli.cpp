#include "conelab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <memory>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "conelab/config.hpp"
#include "conelab/errors.hpp"
#include "conelab/functionals.hpp"
#include "conelab/grids.hpp"
#include "conelab/needle.hpp"
#include "conelab/space.hpp"
#include "conelab/svg_plot.hpp"
#include "conelab/variational.hpp"

namespace conelab::cli {

namespace {

// Raised for option combinations CLI11 cannot express.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Options {
  std::string density;
  std::string density_file;
  std::string ensemble;
  std::string ensemble_file;
  std::string u;
  std::string u_file;
  std::optional<double> N;
  std::optional<double> p;
  std::optional<double> q;
  std::optional<double> lambda;
  std::string kind = "hpw";
  std::string format = "json";
  std::string plot;
  std::uint64_t seed = 0;

  double rel_tol = 1e-8;
  double abs_tol = 1e-12;

  double lambda_min = 1e-3;
  double lambda_max = 1e3;
  std::size_t lambda_count = 61;
  double threshold = kVerdictThreshold;

  double r_min = 1e-2;
  double r_max = 1e2;
  std::size_t r_count = 41;
  double cone_tol = kDefaultConeTolerance;

  std::size_t x0_points = 64;
  std::size_t x1_points = 64;
  std::size_t t_points = 32;
  std::optional<double> box;
  double mcp_tol = 1e-12;

  std::string init;
  std::string grid_type;
  std::optional<std::size_t> nodes;
  std::optional<double> grid_lo;
  std::optional<double> grid_hi;
  std::size_t max_iters = 20000;
  double tol = MinimizeOptions{}.tolerance;

  std::vector<double> weights;

  double K = 0.0;
  double t = 0.0;
  double theta = 0.0;
};

// ---------------------------------------------------------------------------
// JSON helpers

Json number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

Json estimate(double value, double error) { return Json{{"value", number(value)}, {"error", number(error)}}; }

Json exact(double value) { return Json{{"value", number(value)}, {"error", "exact"}}; }

Json exact_count(std::size_t value) { return Json{{"value", value}, {"error", "exact"}}; }

Json exact_array(const std::vector<double>& xs) {
  Json arr = Json::array();
  for (double x : xs) arr.push_back(number(x));
  return Json{{"value", arr}, {"error", "exact"}};
}

Json quad_json(const QuadratureConfig& q) {
  return Json{{"rel_tol", q.rel_tol}, {"abs_tol", q.abs_tol}};
}

std::string csv_number(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream o;
  o << std::setprecision(17) << x;
  return o.str();
}

struct Report {
  std::string command;
  Json config = Json::object();
  Json results = Json::object();
  std::uint64_t seed = 0;
};

void emit_json(const Report& r, std::ostream& out) {
  Json j;
  j["command"] = r.command;
  j["version"] = kVersion;
  j["seed"] = r.seed;
  j["config"] = r.config;
  j["results"] = r.results;
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Inputs

Json read_one(const std::string& inline_text, const std::string& path, const std::string& what) {
  if (!inline_text.empty() && !path.empty()) throw UsageError("give --" + what + " or --" + what + "-file, not both");
  if (!inline_text.empty()) return parse_document(inline_text);
  if (!path.empty()) return load_document(path);
  throw UsageError("missing --" + what + " or --" + what + "-file");
}

Density read_density(const Options& o) { return density_from_json(read_one(o.density, o.density_file, "density")); }

NeedleEnsemble read_ensemble(const Options& o) {
  return ensemble_from_json(read_one(o.ensemble, o.ensemble_file, "ensemble"));
}

double require_N(const Options& o) {
  if (!o.N) throw UsageError("missing --N");
  return *o.N;
}

CknParams read_params(const Options& o, double N) {
  if (!o.p || !o.q) throw UsageError("CKN needs --p and --q");
  return CknParams::make(*o.p, *o.q, N);
}

std::optional<CknParams> optional_params(const Options& o, double N) {
  if (!o.p && !o.q) return std::nullopt;
  return read_params(o, N);
}

// A test function from --u/--u-file, or the extremal at --lambda.
TestFunction read_test_function(const Options& o, const std::optional<CknParams>& params, bool ckn,
                                std::optional<double> default_lambda = std::nullopt) {
  const int sources = (!o.u.empty()) + (!o.u_file.empty()) + (o.lambda.has_value());
  if (sources > 1) throw UsageError("give exactly one of --u, --u-file, --lambda");
  if (!o.u.empty()) return test_function_from_json(parse_document(o.u), params);
  if (!o.u_file.empty()) return test_function_from_json(load_document(o.u_file), params);
  const std::optional<double> lambda = o.lambda ? o.lambda : default_lambda;
  if (!lambda) throw UsageError("give one of --u, --u-file, --lambda");
  if (!(*lambda > 0.0) || !std::isfinite(*lambda)) throw UsageError("--lambda must be positive");
  if (ckn) return ckn_extremal(*params, *lambda);
  return hpw_extremal(*lambda);
}

QuadratureConfig quad_config(const Options& o) {
  QuadratureConfig q;
  q.rel_tol = o.rel_tol;
  q.abs_tol = o.abs_tol;
  q.validate();
  return q;
}

std::vector<double> radii(const Options& o) {
  if (!(o.r_min > 0.0) || !(o.r_max >= o.r_min) || o.r_count < 1) {
    throw UsageError("radii need 0 < r-min <= r-max and r-count >= 1");
  }
  return log_spaced(o.r_min, o.r_max, o.r_count);
}

std::vector<double> lambdas(const Options& o) {
  if (!(o.lambda_min > 0.0) || !(o.lambda_max >= o.lambda_min) || o.lambda_count < 1) {
    throw UsageError("lambda grid needs 0 < lambda-min <= lambda-max and lambda-count >= 1");
  }
  return log_spaced(o.lambda_min, o.lambda_max, o.lambda_count);
}

FamilyKind family_kind(const Options& o) { return o.kind == "ckn" ? FamilyKind::Ckn : FamilyKind::Hpw; }

void require_json(const Options& o, const std::string& command) {
  if (o.format != "json") throw UsageError(command + " only writes JSON");
}

// ---------------------------------------------------------------------------
// Subcommands. Each fills the report and returns the exit code.

int cmd_check_mcp(const Options& o, Report& r) {
  require_json(o, r.command);
  const Density d = read_density(o);
  const double N = require_N(o);
  McpGrid grid{o.x0_points, o.x1_points, o.t_points, o.box};
  const auto rep = check_mcp_density(d, N, grid);
  const bool ok = rep.satisfied(o.mcp_tol);
  r.config = {{"density", density_to_json(d)},
              {"N", N},
              {"x0_points", o.x0_points},
              {"x1_points", o.x1_points},
              {"t_points", o.t_points},
              {"box", number(rep.box_end)},
              {"mcp_tol", o.mcp_tol}};
  r.results = {{"satisfied", ok},
               {"min_slack", exact(rep.min_slack)},
               {"argmin", {{"x0", exact(rep.argmin[0])}, {"x1", exact(rep.argmin[1])}, {"t", exact(rep.argmin[2])}}},
               {"scale", exact(rep.scale)},
               {"samples_tested", exact_count(rep.samples_tested)}};
  return ok ? kSuccess : kFinding;
}

int cmd_check_cone(const Options& o, Report& r) {
  require_json(o, r.command);
  const Density d = read_density(o);
  const double N = require_N(o);
  const auto rs = radii(o);
  const auto fit = cone_fit(d, N, rs, o.cone_tol);
  r.config = {{"density", density_to_json(d)},
              {"N", N},
              {"r_min", o.r_min},
              {"r_max", o.r_max},
              {"r_count", o.r_count},
              {"cone_tol", o.cone_tol}};
  r.results = {{"is_cone", fit.is_cone},
               {"A", exact(fit.A)},
               {"max_rel_deviation", exact(fit.max_rel_deviation)},
               {"tolerance", exact(fit.tolerance)}};
  return fit.is_cone ? kSuccess : kFinding;
}

int cmd_bg_profile(const Options& o, Report& r, std::ostream& out, bool& wrote) {
  const Density d = read_density(o);
  const double N = require_N(o);
  const auto rs = radii(o);
  const auto prof = bishop_gromov_profile(d, N, rs);
  r.config = {{"density", density_to_json(d)},
              {"N", N},
              {"r_min", o.r_min},
              {"r_max", o.r_max},
              {"r_count", o.r_count}};
  Json rows = Json::array();
  for (std::size_t i = 0; i < prof.radii.size(); ++i) {
    rows.push_back({{"radius", exact(prof.radii[i])}, {"ratio", exact(prof.ratios[i])}});
  }
  r.results = {{"monotone_nonincreasing", prof.monotone_nonincreasing}, {"profile", rows}};
  if (!o.plot.empty()) {
    PlotSpec spec{"Bishop-Gromov ratio", "radius", "m(B_r) / r^N", {{"ratio", prof.radii, prof.ratios}}};
    spec.draw_reference = false;
    write_svg(spec, o.plot);
  }
  if (o.format == "csv") {
    out << "radius,ratio\n";
    for (std::size_t i = 0; i < prof.radii.size(); ++i) {
      out << csv_number(prof.radii[i]) << ',' << csv_number(prof.ratios[i]) << '\n';
    }
    wrote = true;
  }
  return prof.monotone_nonincreasing ? kSuccess : kFinding;
}

int cmd_hpw(const Options& o, Report& r) {
  require_json(o, r.command);
  const Density d = read_density(o);
  const double N = require_N(o);
  const auto u = read_test_function(o, std::nullopt, false);
  const auto cfg = quad_config(o);
  const auto rep = hpw_report(d, N, u, cfg);
  r.config = {{"density", density_to_json(d)},
              {"N", N},
              {"u", test_function_to_json(u)},
              {"threshold", o.threshold},
              {"quadrature", quad_json(cfg)}};
  const bool violated = rep.slack < -std::max(o.threshold * rep.sharp_constant, rep.quotient_error);
  r.results = {{"dirichlet", estimate(rep.dirichlet, rep.dirichlet_error)},
               {"moment2", estimate(rep.moment2, rep.moment2_error)},
               {"mass", estimate(rep.mass, rep.mass_error)},
               {"quotient", estimate(rep.quotient, rep.quotient_error)},
               {"sharp_constant", exact(rep.sharp_constant)},
               {"slack", estimate(rep.slack, rep.quotient_error)},
               {"violated", violated}};
  return violated ? kFinding : kSuccess;
}

int cmd_ckn(const Options& o, Report& r) {
  require_json(o, r.command);
  const Density d = read_density(o);
  const CknParams params = read_params(o, require_N(o));
  const auto u = read_test_function(o, params, true);
  const auto cfg = quad_config(o);
  const auto rep = ckn_report(d, params, u, cfg);
  r.config = {{"density", density_to_json(d)},
              {"p", params.p},
              {"q", params.q},
              {"N", params.N},
              {"u", test_function_to_json(u)},
              {"threshold", o.threshold},
              {"quadrature", quad_json(cfg)}};
  const bool violated = rep.slack < -std::max(o.threshold * rep.sharp_constant, rep.quotient_error);
  r.results = {{"dirichlet", estimate(rep.dirichlet, rep.dirichlet_error)},
               {"singular_moment", estimate(rep.singular_moment, rep.singular_moment_error)},
               {"ckn_mass", estimate(rep.ckn_mass, rep.ckn_mass_error)},
               {"quotient", estimate(rep.quotient, rep.quotient_error)},
               {"sharp_constant", exact(rep.sharp_constant)},
               {"slack", estimate(rep.slack, rep.quotient_error)},
               {"violated", violated}};
  return violated ? kFinding : kSuccess;
}

int cmd_scan(const Options& o, Report& r, std::ostream& out, bool& wrote) {
  const Density d = read_density(o);
  const FamilyKind kind = family_kind(o);
  const double N = require_N(o);
  std::optional<CknParams> params;
  if (kind == FamilyKind::Ckn) params = read_params(o, N);
  const auto ls = lambdas(o);
  const auto cfg = quad_config(o);
  const auto scan = family_scan(d, N, params, kind, ls, cfg);

  r.config = {{"density", density_to_json(d)}, {"kind", to_string(kind)}, {"N", N}};
  if (params) {
    r.config["p"] = params->p;
    r.config["q"] = params->q;
  }
  r.config["lambda_min"] = o.lambda_min;
  r.config["lambda_max"] = o.lambda_max;
  r.config["lambda_count"] = o.lambda_count;
  r.config["threshold"] = o.threshold;
  r.config["quadrature"] = quad_json(cfg);

  const auto it = std::find(scan.lambdas.begin(), scan.lambdas.end(), scan.argmin_lambda);
  const std::size_t imin = static_cast<std::size_t>(it - scan.lambdas.begin());
  const bool negative = scan.min_value < -o.threshold;
  Json rows = Json::array();
  for (std::size_t i = 0; i < scan.lambdas.size(); ++i) {
    rows.push_back({{"lambda", exact(scan.lambdas[i])}, {"slack", estimate(scan.slacks[i], scan.slack_errors[i])}});
  }
  r.results = {{"rows", rows},
               {"min_value", estimate(scan.min_value, scan.slack_errors[imin])},
               {"argmin_lambda", exact(scan.argmin_lambda)},
               {"negative_slack_found", negative}};

  if (!o.plot.empty()) {
    PlotSpec spec{to_string(kind) + " family slack", "lambda", "slack", {{"slack", scan.lambdas, scan.slacks}}};
    write_svg(spec, o.plot);
  }
  if (o.format == "csv") {
    out << "lambda,slack,slack_error\n";
    for (std::size_t i = 0; i < scan.lambdas.size(); ++i) {
      out << csv_number(scan.lambdas[i]) << ',' << csv_number(scan.slacks[i]) << ','
          << csv_number(scan.slack_errors[i]) << '\n';
    }
    wrote = true;
  }
  return negative ? kFinding : kSuccess;
}

GridFunction minimize_init(const Options& o, FamilyKind kind, Json& cfg) {
  const bool ckn = kind == FamilyKind::Ckn;
  std::string init = o.init.empty() ? (ckn ? "random" : "tent") : o.init;
  if (init.front() == '{') {
    const auto u = test_function_from_json(parse_document(init), std::nullopt);
    if (!std::holds_alternative<GridFunction>(u)) throw UsageError("--init must be a grid function");
    cfg["init"] = test_function_to_json(u);
    return std::get<GridFunction>(u);
  }
  if (init != "tent" && init != "random") throw UsageError("--init must be tent, random or a grid function");
  const std::string grid = o.grid_type.empty() ? (ckn ? "geometric" : "uniform") : o.grid_type;
  std::vector<double> nodes;
  Json g;
  if (grid == "uniform") {
    const std::size_t n = o.nodes.value_or(161);
    const double hi = o.grid_hi.value_or(4.0);
    if (o.grid_lo) throw UsageError("--grid-lo applies to geometric grids only");
    if (!(hi > 0.0) || n < 3) throw UsageError("uniform grid needs --grid-hi > 0 and --nodes >= 3");
    nodes = linspace(0.0, hi, n);
    g = {{"type", grid}, {"nodes", n}, {"hi", hi}};
  } else {
    const std::size_t n = o.nodes.value_or(120);
    const double lo = o.grid_lo.value_or(1e-3);
    const double hi = o.grid_hi.value_or(1e3);
    if (!(lo > 0.0) || !(hi > lo) || n < 3) throw UsageError("geometric grid needs 0 < --grid-lo < --grid-hi, --nodes >= 3");
    nodes = geometric_grid(lo, hi, n);
    g = {{"type", grid}, {"nodes", n}, {"lo", lo}, {"hi", hi}};
  }
  cfg["init"] = init;
  cfg["grid"] = g;
  if (init == "tent") return tent_function(std::move(nodes));
  std::mt19937_64 rng(o.seed);
  return random_positive_grid_function(rng, std::move(nodes));
}

int cmd_minimize(const Options& o, Report& r) {
  require_json(o, r.command);
  const Density d = read_density(o);
  const FamilyKind kind = family_kind(o);
  const double N = require_N(o);
  std::optional<CknParams> params;
  if (kind == FamilyKind::Ckn) params = read_params(o, N);
  if (!(o.tol > 0.0)) throw UsageError("--tol must be positive");

  r.config = {{"density", density_to_json(d)}, {"kind", to_string(kind)}, {"N", N}};
  if (params) {
    r.config["p"] = params->p;
    r.config["q"] = params->q;
  }
  const GridFunction init = minimize_init(o, kind, r.config);
  MinimizeOptions opt;
  opt.max_iters = o.max_iters;
  opt.tolerance = o.tol;
  r.config["max_iters"] = opt.max_iters;
  r.config["tol"] = opt.tolerance;
  r.config["memory"] = opt.memory;
  r.config["armijo"] = opt.armijo;
  r.config["backtrack"] = opt.backtrack;

  const auto res = minimize_quotient(d, N, params, kind == FamilyKind::Ckn ? QuotientKind::Ckn : QuotientKind::Hpw,
                                     init, opt);
  const double gap = res.quotient - res.sharp_constant;
  const bool below = gap < -std::max(1e-6 * res.sharp_constant, res.quotient_error);

  // At most 200 trace entries, always keeping the last.
  std::vector<double> trace_iter;
  std::vector<double> trace_value;
  const std::size_t stride = std::max<std::size_t>(1, (res.trace.size() + 199) / 200);
  for (std::size_t i = 0; i < res.trace.size(); i += stride) {
    trace_iter.push_back(static_cast<double>(i + 1));
    trace_value.push_back(res.trace[i]);
  }
  if (!res.trace.empty() && trace_iter.back() != static_cast<double>(res.trace.size())) {
    trace_iter.push_back(static_cast<double>(res.trace.size()));
    trace_value.push_back(res.trace.back());
  }

  r.results = {{"quotient", estimate(res.quotient, res.quotient_error)},
               {"discrete_quotient", estimate(res.discrete_quotient, std::abs(res.discrete_quotient - res.quotient))},
               {"sharp_constant", exact(res.sharp_constant)},
               {"gap", estimate(gap, res.quotient_error)},
               {"below_sharp_constant", below},
               {"converged", res.converged},
               {"stop_reason", to_string(res.stop_reason)},
               {"stationarity", exact(res.stationarity)},
               {"iterations", exact_count(res.iterations)},
               {"trace", {{"iteration", exact_array(trace_iter)}, {"quotient", exact_array(trace_value)}}},
               {"u", {{"nodes", exact_array(res.u.nodes)}, {"values", exact_array(res.u.values)}}}};

  if (!o.plot.empty()) {
    PlotSpec spec{to_string(kind) + " quotient minimization", "iteration", "quotient", {{"quotient", trace_iter, trace_value}}};
    spec.reference = res.sharp_constant;
    write_svg(spec, o.plot);
  }
  if (below) return kFinding;
  return res.converged ? kSuccess : kNumerical;
}

Json scan_summary(const FamilyScanResult& s) {
  const auto it = std::find(s.lambdas.begin(), s.lambdas.end(), s.argmin_lambda);
  const std::size_t i = static_cast<std::size_t>(it - s.lambdas.begin());
  return {{"kind", to_string(s.kind)},
          {"min_value", estimate(s.min_value, s.slack_errors[i])},
          {"argmin_lambda", exact(s.argmin_lambda)}};
}

int cmd_verdict(const Options& o, Report& r) {
  require_json(o, r.command);
  const Density d = read_density(o);
  const double N = require_N(o);
  const auto params = optional_params(o, N);
  VerdictConfig cfg;
  cfg.mcp_grid = McpGrid{o.x0_points, o.x1_points, o.t_points, o.box};
  cfg.mcp_rel_tol = o.mcp_tol;
  cfg.cone_radii = radii(o);
  cfg.cone_tolerance = o.cone_tol;
  cfg.lambdas = lambdas(o);
  cfg.threshold = o.threshold;
  cfg.quad = quad_config(o);

  r.config = {{"density", density_to_json(d)}, {"N", N}};
  if (params) {
    r.config["p"] = params->p;
    r.config["q"] = params->q;
  }
  r.config["x0_points"] = o.x0_points;
  r.config["x1_points"] = o.x1_points;
  r.config["t_points"] = o.t_points;
  r.config["mcp_tol"] = o.mcp_tol;
  r.config["r_min"] = o.r_min;
  r.config["r_max"] = o.r_max;
  r.config["r_count"] = o.r_count;
  r.config["cone_tol"] = o.cone_tol;
  r.config["lambda_min"] = o.lambda_min;
  r.config["lambda_max"] = o.lambda_max;
  r.config["lambda_count"] = o.lambda_count;
  r.config["threshold"] = o.threshold;
  r.config["quadrature"] = quad_json(cfg.quad);

  try {
    const Verdict v = rigidity_verdict(d, N, params, cfg);
    Json res;
    if (v.is_cone()) {
      res["variant"] = "Cone";
      res["A"] = exact(std::get<ConeVerdict>(v.outcome).A);
    } else {
      const auto& w = std::get<NonConeWitness>(v.outcome);
      res["variant"] = "NonConeWitness";
      res["kind"] = to_string(w.kind);
      res["lambda"] = exact(w.lambda);
      const auto& scan = w.kind == FamilyKind::Hpw ? v.hpw_scan : *v.ckn_scan;
      res["slack"] = scan_summary(scan)["min_value"];
    }
    res["mcp"] = {{"min_slack", exact(v.mcp.min_slack)}, {"samples_tested", exact_count(v.mcp.samples_tested)}};
    res["cone_fit"] = {{"is_cone", v.cone.is_cone},
                       {"A", exact(v.cone.A)},
                       {"max_rel_deviation", exact(v.cone.max_rel_deviation)}};
    res["hpw_scan"] = scan_summary(v.hpw_scan);
    if (v.ckn_scan) res["ckn_scan"] = scan_summary(*v.ckn_scan);
    r.results = res;
    return v.is_cone() ? kSuccess : kFinding;
  } catch (const PreconditionError& e) {
    const auto mcp = check_mcp_density(d, N, cfg.mcp_grid);
    r.results = {{"variant", "Refused"},
                 {"reason", e.what()},
                 {"mcp",
                  {{"min_slack", exact(mcp.min_slack)},
                   {"argmin", {{"x0", exact(mcp.argmin[0])}, {"x1", exact(mcp.argmin[1])}, {"t", exact(mcp.argmin[2])}}},
                   {"samples_tested", exact_count(mcp.samples_tested)}}}};
    return kFinding;
  }
}

int cmd_needle_verify(const Options& o, Report& r) {
  require_json(o, r.command);
  const NeedleEnsemble e = read_ensemble(o);
  const auto rs = radii(o);
  std::optional<std::vector<double>> weights;
  if (!o.weights.empty()) weights = o.weights;
  const auto u = read_test_function(o, std::nullopt, false, 1.0);
  const auto cfg = quad_config(o);
  const auto dis = verify_disintegration(e, rs, weights);
  const auto rw = reweight(e, u, rs, cfg);

  r.config = {{"ensemble", ensemble_to_json(e)},
              {"u", test_function_to_json(u)},
              {"r_min", o.r_min},
              {"r_max", o.r_max},
              {"r_count", o.r_count},
              {"quadrature", quad_json(cfg)}};
  if (weights) r.config["weights"] = *weights;

  // Errors of the reweighting quantities follow from the quadrature tolerance.
  const double rel = cfg.rel_tol;
  Json rays = Json::array();
  for (std::size_t i = 0; i < e.rays.size(); ++i) {
    rays.push_back({{"C", estimate(rw.C[i], rel * rw.C[i])},
                    {"tilde_q", estimate(rw.tilde_q[i], rel * rw.tilde_q[i])},
                    {"normalized_moment", estimate(rw.normalized_moment[i], 2.0 * rel * rw.normalized_moment[i])}});
  }
  Json dropped = Json::array();
  for (auto i : rw.dropped) dropped.push_back(i);
  const bool dis_ok = dis.max_rel_deviation <= 1e-12;
  const bool rw_ok = rw.max_moment_deviation <= 1e-8 && rw.total_rel_deviation <= 1e-8 &&
                     rw.reassembly_rel_deviation <= 1e-8;
  r.results = {{"disintegration_max_rel_deviation", exact(dis.max_rel_deviation)},
               {"disintegration_ok", dis_ok},
               {"rays", rays},
               {"dropped", dropped},
               {"tilde_q_total", estimate(rw.tilde_q_total, rel * rw.tilde_q_total)},
               {"total_moment", estimate(rw.total_moment, rel * rw.total_moment)},
               {"max_moment_deviation", estimate(rw.max_moment_deviation, 2.0 * rel)},
               {"total_rel_deviation", estimate(rw.total_rel_deviation, 2.0 * rel)},
               {"reassembly_rel_deviation", exact(rw.reassembly_rel_deviation)},
               {"reweighting_ok", rw_ok}};
  return dis_ok && rw_ok ? kSuccess : kFinding;
}

int cmd_needle_aggregate(const Options& o, Report& r) {
  require_json(o, r.command);
  const NeedleEnsemble e = read_ensemble(o);
  const FamilyKind kind = family_kind(o);
  const auto cfg = quad_config(o);
  constexpr double kChainTolerance = 1e-9;
  r.config = {{"ensemble", ensemble_to_json(e)}, {"kind", to_string(kind)}};

  if (kind == FamilyKind::Hpw) {
    const auto u = read_test_function(o, std::nullopt, false, 1.0);
    r.config["u"] = test_function_to_json(u);
    r.config["chain_tolerance"] = kChainTolerance;
    r.config["quadrature"] = quad_json(cfg);
    const auto rep = aggregate_hpw(e, u, cfg);
    const double sharp = e.N * e.N / 4.0;
    const double tol = kChainTolerance * std::max(1.0, sharp);
    // Quotient-form slacks carry four quadratures: D, C and M0 twice.
    const double rel = 4.0 * cfg.rel_tol;
    bool ok = true;
    Json rays = Json::array();
    for (std::size_t i = 0; i < e.rays.size(); ++i) {
      rays.push_back({{"slack", estimate(rep.ray_slack[i], rel * (rep.ray_slack[i] + sharp))},
                      {"reweighted_slack", estimate(rep.reweighted_slack[i], rel * std::abs(rep.reweighted_slack[i]) + rel)}});
      ok = ok && rep.ray_slack[i] >= -tol && rep.reweighted_slack[i] >= -tol;
    }
    ok = ok && rep.integrated_slack >= -tol && rep.cauchy_schwarz_slack >= -tol && rep.final_slack >= -tol;
    Json dropped = Json::array();
    for (auto i : rep.dropped) dropped.push_back(i);
    r.results = {{"rays", rays},
                 {"dropped", dropped},
                 {"integrated_slack", estimate(rep.integrated_slack, rel * (std::abs(rep.integrated_slack) + sharp))},
                 {"cauchy_schwarz_slack", estimate(rep.cauchy_schwarz_slack, rel * (std::abs(rep.cauchy_schwarz_slack) + 1.0))},
                 {"final_slack", estimate(rep.final_slack, rel * (rep.final_slack + sharp))},
                 {"chain_identity_residual", exact(rep.chain_identity_residual)},
                 {"chain_ok", ok}};
    return ok ? kSuccess : kFinding;
  }

  const CknParams params = read_params(o, e.N);
  const auto u = read_test_function(o, params, true, 1.0);
  r.config["p"] = params.p;
  r.config["q"] = params.q;
  r.config["u"] = test_function_to_json(u);
  r.config["chain_tolerance"] = kChainTolerance;
  r.config["quadrature"] = quad_json(cfg);
  bool ok = true;
  Json rays = Json::array();
  for (const auto& ray : e.rays) {
    const auto c = ray_ckn_check(ray, e.N, params, u, cfg);
    rays.push_back({{"lhs", estimate(c.lhs, c.error)},
                    {"middle", estimate(c.middle, c.error)},
                    {"rhs", estimate(c.rhs, c.error)},
                    {"slack", estimate(c.slack, c.error)},
                    {"first_slack", estimate(c.first_slack, c.error)},
                    {"second_slack", estimate(c.second_slack, c.error)}});
    ok = ok && c.slack >= -kChainTolerance * std::max(1.0, c.rhs);
  }
  r.results = {{"rays", rays}, {"chain_ok", ok}};
  return ok ? kSuccess : kFinding;
}

int cmd_distortion(const Options& o, Report& r) {
  require_json(o, r.command);
  const double N = require_N(o);
  DistortionInput in{o.K, N, o.t, o.theta};
  in.validate();
  r.config = {{"K", o.K}, {"N", N}, {"t", o.t}, {"theta", o.theta}};
  r.results = {{"sigma", exact(sigma(in))}};
  if (N >= 1.0) r.results["tau"] = exact(tau(in));
  return kSuccess;
}

// ---------------------------------------------------------------------------

void add_density(CLI::App* sub, Options& o) {
  sub->add_option("--density", o.density, "Density as an inline JSON document");
  sub->add_option("--density-file", o.density_file, "Density JSON file");
}

void add_ensemble(CLI::App* sub, Options& o) {
  sub->add_option("--ensemble", o.ensemble, "Ray ensemble as an inline JSON document");
  sub->add_option("--ensemble-file", o.ensemble_file, "Ray ensemble JSON file");
}

void add_test_function(CLI::App* sub, Options& o) {
  sub->add_option("--u", o.u, "Test function as an inline JSON document");
  sub->add_option("--u-file", o.u_file, "Test function JSON file");
  sub->add_option("--lambda", o.lambda, "Use the extremal at this lambda");
}

void add_ckn(CLI::App* sub, Options& o) {
  sub->add_option("--p", o.p, "CKN exponent p");
  sub->add_option("--q", o.q, "CKN weight exponent q");
}

void add_kind(CLI::App* sub, Options& o) {
  sub->add_option("--kind", o.kind, "hpw or ckn")->check(CLI::IsMember({"hpw", "ckn"}))->capture_default_str();
}

void add_common(CLI::App* sub, Options& o, bool csv) {
  auto* fmt = sub->add_option("--format", o.format, "Output format")->capture_default_str();
  if (csv) {
    fmt->check(CLI::IsMember({"json", "csv"}));
  } else {
    fmt->check(CLI::IsMember({"json"}));
  }
  sub->add_option("--seed", o.seed, "Random seed")->capture_default_str();
}

void add_quad(CLI::App* sub, Options& o) {
  sub->add_option("--rel-tol", o.rel_tol, "Quadrature relative tolerance")->capture_default_str();
  sub->add_option("--abs-tol", o.abs_tol, "Quadrature absolute tolerance")->capture_default_str();
}

void add_radii(CLI::App* sub, Options& o) {
  sub->add_option("--r-min", o.r_min, "Smallest radius")->capture_default_str();
  sub->add_option("--r-max", o.r_max, "Largest radius")->capture_default_str();
  sub->add_option("--r-count", o.r_count, "Number of log-spaced radii")->capture_default_str();
}

void add_lambdas(CLI::App* sub, Options& o) {
  sub->add_option("--lambda-min", o.lambda_min, "Smallest lambda")->capture_default_str();
  sub->add_option("--lambda-max", o.lambda_max, "Largest lambda")->capture_default_str();
  sub->add_option("--lambda-count", o.lambda_count, "Number of log-spaced lambdas")->capture_default_str();
  sub->add_option("--threshold", o.threshold, "Negative-slack threshold")->capture_default_str();
}

void add_mcp(CLI::App* sub, Options& o) {
  sub->add_option("--x0-points", o.x0_points, "MCP grid points in x0")->capture_default_str();
  sub->add_option("--x1-points", o.x1_points, "MCP grid points in x1")->capture_default_str();
  sub->add_option("--t-points", o.t_points, "MCP grid points in t")->capture_default_str();
  sub->add_option("--box", o.box, "MCP sample box end (default min(support, 20))");
  sub->add_option("--mcp-tol", o.mcp_tol, "Relative MCP tolerance")->capture_default_str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Volume-cone rigidity checks for HPW and CKN inequalities on needles", "conelab"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  struct Entry {
    CLI::App* app;
    std::string name;
  };
  std::vector<Entry> subs;
  auto add = [&](const std::string& name, const std::string& desc) {
    CLI::App* s = app.add_subcommand(name, desc);
    subs.push_back({s, name});
    return s;
  };

  auto* s_mcp = add("check-mcp", "Sampled MCP(0,N) density inequality");
  add_density(s_mcp, o);
  s_mcp->add_option("--N", o.N, "Dimension parameter");
  add_mcp(s_mcp, o);
  add_common(s_mcp, o, false);

  auto* s_cone = add("check-cone", "Volume-cone fit m(B_r) = A omega_N r^N");
  add_density(s_cone, o);
  s_cone->add_option("--N", o.N, "Dimension parameter");
  add_radii(s_cone, o);
  s_cone->add_option("--cone-tol", o.cone_tol, "Relative cone tolerance")->capture_default_str();
  add_common(s_cone, o, false);

  auto* s_bg = add("bg-profile", "Bishop-Gromov ratio m(B_r)/r^N");
  add_density(s_bg, o);
  s_bg->add_option("--N", o.N, "Dimension parameter");
  add_radii(s_bg, o);
  s_bg->add_option("--plot", o.plot, "Write an SVG plot to this path");
  add_common(s_bg, o, true);

  auto* s_hpw = add("hpw", "HPW quotient of a test function");
  add_density(s_hpw, o);
  s_hpw->add_option("--N", o.N, "Dimension parameter");
  add_test_function(s_hpw, o);
  s_hpw->add_option("--threshold", o.threshold, "Relative violation threshold")->capture_default_str();
  add_quad(s_hpw, o);
  add_common(s_hpw, o, false);

  auto* s_ckn = add("ckn", "CKN quotient of a test function");
  add_density(s_ckn, o);
  s_ckn->add_option("--N", o.N, "Dimension parameter");
  add_ckn(s_ckn, o);
  add_test_function(s_ckn, o);
  s_ckn->add_option("--threshold", o.threshold, "Relative violation threshold")->capture_default_str();
  add_quad(s_ckn, o);
  add_common(s_ckn, o, false);

  auto* s_scan = add("scan", "Extremal-family slack over a lambda grid");
  add_density(s_scan, o);
  add_kind(s_scan, o);
  s_scan->add_option("--N", o.N, "Dimension parameter");
  add_ckn(s_scan, o);
  add_lambdas(s_scan, o);
  add_quad(s_scan, o);
  s_scan->add_option("--plot", o.plot, "Write an SVG plot to this path");
  add_common(s_scan, o, true);

  auto* s_min = add("minimize", "Minimize the HPW or CKN quotient over grid functions");
  add_density(s_min, o);
  add_kind(s_min, o);
  s_min->add_option("--N", o.N, "Dimension parameter");
  add_ckn(s_min, o);
  s_min->add_option("--init", o.init, "tent, random, or a grid function JSON document");
  s_min->add_option("--grid", o.grid_type, "uniform or geometric")->check(CLI::IsMember({"uniform", "geometric"}));
  s_min->add_option("--nodes", o.nodes, "Number of grid nodes");
  s_min->add_option("--grid-lo", o.grid_lo, "First positive node of a geometric grid");
  s_min->add_option("--grid-hi", o.grid_hi, "Last node");
  s_min->add_option("--max-iters", o.max_iters, "Iteration budget")->capture_default_str();
  s_min->add_option("--tol", o.tol, "Stationarity tolerance |grad log Q| |v|")->capture_default_str();
  s_min->add_option("--plot", o.plot, "Write an SVG plot to this path");
  add_common(s_min, o, false);

  auto* s_verdict = add("verdict", "Cone / non-cone rigidity verdict");
  add_density(s_verdict, o);
  s_verdict->add_option("--N", o.N, "Dimension parameter");
  add_ckn(s_verdict, o);
  add_mcp(s_verdict, o);
  add_radii(s_verdict, o);
  s_verdict->add_option("--cone-tol", o.cone_tol, "Relative cone tolerance")->capture_default_str();
  add_lambdas(s_verdict, o);
  add_quad(s_verdict, o);
  add_common(s_verdict, o, false);

  auto* s_nv = add("needle-verify", "Disintegration and reweighting identities on a ray ensemble");
  add_ensemble(s_nv, o);
  add_test_function(s_nv, o);
  add_radii(s_nv, o);
  s_nv->add_option("--weights", o.weights, "Per-ray weights replacing q in the disintegration sum");
  add_quad(s_nv, o);
  add_common(s_nv, o, false);

  auto* s_na = add("needle-aggregate", "HPW aggregation chain or per-ray CKN check on a ray ensemble");
  add_ensemble(s_na, o);
  add_kind(s_na, o);
  add_ckn(s_na, o);
  add_test_function(s_na, o);
  add_quad(s_na, o);
  add_common(s_na, o, false);

  auto* s_dist = add("distortion", "Distortion coefficients sigma and tau");
  s_dist->add_option("--K", o.K, "Curvature")->required();
  s_dist->add_option("--N", o.N, "Dimension")->required();
  s_dist->add_option("--t", o.t, "Interpolation parameter in [0,1]")->required();
  s_dist->add_option("--theta", o.theta, "Distance")->required();
  add_common(s_dist, o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kUsage;
  }

  Report report;
  report.seed = o.seed;
  std::string name;
  for (const auto& s : subs) {
    if (s.app->parsed()) name = s.name;
  }
  report.command = name;

  bool wrote = false;
  int code = kSuccess;
  std::ostringstream buffer;
  try {
    if (name == "check-mcp") code = cmd_check_mcp(o, report);
    else if (name == "check-cone") code = cmd_check_cone(o, report);
    else if (name == "bg-profile") code = cmd_bg_profile(o, report, buffer, wrote);
    else if (name == "hpw") code = cmd_hpw(o, report);
    else if (name == "ckn") code = cmd_ckn(o, report);
    else if (name == "scan") code = cmd_scan(o, report, buffer, wrote);
    else if (name == "minimize") code = cmd_minimize(o, report);
    else if (name == "verdict") code = cmd_verdict(o, report);
    else if (name == "needle-verify") code = cmd_needle_verify(o, report);
    else if (name == "needle-aggregate") code = cmd_needle_aggregate(o, report);
    else if (name == "distortion") code = cmd_distortion(o, report);
  } catch (const UsageError& e) {
    err << "conelab " << name << ": " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    err << "conelab " << name << ": " << e.what() << '\n';
    return kUsage;
  } catch (const DegenerateError& e) {
    err << "conelab " << name << ": " << e.what() << '\n';
    return kNumerical;
  } catch (const DomainError& e) {
    err << "conelab " << name << ": " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "conelab " << name << ": " << e.what() << '\n';
    return kUsage;
  } catch (const InconsistencyError& e) {
    err << "conelab " << name << ": inconsistent diagnostics: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    err << "conelab " << name << ": numerical failure: " << e.what() << '\n';
    return kNumerical;
  }

  if (wrote) {
    out << buffer.str();
  } else {
    emit_json(report, out);
  }
  if (code == kNumerical) err << "conelab " << name << ": did not converge (report written with trace)\n";
  return code;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("conelab");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace conelab::cli
