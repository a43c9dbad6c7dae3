#include "conelab/variational.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <exception>
#include <future>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "conelab/errors.hpp"
#include "conelab/grids.hpp"

namespace conelab {

std::string to_string(FamilyKind k) { return k == FamilyKind::Hpw ? "HPW" : "CKN"; }

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::Tolerance:
      return "tolerance";
    case StopReason::MaxIterations:
      return "max_iters";
    case StopReason::LineSearch:
      return "line_search";
  }
  return "unknown";
}

std::vector<double> default_lambda_grid() { return log_spaced(1e-3, 1e3, 61); }

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

template <class E>
[[noreturn]] void rethrow_with_lambda(const E& e, double lambda) {
  std::ostringstream msg;
  msg << "lambda=" << lambda << ": " << e.what();
  throw E(msg.str());
}

struct SlackPoint {
  double slack;
  double error;
};

SlackPoint slack_at(const Density& d, double N, const std::optional<CknParams>& params, FamilyKind kind,
                    double lambda, const QuadratureConfig& cfg) {
  try {
    if (kind == FamilyKind::Hpw) {
      const auto s = hpw_family_slack(d, N, lambda, cfg);
      return {s.slack, s.slack_error};
    }
    const auto s = ckn_family_slack(d, *params, lambda, cfg);
    return {s.slack, s.slack_error};
  } catch (const QuadratureError& e) {
    rethrow_with_lambda(e, lambda);
  } catch (const IntegrabilityError& e) {
    rethrow_with_lambda(e, lambda);
  } catch (const DegenerateError& e) {
    rethrow_with_lambda(e, lambda);
  }
}

double norm(const std::vector<double>& v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

FamilyScanResult family_scan(const Density& d, double N, const std::optional<CknParams>& params, FamilyKind kind,
                             const std::vector<double>& lambdas, const QuadratureConfig& cfg) {
  require(!lambdas.empty(), "lambda grid is empty");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    require(std::isfinite(lambdas[i]) && lambdas[i] > 0.0, "lambda grid must be positive");
    if (i > 0) require(lambdas[i] > lambdas[i - 1], "lambda grid must increase strictly");
  }
  if (kind == FamilyKind::Ckn) {
    require(params.has_value(), "CKN scan needs exponents (p, q, N)");
    params->validate();
  } else {
    require(std::isfinite(N) && N > 0.0, "HPW scan needs N > 0");
  }

  const std::size_t n = lambdas.size();
  std::vector<SlackPoint> points(n);
  std::vector<std::exception_ptr> failures(n);
  const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>({hw, n, 8});
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    jobs.push_back(std::async(std::launch::async, [&, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) {
        try {
          points[i] = slack_at(d, N, params, kind, lambdas[i], cfg);
        } catch (...) {
          failures[i] = std::current_exception();
        }
      }
    }));
  }
  for (auto& j : jobs) j.get();
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  FamilyScanResult out;
  out.kind = kind;
  out.lambdas = lambdas;
  for (const auto& p : points) {
    out.slacks.push_back(p.slack);
    out.slack_errors.push_back(p.error);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (out.slacks[i] < out.slacks[best]) best = i;
  }
  out.min_value = out.slacks[best];
  out.argmin_lambda = lambdas[best];
  return out;
}

std::vector<double> quotient_gradient(const Density& d, const std::optional<CknParams>& params,
                                      const GridFunction& u, QuotientKind kind) {
  u.validate();
  DiscreteQuotient dq(d, u.nodes, kind, params);
  std::vector<double> grad;
  dq.log_quotient(std::span<const double>(u.values.data(), u.values.size() - 1), &grad);
  return grad;
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::size_t kPreconditionerRefresh = 50;
}  // namespace

MinimizeResult minimize_quotient(const Density& d, double N, const std::optional<CknParams>& params,
                                 QuotientKind kind, const GridFunction& init, const MinimizeOptions& opt) {
  init.validate();
  require(opt.tolerance > 0.0, "minimizer tolerance must be positive");
  require(opt.backtrack > 0.0 && opt.backtrack < 1.0, "backtracking factor must lie in (0,1)");
  require(opt.armijo > 0.0 && opt.armijo < 1.0, "Armijo constant must lie in (0,1)");
  if (kind == QuotientKind::Hpw) require(std::isfinite(N) && N > 0.0, "HPW minimization needs N > 0");

  const DiscreteQuotient dq(d, init.nodes, kind, params);
  const double degree = dq.normalizer_degree();
  const std::size_t n = dq.free_size();

  auto project = [&](std::vector<double>& v) {
    const double m = dq.normalizer(v);
    if (!(m > 0.0)) return false;
    const double c = std::pow(m, -1.0 / degree);
    for (auto& x : v) x *= c;
    return true;
  };
  auto evaluate = [&](const std::vector<double>& v, std::vector<double>& g) {
    try {
      return dq.log_quotient(v, &g);
    } catch (const DegenerateError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  auto stationarity = [&](const std::vector<double>& v, const std::vector<double>& g) {
    return norm(g) * norm(v);
  };

  std::vector<double> v(init.values.begin(), init.values.end() - 1);
  if (!project(v)) throw DegenerateError("degenerate initial function: zero normalizer");
  std::vector<double> g;
  double f = evaluate(v, g);
  if (!std::isfinite(f)) throw DegenerateError("degenerate initial function: a quotient integral vanishes");

  MinimizeResult res;
  std::deque<std::pair<std::vector<double>, std::vector<double>>> memory;
  std::vector<double> diag;
  auto refresh_preconditioner = [&] {
    diag = dq.hessian_diagonal(v);
    // Nodes past the support carry no mass; leave them unscaled.
    const double top = *std::max_element(diag.begin(), diag.end());
    for (auto& x : diag) {
      if (!(x > 1e-300 * top)) x = top;
    }
    memory.clear();
  };
  refresh_preconditioner();

  double stat = stationarity(v, g);
  std::size_t it = 0;
  for (; it < opt.max_iters && stat > opt.tolerance; ++it) {
    if (it > 0 && it % kPreconditionerRefresh == 0) refresh_preconditioner();
    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      std::vector<double> dir(n);
      if (memory.empty()) {
        for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i] / diag[i];
      } else {
        std::vector<double> q = g;
        std::vector<double> alpha(memory.size());
        for (std::size_t k = memory.size(); k-- > 0;) {
          const auto& [s, y] = memory[k];
          alpha[k] = dot(s, q) / dot(y, s);
          for (std::size_t i = 0; i < n; ++i) q[i] -= alpha[k] * y[i];
        }
        const auto& [s_new, y_new] = memory.back();
        double yhy = 0.0;
        for (std::size_t i = 0; i < n; ++i) yhy += y_new[i] * y_new[i] / diag[i];
        const double gamma = dot(s_new, y_new) / yhy;
        for (std::size_t i = 0; i < n; ++i) q[i] *= gamma / diag[i];
        for (std::size_t k = 0; k < memory.size(); ++k) {
          const auto& [s, y] = memory[k];
          const double beta = dot(y, q) / dot(y, s);
          for (std::size_t i = 0; i < n; ++i) q[i] += s[i] * (alpha[k] - beta);
        }
        for (std::size_t i = 0; i < n; ++i) dir[i] = -q[i];
        if (dot(dir, g) >= 0.0) {
          memory.clear();
          continue;
        }
      }

      double step = 1.0;
      for (int ls = 0; ls < 60; ++ls, step *= opt.backtrack) {
        std::vector<double> trial(n);
        for (std::size_t i = 0; i < n; ++i) trial[i] = v[i] + step * dir[i];
        if (!project(trial)) continue;
        std::vector<double> g_trial;
        const double f_trial = evaluate(trial, g_trial);
        std::vector<double> disp(n);
        for (std::size_t i = 0; i < n; ++i) disp[i] = trial[i] - v[i];
        if (f_trial <= f + opt.armijo * dot(g, disp)) {
          std::vector<double> y(n);
          for (std::size_t i = 0; i < n; ++i) y[i] = g_trial[i] - g[i];
          const double sy = dot(disp, y);
          if (sy > 1e-12 * norm(disp) * norm(y)) {
            memory.emplace_back(std::move(disp), std::move(y));
            if (memory.size() > opt.memory) memory.pop_front();
          }
          v = std::move(trial);
          g = std::move(g_trial);
          f = f_trial;
          accepted = true;
          break;
        }
      }
      if (!accepted) memory.clear();
    }
    if (!accepted) break;
    stat = stationarity(v, g);
    res.trace.push_back(std::exp(f));
  }

  res.u = dq.to_grid_function(v);
  res.discrete_quotient = std::exp(f);
  res.stationarity = stat;
  res.converged = stat <= opt.tolerance;
  res.iterations = it;
  if (res.converged) {
    res.stop_reason = StopReason::Tolerance;
  } else if (it >= opt.max_iters) {
    res.stop_reason = StopReason::MaxIterations;
  } else {
    res.stop_reason = StopReason::LineSearch;
  }
  if (kind == QuotientKind::Hpw) {
    const auto rep = hpw_report(d, N, res.u);
    res.quotient = rep.quotient;
    res.quotient_error = rep.quotient_error;
    res.sharp_constant = rep.sharp_constant;
  } else {
    const auto rep = ckn_report(d, *params, res.u);
    res.quotient = rep.quotient;
    res.quotient_error = rep.quotient_error;
    res.sharp_constant = rep.sharp_constant;
  }
  return res;
}

// ---------------------------------------------------------------------------

Verdict rigidity_verdict(const Density& d, double N, const std::optional<CknParams>& params,
                         const VerdictConfig& cfg) {
  if (params) {
    params->validate();
    require(params->N == N, "CKN exponent N must match the verdict dimension");
  }
  Verdict v;
  v.mcp = check_mcp_density(d, N, cfg.mcp_grid);
  if (!v.mcp.satisfied(cfg.mcp_rel_tol)) {
    std::ostringstream msg;
    msg << "density is not MCP(0," << N << ") on the sample box: min slack " << v.mcp.min_slack << " at (x0,x1,t)=("
        << v.mcp.argmin[0] << "," << v.mcp.argmin[1] << "," << v.mcp.argmin[2] << "); verdict refused";
    throw PreconditionError(msg.str());
  }
  v.cone = cone_fit(d, N, cfg.cone_radii, cfg.cone_tolerance);
  v.hpw_scan = family_scan(d, N, params, FamilyKind::Hpw, cfg.lambdas, cfg.quad);
  if (params) v.ckn_scan = family_scan(d, N, params, FamilyKind::Ckn, cfg.lambdas, cfg.quad);

  const FamilyScanResult* worst = &v.hpw_scan;
  if (v.ckn_scan && v.ckn_scan->min_value < worst->min_value) worst = &*v.ckn_scan;
  const bool slack_says_cone = worst->min_value >= -cfg.threshold;

  if (v.cone.is_cone && slack_says_cone) {
    v.outcome = ConeVerdict{v.cone.A};
  } else if (!v.cone.is_cone && !slack_says_cone) {
    v.outcome = NonConeWitness{worst->argmin_lambda, worst->min_value, worst->kind};
  } else {
    std::ostringstream msg;
    msg << "cone_fit says " << (v.cone.is_cone ? "cone" : "non-cone") << " (deviation " << v.cone.max_rel_deviation
        << ") but the " << to_string(worst->kind) << " scan minimum is " << worst->min_value << " at lambda "
        << worst->argmin_lambda << " (threshold " << cfg.threshold << ")";
    throw InconsistencyError(msg.str());
  }
  return v;
}

}  // namespace conelab
