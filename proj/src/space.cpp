#include "conelab/space.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

#include "conelab/errors.hpp"
#include "conelab/grids.hpp"

namespace conelab {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void check_power(double c, double N) {
  require(std::isfinite(c) && c > 0.0, "density coefficient c must be positive");
  require(std::isfinite(N) && N > 1.0, "density exponent N must exceed 1");
}

// Integral of the table interpolant over [nodes[i], x], x within segment i.
double table_segment_integral(const density::Tabulated& t, std::size_t i, double x) {
  const double x0 = t.nodes[i];
  const double x1 = t.nodes[i + 1];
  const double v0 = t.values[i];
  const double v1 = t.values[i + 1];
  const double delta = x - x0;
  if (delta <= 0.0) return 0.0;
  if (v0 > 0.0 && v1 > 0.0) {
    const double kappa = std::log(v1 / v0) / (x1 - x0);
    if (kappa == 0.0) return v0 * delta;
    return v0 * std::expm1(kappa * delta) / kappa;
  }
  const double slope = (v1 - v0) / (x1 - x0);
  return v0 * delta + 0.5 * slope * delta * delta;
}

double table_eval(const density::Tabulated& t, double x) {
  if (x > t.nodes.back()) {
    std::ostringstream msg;
    msg << "tabulated density evaluated at " << x << " outside [0, " << t.nodes.back() << "]";
    throw DomainError(msg.str());
  }
  auto it = std::upper_bound(t.nodes.begin(), t.nodes.end(), x);
  std::size_t i = it == t.nodes.end() ? t.nodes.size() - 2
                                      : static_cast<std::size_t>(it - t.nodes.begin()) - 1;
  const double x0 = t.nodes[i];
  const double x1 = t.nodes[i + 1];
  const double v0 = t.values[i];
  const double v1 = t.values[i + 1];
  const double tau = (x - x0) / (x1 - x0);
  if (v0 > 0.0 && v1 > 0.0) return v0 * std::exp(tau * std::log(v1 / v0));
  return v0 + tau * (v1 - v0);
}

}  // namespace

Density::Density(Kind kind) : kind_(std::move(kind)) {
  std::visit(Overloaded{
                 [](const density::PowerLaw& d) { check_power(d.c, d.N); },
                 [](const density::TruncatedPowerLaw& d) {
                   check_power(d.c, d.N);
                   require(std::isfinite(d.R) && d.R > 0.0, "truncation radius R must be positive");
                 },
                 [](const density::PowerLawExp& d) {
                   check_power(d.c, d.N);
                   require(std::isfinite(d.a) && d.a > 0.0, "exponential rate a must be positive");
                   require(d.R > 0.0, "support end R must be positive");
                 },
                 [](const density::Tabulated& d) {
                   require(d.nodes.size() >= 2, "tabulated density needs at least two nodes");
                   require(d.nodes.size() == d.values.size(), "nodes and values differ in length");
                   require(d.nodes.front() == 0.0, "tabulated nodes must start at 0");
                   bool any_positive = false;
                   for (std::size_t i = 0; i < d.nodes.size(); ++i) {
                     require(std::isfinite(d.nodes[i]), "tabulated nodes must be finite");
                     require(std::isfinite(d.values[i]) && d.values[i] >= 0.0,
                             "tabulated values must be nonnegative");
                     if (i > 0) require(d.nodes[i] > d.nodes[i - 1], "tabulated nodes must increase strictly");
                     any_positive = any_positive || d.values[i] > 0.0;
                   }
                   require(any_positive, "tabulated density is identically zero");
                 },
             },
             kind_);
}

std::string Density::kind_name() const {
  return std::visit(Overloaded{
                        [](const density::PowerLaw&) { return std::string("powerlaw"); },
                        [](const density::TruncatedPowerLaw&) { return std::string("truncated"); },
                        [](const density::PowerLawExp&) { return std::string("powerlaw_exp"); },
                        [](const density::Tabulated&) { return std::string("tabulated"); },
                    },
                    kind_);
}

double Density::operator()(double x) const {
  if (!(x >= 0.0)) throw DomainError("density evaluated at negative or NaN abscissa");
  return std::visit(Overloaded{
                        [x](const density::PowerLaw& d) { return d.c * std::pow(x, d.N - 1.0); },
                        [x](const density::TruncatedPowerLaw& d) {
                          return x <= d.R ? d.c * std::pow(x, d.N - 1.0) : 0.0;
                        },
                        [x](const density::PowerLawExp& d) {
                          return x <= d.R ? d.c * std::pow(x, d.N - 1.0) * std::exp(-d.a * x) : 0.0;
                        },
                        [x](const density::Tabulated& d) { return table_eval(d, x); },
                    },
                    kind_);
}

double Density::support_end() const {
  return std::visit(Overloaded{
                        [](const density::PowerLaw&) { return kInfinity; },
                        [](const density::TruncatedPowerLaw& d) { return d.R; },
                        [](const density::PowerLawExp& d) { return d.R; },
                        [](const density::Tabulated& d) { return d.nodes.back(); },
                    },
                    kind_);
}

double Density::origin_exponent() const {
  return std::visit(Overloaded{
                        [](const density::Tabulated& d) { return d.values.front() > 0.0 ? 0.0 : 1.0; },
                        [](const auto& d) { return d.N - 1.0; },
                    },
                    kind_);
}

double Density::growth_degree() const {
  return std::visit(Overloaded{
                        [](const density::Tabulated&) { return 0.0; },
                        [](const auto& d) { return d.N - 1.0; },
                    },
                    kind_);
}

double Density::exponential_rate() const {
  if (const auto* d = std::get_if<density::PowerLawExp>(&kind_)) return d->a;
  return 0.0;
}

std::vector<double> Density::breakpoints() const {
  return std::visit(Overloaded{
                        [](const density::Tabulated& d) { return d.nodes; },
                        [](const density::TruncatedPowerLaw& d) { return std::vector<double>{d.R}; },
                        [](const density::PowerLawExp& d) {
                          return std::isfinite(d.R) ? std::vector<double>{d.R} : std::vector<double>{};
                        },
                        [](const density::PowerLaw&) { return std::vector<double>{}; },
                    },
                    kind_);
}

double eval_density(const Density& d, double x) { return d(x); }

double ball_volume(const Density& d, double rho) {
  if (!(rho >= 0.0)) throw DomainError("ball radius must be nonnegative");
  return std::visit(Overloaded{
                        [rho](const density::PowerLaw& p) { return p.c * std::pow(rho, p.N) / p.N; },
                        [rho](const density::TruncatedPowerLaw& p) {
                          return p.c * std::pow(std::min(rho, p.R), p.N) / p.N;
                        },
                        [rho](const density::PowerLawExp& p) {
                          const double r = std::min(rho, p.R);
                          if (r == 0.0) return 0.0;
                          // c a^{-N} gamma_lower(N, a r)
                          return p.c * std::exp(std::lgamma(p.N) - p.N * std::log(p.a)) *
                                 boost::math::gamma_p(p.N, p.a * r);
                        },
                        [rho](const density::Tabulated& t) {
                          const double r = std::min(rho, t.nodes.back());
                          double total = 0.0;
                          for (std::size_t i = 0; i + 1 < t.nodes.size() && t.nodes[i] < r; ++i) {
                            total += table_segment_integral(t, i, std::min(r, t.nodes[i + 1]));
                          }
                          return total;
                        },
                    },
                    d.kind());
}

IntegralResult integrate_on_needle(const Density& d, const NeedleIntegrand& in, const QuadratureConfig& cfg) {
  const double singular = in.origin_exponent + d.origin_exponent();
  if (!(singular > -1.0)) {
    std::ostringstream msg;
    msg << "integrand ~ x^" << singular << " at the origin is not integrable against the "
        << d.kind_name() << " density";
    throw IntegrabilityError(msg.str());
  }
  const double end = std::min(in.support_end, d.support_end());

  std::vector<double> cuts = in.breakpoints;
  for (double b : d.breakpoints()) cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::erase_if(cuts, [end](double b) { return !(b > 0.0 && b < end); });

  const Integrand f = [&d, &in, end](double x) {
    if (x > end) return 0.0;
    const double h = d(x);
    if (h == 0.0) return 0.0;
    const double g = in.g(x);
    return g == 0.0 ? 0.0 : g * h;
  };

  DecayClass decay_class = decay::Compact{end};
  if (!std::isfinite(end)) {
    const double degree = in.tail_degree + d.growth_degree();
    if (in.gaussian_rate > 0.0) {
      decay_class = decay::Gaussian{in.gaussian_rate, std::max(degree, 0.0)};
    } else if (d.exponential_rate() > 0.0) {
      decay_class = decay::Power{std::max(2.0, -degree), std::max(in.scale, 1.0 / d.exponential_rate())};
    } else {
      if (!(-degree > 1.0)) {
        std::ostringstream msg;
        msg << "integrand ~ x^" << degree << " at infinity is not integrable";
        throw IntegrabilityError(msg.str());
      }
      decay_class = decay::Power{-degree, in.scale};
    }
  }
  return integrate_halfline(f, singular, decay_class, cfg, cuts);
}

// ---------------------------------------------------------------------------

void DistortionInput::validate() const {
  require(std::isfinite(K), "K must be finite");
  require(std::isfinite(N) && N >= 0.0, "N must be a nonnegative real");
  require(t >= 0.0 && t <= 1.0, "t must lie in [0, 1]");
  require(std::isfinite(theta) && theta >= 0.0, "theta must be nonnegative");
}

namespace {
// sinh(t a) / sinh(a) without overflow for large a.
double sinh_ratio(double t, double a) {
  if (a < 20.0) return std::sinh(t * a) / std::sinh(a);
  return std::exp(a * (t - 1.0)) * (-std::expm1(-2.0 * a * t)) / (-std::expm1(-2.0 * a));
}
}  // namespace

double sigma(const DistortionInput& in) {
  in.validate();
  const double k_theta2 = in.K * in.theta * in.theta;
  if (k_theta2 == 0.0) return in.t;
  if (k_theta2 >= in.N * M_PI * M_PI) return kInfinity;
  if (k_theta2 > 0.0) {
    const double s = std::sqrt(in.K / in.N);
    return std::sin(in.t * in.theta * s) / std::sin(in.theta * s);
  }
  if (in.N == 0.0) return in.t;
  return sinh_ratio(in.t, in.theta * std::sqrt(-in.K / in.N));
}

double tau(const DistortionInput& in) {
  in.validate();
  require(in.N >= 1.0, "tau requires N >= 1");
  if (in.K * in.theta * in.theta == 0.0) return in.t;
  const double s = sigma(DistortionInput{in.K, in.N - 1.0, in.t, in.theta});
  const double weight = (in.N - 1.0) / in.N;
  if (std::isinf(s)) return weight == 0.0 ? in.t : kInfinity;
  return std::pow(in.t, 1.0 / in.N) * std::pow(s, weight);
}

// ---------------------------------------------------------------------------

bool McpSlackReport::satisfied(double rel_tol) const { return min_slack >= -rel_tol * scale; }

McpSlackReport check_mcp_density(const Density& d, double N, const McpGrid& grid) {
  require(std::isfinite(N) && N > 1.0, "MCP exponent N must exceed 1");
  require(grid.x0_points >= 2 && grid.x1_points >= 2 && grid.t_points >= 2,
          "MCP sampling needs at least 2 points per axis");
  const double end = grid.box_end.value_or(std::min(d.support_end(), 20.0));
  require(end > 0.0 && end <= d.support_end(), "MCP sample box must lie inside the needle");

  const auto xs0 = linspace(0.0, end, grid.x0_points);
  const auto xs1 = linspace(0.0, end, grid.x1_points);
  const auto ts = linspace(0.0, 1.0, grid.t_points);
  std::vector<double> h0(xs0.size());
  McpSlackReport report;
  report.box_end = end;
  for (std::size_t i = 0; i < xs0.size(); ++i) {
    h0[i] = d(xs0[i]);
    report.scale = std::max(report.scale, h0[i]);
  }
  std::vector<double> contraction(ts.size());
  for (std::size_t k = 0; k < ts.size(); ++k) contraction[k] = std::pow(1.0 - ts[k], N - 1.0);

  bool first = true;
  for (std::size_t i = 0; i < xs0.size(); ++i) {
    for (std::size_t j = 0; j < xs1.size(); ++j) {
      for (std::size_t k = 0; k < ts.size(); ++k) {
        const double y = std::clamp(ts[k] * xs1[j] + (1.0 - ts[k]) * xs0[i], 0.0, end);
        const double slack = d(y) - contraction[k] * h0[i];
        if (first || slack < report.min_slack) {
          report.min_slack = slack;
          report.argmin = {xs0[i], xs1[j], ts[k]};
          first = false;
        }
        ++report.samples_tested;
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

namespace {
void check_radii(std::span<const double> radii, std::size_t min_count) {
  require(radii.size() >= min_count, "not enough radii");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    require(std::isfinite(radii[i]) && radii[i] > 0.0, "radii must be positive");
    if (i > 0) require(radii[i] > radii[i - 1], "radii must increase strictly");
  }
}
}  // namespace

BishopGromovProfile bishop_gromov_profile(const Density& d, double N, std::span<const double> radii,
                                          double rel_tol) {
  require(std::isfinite(N) && N > 0.0, "Bishop-Gromov exponent N must be positive");
  check_radii(radii, 1);
  BishopGromovProfile out;
  out.radii.assign(radii.begin(), radii.end());
  for (double r : radii) out.ratios.push_back(ball_volume(d, r) / std::pow(r, N));
  out.monotone_nonincreasing = true;
  for (std::size_t i = 1; i < out.ratios.size(); ++i) {
    if (out.ratios[i] > out.ratios[i - 1] * (1.0 + rel_tol)) out.monotone_nonincreasing = false;
  }
  return out;
}

std::vector<double> default_cone_radii() { return log_spaced(1e-2, 1e2, 41); }

ConeFit cone_fit(const Density& d, double N, std::span<const double> radii, double tol) {
  require(std::isfinite(N) && N > 0.0, "cone exponent N must be positive");
  require(tol > 0.0, "cone tolerance must be positive");
  check_radii(radii, 2);
  std::vector<double> normalized;
  normalized.reserve(radii.size());
  for (double r : radii) normalized.push_back(ball_volume(d, r) / std::pow(r, N));
  const auto [lo, hi] = std::minmax_element(normalized.begin(), normalized.end());
  if (*hi == 0.0) throw DegenerateError("density has zero volume on every tested radius");

  ConeFit fit;
  fit.radii_tested.assign(radii.begin(), radii.end());
  fit.tolerance = tol;
  fit.A = normalized.front() / unit_ball_volume(N);
  fit.max_rel_deviation = *lo > 0.0 ? *hi / *lo - 1.0 : kInfinity;
  fit.is_cone = fit.max_rel_deviation <= tol;
  return fit;
}

}  // namespace conelab
