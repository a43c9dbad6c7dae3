#include "conelab/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

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

void require_lambda(double lambda) {
  require(std::isfinite(lambda) && lambda > 0.0, "lambda must be positive");
}

std::size_t segment_of(const std::vector<double>& nodes, double x) {
  auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
  return static_cast<std::size_t>(it - nodes.begin()) - 1;
}

double rel_sum(double e1, double v1, double e2, double v2) {
  return std::abs(e1 / v1) + std::abs(e2 / v2);
}

}  // namespace

void GridFunction::validate() const {
  require(nodes.size() >= 2, "grid function needs at least two nodes");
  require(nodes.size() == values.size(), "grid function nodes and values differ in length");
  require(nodes.front() == 0.0, "grid function nodes must start at 0");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    require(std::isfinite(nodes[i]) && std::isfinite(values[i]), "grid function entries must be finite");
    if (i > 0) require(nodes[i] > nodes[i - 1], "grid function nodes must increase strictly");
  }
  require(values.back() == 0.0, "grid function must vanish at its last node");
}

double GridFunction::operator()(double x) const {
  if (!(x >= 0.0)) throw DomainError("grid function evaluated at negative abscissa");
  if (x >= nodes.back()) return 0.0;
  const std::size_t i = segment_of(nodes, x);
  const double s = (x - nodes[i]) / (nodes[i + 1] - nodes[i]);
  return values[i] + s * (values[i + 1] - values[i]);
}

double GridFunction::slope(double x) const {
  if (!(x >= 0.0)) throw DomainError("grid function evaluated at negative abscissa");
  if (x >= nodes.back()) return 0.0;
  const std::size_t i = segment_of(nodes, x);
  return (values[i + 1] - values[i]) / (nodes[i + 1] - nodes[i]);
}

std::vector<double> lip_profile(const GridFunction& u) {
  u.validate();
  std::vector<double> out(u.nodes.size() - 1);
  for (std::size_t i = 0; i + 1 < u.nodes.size(); ++i) {
    out[i] = std::abs((u.values[i + 1] - u.values[i]) / (u.nodes[i + 1] - u.nodes[i]));
  }
  return out;
}

bool CknParams::admissible(double p, double q, double N) {
  if (!(std::isfinite(p) && std::isfinite(q) && std::isfinite(N))) return false;
  return q > 0.0 && q < 2.0 && p > 2.0 && N > 2.0 && N < 2.0 * (p - q) / (p - 2.0);
}

CknParams CknParams::make(double p, double q, double N) {
  CknParams out{p, q, N};
  out.validate();
  return out;
}

void CknParams::validate() const {
  if (!admissible(p, q, N)) {
    std::ostringstream msg;
    msg << "CKN exponents (p=" << p << ", q=" << q << ", N=" << N
        << ") violate 0<q<2<p and 2<N<2(p-q)/(p-2)";
    throw std::invalid_argument(msg.str());
  }
}

double HpwExtremal::operator()(double x) const { return std::exp(-lambda * x * x); }
double HpwExtremal::slope(double x) const { return -2.0 * lambda * x * std::exp(-lambda * x * x); }

double CknExtremal::operator()(double x) const {
  return std::pow(lambda + std::pow(x, 2.0 - params.q), 1.0 / (2.0 - params.p));
}

double CknExtremal::slope(double x) const {
  const double p = params.p;
  const double q = params.q;
  return (2.0 - q) / (2.0 - p) * std::pow(lambda + std::pow(x, 2.0 - q), (p - 1.0) / (2.0 - p)) *
         std::pow(x, 1.0 - q);
}

HpwExtremal hpw_extremal(double lambda) {
  require_lambda(lambda);
  return HpwExtremal{lambda};
}

CknExtremal ckn_extremal(const CknParams& params, double lambda) {
  params.validate();
  require_lambda(lambda);
  return CknExtremal{params, lambda};
}

Profile profile_of(const TestFunction& u) {
  return std::visit(
      Overloaded{
          [](const GridFunction& g) {
            g.validate();
            Profile prof;
            prof.value = [g](double x) { return g(x); };
            prof.slope = [g](double x) { return g.slope(x); };
            prof.value_origin = g.values.front() != 0.0 ? 0.0 : 1.0;
            prof.support_end = g.nodes.back();
            prof.breakpoints.assign(g.nodes.begin() + 1, g.nodes.end() - 1);
            return prof;
          },
          [](const HpwExtremal& e) {
            require_lambda(e.lambda);
            Profile prof;
            prof.value = [e](double x) { return e(x); };
            prof.slope = [e](double x) { return e.slope(x); };
            prof.slope_origin = 1.0;
            prof.slope_tail = 1.0;
            prof.gaussian_rate = e.lambda;
            prof.scale = 1.0 / std::sqrt(e.lambda);
            return prof;
          },
          [](const CknExtremal& e) {
            e.params.validate();
            require_lambda(e.lambda);
            const double gamma = e.params.gamma();
            Profile prof;
            prof.value = [e](double x) { return e(x); };
            prof.slope = [e](double x) { return e.slope(x); };
            prof.slope_origin = 1.0 - e.params.q;
            prof.value_tail = -gamma;
            prof.slope_tail = -gamma * (e.params.p - 1.0) + 1.0 - e.params.q;
            prof.scale = std::pow(e.lambda, 1.0 / (2.0 - e.params.q));
            return prof;
          },
      },
      u);
}

NeedleIntegrand power_integrand(const Profile& prof, double a, double b, double c) {
  NeedleIntegrand out;
  out.g = [value = prof.value, slope = prof.slope, a, b, c](double x) {
    double r = 1.0;
    if (a != 0.0) {
      const double u = std::abs(value(x));
      if (u == 0.0) return 0.0;
      r *= std::pow(u, a);
    }
    if (b != 0.0) {
      const double s = std::abs(slope(x));
      if (s == 0.0) return 0.0;
      r *= std::pow(s, b);
    }
    if (c != 0.0) r *= std::pow(x, c);
    return r;
  };
  out.origin_exponent = a * prof.value_origin + b * prof.slope_origin + c;
  out.tail_degree = a * prof.value_tail + b * prof.slope_tail + c;
  out.gaussian_rate = (a + b) * prof.gaussian_rate;
  out.support_end = prof.support_end;
  out.scale = prof.scale;
  out.breakpoints = prof.breakpoints;
  return out;
}

// ---------------------------------------------------------------------------

HpwReport hpw_report(const Density& d, double N, const TestFunction& u, const QuadratureConfig& cfg) {
  require(std::isfinite(N) && N > 0.0, "N must be positive");
  const Profile prof = profile_of(u);
  const auto D = integrate_on_needle(d, power_integrand(prof, 0.0, 2.0, 0.0), cfg);
  const auto M2 = integrate_on_needle(d, power_integrand(prof, 2.0, 0.0, 2.0), cfg);
  const auto M0 = integrate_on_needle(d, power_integrand(prof, 2.0, 0.0, 0.0), cfg);
  if (!(M0.value > 0.0)) throw DegenerateError("degenerate test function: zero mass on the needle");

  HpwReport r;
  r.dirichlet = D.value;
  r.moment2 = M2.value;
  r.mass = M0.value;
  r.dirichlet_error = D.error_estimate;
  r.moment2_error = M2.error_estimate;
  r.mass_error = M0.error_estimate;
  r.quotient = D.value * M2.value / (M0.value * M0.value);
  r.sharp_constant = N * N / 4.0;
  r.slack = r.quotient - r.sharp_constant;
  const double rel = (D.value > 0.0 ? D.error_estimate / D.value : 0.0) +
                     (M2.value > 0.0 ? M2.error_estimate / M2.value : 0.0) + 2.0 * M0.error_estimate / M0.value;
  r.quotient_error = r.quotient * rel;
  return r;
}

CknReport ckn_report(const Density& d, const CknParams& params, const TestFunction& u,
                     const QuadratureConfig& cfg) {
  params.validate();
  const double p = params.p;
  const double q = params.q;
  const Profile prof = profile_of(u);
  const auto D = integrate_on_needle(d, power_integrand(prof, 0.0, 2.0, 0.0), cfg);
  const auto S = integrate_on_needle(d, power_integrand(prof, 2.0 * p - 2.0, 0.0, 2.0 - 2.0 * q), cfg);
  const auto C = integrate_on_needle(d, power_integrand(prof, p, 0.0, -q), cfg);
  if (!(C.value > 0.0)) throw DegenerateError("degenerate test function: zero weighted mass on the needle");

  CknReport r;
  r.dirichlet = D.value;
  r.singular_moment = S.value;
  r.ckn_mass = C.value;
  r.dirichlet_error = D.error_estimate;
  r.singular_moment_error = S.error_estimate;
  r.ckn_mass_error = C.error_estimate;
  r.quotient = D.value * S.value / (C.value * C.value);
  r.sharp_constant = params.sharp_constant();
  r.slack = r.quotient - r.sharp_constant;
  const double rel = (D.value > 0.0 ? D.error_estimate / D.value : 0.0) +
                     (S.value > 0.0 ? S.error_estimate / S.value : 0.0) + 2.0 * C.error_estimate / C.value;
  r.quotient_error = r.quotient * rel;
  return r;
}

// ---------------------------------------------------------------------------

double approximant_cutoff(double k, double x) { return std::max(0.0, std::min(0.0, k - x) + 1.0); }

namespace {
std::vector<double> approximant_nodes(double k, std::size_t per_unit) {
  require(std::isfinite(k) && k > 0.0, "approximant index k must be positive");
  require(per_unit >= 2, "approximant needs at least 2 nodes per unit");
  const auto inner = static_cast<std::size_t>(std::ceil(k * static_cast<double>(per_unit)));
  std::vector<double> nodes = linspace(0.0, k, inner + 1);
  const auto outer = linspace(k, k + 1.0, per_unit + 1);
  nodes.insert(nodes.end(), outer.begin() + 1, outer.end());
  return nodes;
}
}  // namespace

GridFunction hpw_approximant(double lambda, double k, std::size_t nodes_per_unit) {
  require_lambda(lambda);
  GridFunction u;
  u.nodes = approximant_nodes(k, nodes_per_unit);
  for (double x : u.nodes) u.values.push_back(approximant_cutoff(k, x) * std::exp(-lambda * x * x));
  u.values.back() = 0.0;
  return u;
}

GridFunction ckn_approximant(const CknParams& params, double lambda, double k, std::size_t nodes_per_unit) {
  params.validate();
  require_lambda(lambda);
  require(k >= 1.0, "CKN approximant needs k >= 1");
  GridFunction u;
  u.nodes = approximant_nodes(k, nodes_per_unit);
  u.nodes.push_back(1.0 / k);
  std::sort(u.nodes.begin(), u.nodes.end());
  u.nodes.erase(std::unique(u.nodes.begin(), u.nodes.end()), u.nodes.end());
  for (double x : u.nodes) {
    const double floor_x = std::max(x, 1.0 / k);
    u.values.push_back(approximant_cutoff(k, x) *
                       std::pow(lambda + std::pow(floor_x, 2.0 - params.q), 1.0 / (2.0 - params.p)));
  }
  u.values.back() = 0.0;
  return u;
}

// ---------------------------------------------------------------------------

namespace {

double hpw_T_quadrature(double N, double kw, double lambda, const QuadratureConfig& cfg, double* error) {
  const auto r = integrate_halfline(
      [=](double rho) { return 4.0 * lambda * kw * std::pow(rho, N + 1.0) * std::exp(-2.0 * lambda * rho * rho); },
      N + 1.0, decay::Gaussian{2.0 * lambda, N + 1.0}, cfg);
  if (error) *error = r.error_estimate;
  return r.value;
}

QuadratureConfig tight(const QuadratureConfig& cfg) {
  QuadratureConfig out = cfg;
  out.rel_tol = 1e-14;
  out.abs_tol = 1e-300;
  out.tail_tol = std::min(cfg.tail_tol, 1e-16);
  return out;
}

}  // namespace

MomentHpw moment_T_hpw(double N, double k, double lambda, const QuadratureConfig& cfg) {
  require(std::isfinite(N) && N > 1.0, "N must exceed 1");
  require(std::isfinite(k) && k > 0.0, "k must be positive");
  require_lambda(lambda);
  const double kw = k * unit_ball_volume(N);
  MomentHpw m;
  m.T = hpw_T_quadrature(N, kw, lambda, cfg, &m.T_error);

  // dm = k omega_N N rho^{N-1} d rho
  const Density cone = Density::power_law(kw * N, N);
  NeedleIntegrand g;
  g.g = [lambda](double x) { return -2.0 * x * x * std::exp(-2.0 * lambda * x * x); };
  g.origin_exponent = 2.0;
  g.tail_degree = 2.0;
  g.gaussian_rate = 2.0 * lambda;
  const auto tp = integrate_on_needle(cone, g, cfg);
  m.T_prime = tp.value;
  m.T_prime_error = tp.error_estimate;

  const double h = 1e-4 * lambda;
  const auto fine = tight(cfg);
  m.T_prime_fd = (hpw_T_quadrature(N, kw, lambda + h, fine, nullptr) -
                  hpw_T_quadrature(N, kw, lambda - h, fine, nullptr)) /
                 (2.0 * h);
  m.closed_form = std::pow(M_PI / 2.0, N / 2.0) * k * std::pow(lambda, -N / 2.0);
  m.identity_residual = std::abs(-lambda * m.T_prime - 0.5 * N * m.T) / m.T;
  m.identity_residual_fd = std::abs(-lambda * m.T_prime_fd - 0.5 * N * m.T) / m.T;
  return m;
}

IntegralResult p_direct(const Density& d, double lambda, const QuadratureConfig& cfg) {
  require_lambda(lambda);
  NeedleIntegrand g;
  g.g = [lambda](double x) { return std::exp(-2.0 * lambda * x * x); };
  g.gaussian_rate = 2.0 * lambda;
  return integrate_on_needle(d, g, cfg);
}

IntegralResult p_layer_cake(const Density& d, double lambda, const QuadratureConfig& cfg) {
  require_lambda(lambda);
  const bool bounded = std::isfinite(d.support_end()) || d.exponential_rate() > 0.0;
  const double degree = bounded ? 1.0 : d.growth_degree() + 2.0;
  auto cuts = d.breakpoints();
  return integrate_halfline(
      [&d, lambda](double rho) {
        return 4.0 * lambda * ball_volume(d, rho) * rho * std::exp(-2.0 * lambda * rho * rho);
      },
      d.origin_exponent() + 2.0, decay::Gaussian{2.0 * lambda, degree}, cfg, cuts);
}

HpwFamilySlack hpw_family_slack(const Density& d, double N, double lambda, const QuadratureConfig& cfg) {
  require(std::isfinite(N) && N > 0.0, "N must be positive");
  const auto M0 = p_direct(d, lambda, cfg);
  NeedleIntegrand g;
  g.g = [lambda](double x) { return x * x * std::exp(-2.0 * lambda * x * x); };
  g.origin_exponent = 2.0;
  g.tail_degree = 2.0;
  g.gaussian_rate = 2.0 * lambda;
  const auto M2 = integrate_on_needle(d, g, cfg);
  if (!(M0.value > 0.0)) throw DegenerateError("density has zero Gaussian moment");

  HpwFamilySlack s;
  s.M0 = M0.value;
  s.M2 = M2.value;
  s.M0_error = M0.error_estimate;
  s.M2_error = M2.error_estimate;
  const double ratio = 2.0 * lambda * M2.value / M0.value;
  s.slack = ratio - 0.5 * N;
  s.slack_error = ratio * (M2.value > 0.0 ? rel_sum(M2.error_estimate, M2.value, M0.error_estimate, M0.value)
                                          : M0.error_estimate / M0.value);
  return s;
}

// ---------------------------------------------------------------------------

namespace {

// int (lambda + x^{2-q})^e x^c dm
IntegralResult ckn_moment(const Density& d, const CknParams& params, double lambda, double e, double c,
                          const QuadratureConfig& cfg) {
  const double s = 2.0 - params.q;
  NeedleIntegrand g;
  g.g = [lambda, e, c, s](double x) { return std::pow(lambda + std::pow(x, s), e) * std::pow(x, c); };
  g.origin_exponent = c;
  g.tail_degree = s * e + c;
  g.scale = std::pow(lambda, 1.0 / s);
  return integrate_on_needle(d, g, cfg);
}

}  // namespace

MomentCkn moment_T_ckn(const CknParams& params, double k, double lambda, const QuadratureConfig& cfg) {
  params.validate();
  require(std::isfinite(k) && k > 0.0, "k must be positive");
  require_lambda(lambda);
  const double p = params.p;
  const double q = params.q;
  const double N = params.N;
  const Density cone = Density::power_law(k * unit_ball_volume(N) * N, N);
  const double pre = (p - 2.0) / p;

  MomentCkn m;
  const auto t1 = ckn_moment(cone, params, lambda, p / (2.0 - p), -q, cfg);
  const auto t2 = ckn_moment(cone, params, 2.0 * lambda, p / (2.0 - p), -q, cfg);
  const auto tp = ckn_moment(cone, params, lambda, (2.0 * p - 2.0) / (2.0 - p), -q, cfg);
  m.T = pre * t1.value;
  m.T_error = pre * t1.error_estimate;
  m.T_doubled = pre * t2.value;
  m.ratio = m.T_doubled / m.T;
  m.alpha = params.alpha();
  m.expected_ratio = std::pow(2.0, m.alpha);
  m.ratio_rel_deviation = std::abs(m.ratio / m.expected_ratio - 1.0);
  m.T_prime = -tp.value;
  m.T_prime_error = tp.error_estimate;
  m.identity_residual = std::abs(lambda * m.T_prime - m.alpha * m.T) / std::abs(m.alpha * m.T);
  return m;
}

CknFamilySlack ckn_family_slack(const Density& d, const CknParams& params, double lambda,
                                const QuadratureConfig& cfg) {
  params.validate();
  require_lambda(lambda);
  const double p = params.p;
  const double q = params.q;
  const auto I1 = ckn_moment(d, params, lambda, (2.0 * p - 2.0) / (2.0 - p), 2.0 - 2.0 * q, cfg);
  const auto I2 = ckn_moment(d, params, lambda, p / (2.0 - p), -q, cfg);
  if (!(I2.value > 0.0)) throw DegenerateError("density has zero CKN moment");

  CknFamilySlack s;
  s.I1 = I1.value;
  s.I2 = I2.value;
  s.I1_error = I1.error_estimate;
  s.I2_error = I2.error_estimate;
  const double a = (2.0 - q) / (p - 2.0);
  const double b = (params.N - q) / p;
  s.lhs = a * I1.value;
  s.rhs = b * I2.value;
  s.difference = s.lhs - s.rhs;
  s.slack = a * I1.value / I2.value - b;
  s.slack_error = a * (I1.value / I2.value) *
                  (I1.value > 0.0 ? rel_sum(I1.error_estimate, I1.value, I2.error_estimate, I2.value)
                                  : I2.error_estimate / I2.value);
  return s;
}

// ---------------------------------------------------------------------------

GridFunction random_grid_function(std::mt19937_64& rng, std::size_t nodes, double support) {
  require(nodes >= 2, "random grid function needs at least 2 nodes");
  require(std::isfinite(support) && support > 0.0, "support must be positive");
  GridFunction u;
  u.nodes = linspace(0.0, support, nodes);
  u.values.resize(nodes);
  // 53-bit uniform in [0,1), independent of the standard library's distributions
  for (auto& v : u.values) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  u.values.back() = 0.0;
  return u;
}

GridFunction random_positive_grid_function(std::mt19937_64& rng, std::vector<double> nodes) {
  require(nodes.size() >= 2, "random grid function needs at least 2 nodes");
  GridFunction u;
  u.nodes = std::move(nodes);
  u.values.resize(u.nodes.size());
  for (auto& v : u.values) v = 0.1 + 0.9 * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  u.values.back() = 0.0;
  u.validate();
  return u;
}

GridFunction tent_function(std::vector<double> nodes) {
  require(nodes.size() >= 3, "tent needs at least 3 nodes");
  GridFunction u;
  u.nodes = std::move(nodes);
  const double half = 0.5 * u.nodes.back();
  for (double x : u.nodes) u.values.push_back(std::max(0.0, 1.0 - std::abs(x - half) / half));
  u.values.back() = 0.0;
  u.validate();
  return u;
}

std::vector<double> geometric_grid(double lo, double hi, std::size_t n) {
  require(n >= 3, "geometric grid needs at least 3 nodes");
  std::vector<double> out{0.0};
  const auto g = log_spaced(lo, hi, n - 1);
  out.insert(out.end(), g.begin(), g.end());
  return out;
}

}  // namespace conelab
