#include "conelab/needle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "conelab/errors.hpp"

namespace conelab {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

const TestFunction& function_for(const RayFunctions& u, std::size_t i) {
  if (const auto* one = std::get_if<TestFunction>(&u)) return *one;
  return std::get<std::vector<TestFunction>>(u)[i];
}

void check_ray_functions(const NeedleEnsemble& e, const RayFunctions& u) {
  if (const auto* many = std::get_if<std::vector<TestFunction>>(&u)) {
    require(many->size() == e.rays.size(), "need one test function per ray");
  }
}

}  // namespace

void NeedleEnsemble::validate() const {
  require(std::isfinite(N) && N > 1.0, "ensemble dimension N must exceed 1");
  require(!rays.empty(), "ensemble has no rays");
  double total = 0.0;
  for (const auto& r : rays) {
    require(std::isfinite(r.c) && r.c > 0.0, "ray coefficient c must be positive");
    require(std::isfinite(r.q) && r.q > 0.0, "ray weight q must be positive");
    total += r.q;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg << "ray weights must sum to 1 (got " << total << ")";
    throw std::invalid_argument(msg.str());
  }
}

Density NeedleEnsemble::assembled_density() const {
  double c = 0.0;
  for (const auto& r : rays) c += r.q * r.c;
  return Density::power_law(c, N);
}

double assemble(const NeedleEnsemble& e, double rho) {
  e.validate();
  require(std::isfinite(rho) && rho > 0.0, "radius must be positive");
  double c = 0.0;
  for (const auto& r : e.rays) c += r.q * r.c;
  return c * std::pow(rho, e.N) / e.N;
}

DisintegrationCheck verify_disintegration(const NeedleEnsemble& e, const std::vector<double>& radii,
                                          const std::optional<std::vector<double>>& weights) {
  e.validate();
  require(!radii.empty(), "disintegration check needs at least one radius");
  if (weights) require(weights->size() == e.rays.size(), "need one weight per ray");
  DisintegrationCheck out;
  out.radii = radii;
  for (double rho : radii) {
    const double total = assemble(e, rho);
    double sum = 0.0;
    for (std::size_t i = 0; i < e.rays.size(); ++i) {
      const double w = weights ? (*weights)[i] : e.rays[i].q;
      sum += w * ball_volume(e.ray_density(i), rho);
    }
    out.assembled.push_back(total);
    out.per_ray_sum.push_back(sum);
    out.max_rel_deviation = std::max(out.max_rel_deviation, std::abs(sum - total) / total);
  }
  return out;
}

ReweightResult reweight(const NeedleEnsemble& e, const RayFunctions& u, const std::vector<double>& test_radii,
                        const QuadratureConfig& cfg) {
  e.validate();
  check_ray_functions(e, u);
  require(!test_radii.empty(), "reweighting needs test radii");
  const std::size_t n = e.rays.size();
  ReweightResult out;
  out.C.resize(n);
  out.tilde_q.resize(n);
  out.normalized_moment.assign(n, 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    const Profile prof = profile_of(function_for(u, i));
    const auto moment = power_integrand(prof, 2.0, 0.0, 2.0);
    out.C[i] = integrate_on_needle(e.ray_density(i), moment, cfg).value;
    if (out.C[i] == 0.0) {
      out.dropped.push_back(i);
      out.tilde_q[i] = 0.0;
      continue;
    }
    out.tilde_q[i] = out.C[i] * e.rays[i].q;
    const Density tilde = Density::power_law(e.rays[i].c / out.C[i], e.N);
    out.normalized_moment[i] = integrate_on_needle(tilde, moment, cfg).value;
    out.max_moment_deviation = std::max(out.max_moment_deviation, std::abs(out.normalized_moment[i] - 1.0));
  }
  if (out.dropped.size() == n) throw DegenerateError("degenerate test function: d^2 u^2 vanishes on every ray");
  for (double t : out.tilde_q) out.tilde_q_total += t;

  if (std::holds_alternative<TestFunction>(u)) {
    const auto moment = power_integrand(profile_of(std::get<TestFunction>(u)), 2.0, 0.0, 2.0);
    out.total_moment = integrate_on_needle(e.assembled_density(), moment, cfg).value;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const auto moment = power_integrand(profile_of(function_for(u, i)), 2.0, 0.0, 2.0);
      out.total_moment += integrate_on_needle(Density::power_law(e.rays[i].q * e.rays[i].c, e.N), moment, cfg).value;
    }
  }
  out.total_rel_deviation = std::abs(out.tilde_q_total - out.total_moment) / out.total_moment;

  // Reassembly over the rays that were kept.
  for (double rho : test_radii) {
    double target = 0.0;
    double rebuilt = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (out.tilde_q[i] == 0.0) continue;
      target += e.rays[i].q * ball_volume(e.ray_density(i), rho);
      rebuilt += out.tilde_q[i] * ball_volume(Density::power_law(e.rays[i].c / out.C[i], e.N), rho);
    }
    out.reassembly_rel_deviation = std::max(out.reassembly_rel_deviation, std::abs(rebuilt - target) / target);
  }
  return out;
}

HpwChainReport aggregate_hpw(const NeedleEnsemble& e, const RayFunctions& u, const QuadratureConfig& cfg) {
  e.validate();
  check_ray_functions(e, u);
  const std::size_t n = e.rays.size();
  const double sharp = e.N * e.N / 4.0;
  HpwChainReport out;
  out.ray_slack.assign(n, 0.0);
  out.reweighted_slack.assign(n, 0.0);

  double tq_total = 0.0;
  double sum_d = 0.0;
  double sum_m0 = 0.0;
  double sum_m0_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Profile prof = profile_of(function_for(u, i));
    const Density dens = e.ray_density(i);
    const double D = integrate_on_needle(dens, power_integrand(prof, 0.0, 2.0, 0.0), cfg).value;
    const double C = integrate_on_needle(dens, power_integrand(prof, 2.0, 0.0, 2.0), cfg).value;
    const double M0 = integrate_on_needle(dens, power_integrand(prof, 2.0, 0.0, 0.0), cfg).value;
    if (C == 0.0) {
      out.dropped.push_back(i);
      continue;
    }
    out.ray_slack[i] = D * C / (M0 * M0) - sharp;
    const double d_t = D / C;
    const double m0_t = M0 / C;
    out.reweighted_slack[i] = d_t - sharp * m0_t * m0_t;
    const double tq = C * e.rays[i].q;
    tq_total += tq;
    sum_d += tq * d_t;
    sum_m0 += tq * m0_t;
    sum_m0_sq += tq * m0_t * m0_t;
  }
  if (out.dropped.size() == n || !(sum_m0 > 0.0)) throw DegenerateError("degenerate test function on the ensemble");

  out.dirichlet = sum_d;
  out.moment2 = tq_total;
  out.mass = sum_m0;
  const double m0_sq = sum_m0 * sum_m0;
  out.integrated_slack = tq_total * (sum_d - sharp * sum_m0_sq) / m0_sq;
  out.cauchy_schwarz_slack = (sum_m0_sq * tq_total - m0_sq) / m0_sq;
  out.final_slack = sum_d * tq_total / m0_sq - sharp;
  out.chain_identity_residual =
      std::abs(out.final_slack - (out.integrated_slack + sharp * out.cauchy_schwarz_slack));
  return out;
}

RayCknCheck ray_ckn_check(const Ray& ray, double N, const CknParams& params, const TestFunction& u,
                          const QuadratureConfig& cfg) {
  params.validate();
  require(std::isfinite(ray.c) && ray.c > 0.0, "ray coefficient c must be positive");
  require(N == params.N, "ray dimension must match the CKN exponent N");
  const double p = params.p;
  const double q = params.q;
  const Density dens = Density::power_law(ray.c, N);
  const Profile prof = profile_of(u);
  const auto C = integrate_on_needle(dens, power_integrand(prof, p, 0.0, -q), cfg);
  if (!(C.value > 0.0)) throw DegenerateError("degenerate test function: zero weighted mass on the ray");
  const auto M = integrate_on_needle(dens, power_integrand(prof, p - 1.0, 1.0, 1.0 - q), cfg);
  const auto D = integrate_on_needle(dens, power_integrand(prof, 0.0, 2.0, 0.0), cfg);
  const auto S = integrate_on_needle(dens, power_integrand(prof, 2.0 * p - 2.0, 0.0, 2.0 - 2.0 * q), cfg);

  RayCknCheck out;
  out.lhs = (N - q) / p * C.value;
  out.middle = M.value;
  out.rhs = std::sqrt(D.value) * std::sqrt(S.value);
  out.slack = out.rhs - out.lhs;
  out.first_slack = out.middle - out.lhs;
  out.second_slack = out.rhs - out.middle;
  out.rel_slack = out.slack / out.rhs;
  out.error = (N - q) / p * C.error_estimate +
              0.5 * out.rhs *
                  ((D.value > 0.0 ? D.error_estimate / D.value : 0.0) +
                   (S.value > 0.0 ? S.error_estimate / S.value : 0.0));
  return out;
}

}  // namespace conelab
