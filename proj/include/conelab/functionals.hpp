#pragma once

// HPW and CKN functionals on a needle, the two extremal families, and the
// moment functions T(lambda), P(lambda).

#include <cstdint>
#include <functional>
#include <random>
#include <variant>
#include <vector>

#include "conelab/quad.hpp"
#include "conelab/space.hpp"

namespace conelab {

// Piecewise-linear function on [0, nodes.back()], zero beyond. nodes[0] = 0,
// values.back() = 0.
struct GridFunction {
  std::vector<double> nodes;
  std::vector<double> values;

  void validate() const;
  double operator()(double x) const;
  // Right derivative (slope of the segment containing x); 0 past the support.
  double slope(double x) const;
};

// |u'| per segment.
std::vector<double> lip_profile(const GridFunction& u);

struct CknParams {
  double p;
  double q;
  double N;

  // 0 < q < 2 < p and 2 < N < 2(p-q)/(p-2)
  static bool admissible(double p, double q, double N);
  static CknParams make(double p, double q, double N);
  void validate() const;

  double alpha() const { return (N - q) / (2.0 - q) - p / (p - 2.0); }
  double sharp_constant() const { return (N - q) * (N - q) / (p * p); }
  // Decay exponent of the extremal: u ~ x^{-gamma}.
  double gamma() const { return (2.0 - q) / (p - 2.0); }
};

// e^{-lambda x^2}
struct HpwExtremal {
  double lambda;
  double operator()(double x) const;
  double slope(double x) const;
};

// (lambda + x^{2-q})^{1/(2-p)}
struct CknExtremal {
  CknParams params;
  double lambda;
  double operator()(double x) const;
  double slope(double x) const;
};

HpwExtremal hpw_extremal(double lambda);
CknExtremal ckn_extremal(const CknParams& params, double lambda);

using TestFunction = std::variant<GridFunction, HpwExtremal, CknExtremal>;

// Asymptotic description of a test function, used to declare integrands.
struct Profile {
  std::function<double(double)> value;
  std::function<double(double)> slope;
  double value_origin = 0.0;  // |u| ~ x^e at 0
  double slope_origin = 0.0;  // |u'| ~ x^e at 0
  double value_tail = 0.0;    // power-law degree of |u| at infinity
  double slope_tail = 0.0;
  double gaussian_rate = 0.0;  // both |u| and |u'| carry e^{-rate x^2}
  double support_end = kInfinity;
  double scale = 1.0;
  std::vector<double> breakpoints;
};

Profile profile_of(const TestFunction& u);

// g(x) = |u|^a |u'|^b x^c, with exponents declared for the quadrature.
NeedleIntegrand power_integrand(const Profile& prof, double a, double b, double c);

// ---------------------------------------------------------------------------

struct HpwReport {
  double dirichlet = 0.0;
  double moment2 = 0.0;
  double mass = 0.0;
  double quotient = 0.0;
  double sharp_constant = 0.0;
  double slack = 0.0;
  double dirichlet_error = 0.0;
  double moment2_error = 0.0;
  double mass_error = 0.0;
  double quotient_error = 0.0;
};

HpwReport hpw_report(const Density& d, double N, const TestFunction& u, const QuadratureConfig& cfg = {});

struct CknReport {
  double dirichlet = 0.0;
  double singular_moment = 0.0;
  double ckn_mass = 0.0;
  double quotient = 0.0;
  double sharp_constant = 0.0;
  double slack = 0.0;
  double dirichlet_error = 0.0;
  double singular_moment_error = 0.0;
  double ckn_mass_error = 0.0;
  double quotient_error = 0.0;
};

CknReport ckn_report(const Density& d, const CknParams& params, const TestFunction& u,
                     const QuadratureConfig& cfg = {});

// ---------------------------------------------------------------------------
// Truncated approximants u_{lambda,k}, sampled on a uniform grid over [0, k+1].

inline const std::vector<double> kDefaultApproximantK = {2.0, 4.0, 8.0, 16.0};

GridFunction hpw_approximant(double lambda, double k, std::size_t nodes_per_unit = 64);
GridFunction ckn_approximant(const CknParams& params, double lambda, double k, std::size_t nodes_per_unit = 64);

// Cutoff max{0, min{0, k - x} + 1}.
double approximant_cutoff(double k, double x);

// ---------------------------------------------------------------------------

struct MomentHpw {
  double T = 0.0;            // 4 lambda k omega_N int rho^{N+1} e^{-2 lambda rho^2}
  double T_error = 0.0;
  double T_prime = 0.0;      // -2 int d^2 e^{-2 lambda d^2} dm
  double T_prime_error = 0.0;
  double T_prime_fd = 0.0;   // central difference of T, step 1e-4 lambda
  double closed_form = 0.0;  // (pi/2)^{N/2} k lambda^{-N/2}
  // |-lambda T' - (N/2) T| / T for the two derivatives
  double identity_residual = 0.0;
  double identity_residual_fd = 0.0;
};

MomentHpw moment_T_hpw(double N, double k, double lambda, const QuadratureConfig& cfg = {});

struct HpwFamilySlack {
  double slack = 0.0;  // 2 lambda M2 / M0 - N/2
  double M0 = 0.0;     // P(lambda)
  double M2 = 0.0;
  double M0_error = 0.0;
  double M2_error = 0.0;
  double slack_error = 0.0;
};

HpwFamilySlack hpw_family_slack(const Density& d, double N, double lambda, const QuadratureConfig& cfg = {});

// P(lambda) = int e^{-2 lambda d^2} dm, directly and as
// 4 lambda int m(B_rho) rho e^{-2 lambda rho^2} d rho.
IntegralResult p_direct(const Density& d, double lambda, const QuadratureConfig& cfg = {});
IntegralResult p_layer_cake(const Density& d, double lambda, const QuadratureConfig& cfg = {});

struct MomentCkn {
  double T = 0.0;
  double T_error = 0.0;
  double T_doubled = 0.0;  // T(2 lambda)
  double ratio = 0.0;      // T(2 lambda) / T(lambda)
  double expected_ratio = 0.0;  // 2^alpha
  double ratio_rel_deviation = 0.0;
  double T_prime = 0.0;  // -int (lambda + d^{2-q})^{(2p-2)/(2-p)} d^{-q} dm
  double T_prime_error = 0.0;
  double alpha = 0.0;
  double identity_residual = 0.0;  // |lambda T' - alpha T| / |alpha T|
};

MomentCkn moment_T_ckn(const CknParams& params, double k, double lambda, const QuadratureConfig& cfg = {});

struct CknFamilySlack {
  double lhs = 0.0;  // ((2-q)/(p-2)) I1
  double rhs = 0.0;  // ((N-q)/p) I2
  double difference = 0.0;
  double slack = 0.0;  // (lhs - rhs) / I2
  double I1 = 0.0;
  double I2 = 0.0;
  double I1_error = 0.0;
  double I2_error = 0.0;
  double slack_error = 0.0;
};

CknFamilySlack ckn_family_slack(const Density& d, const CknParams& params, double lambda,
                                const QuadratureConfig& cfg = {});

// ---------------------------------------------------------------------------

// Nonnegative nodal values uniform in [0,1) on 17 uniform nodes over [0, 4];
// last value 0.
GridFunction random_grid_function(std::mt19937_64& rng, std::size_t nodes = 17, double support = 4.0);

// Nodal values 0.1 + 0.9 U on the given nodes; last value 0.
GridFunction random_positive_grid_function(std::mt19937_64& rng, std::vector<double> nodes);

// Hat of height 1 centred at nodes.back()/2, vanishing at 0 and at the end.
GridFunction tent_function(std::vector<double> nodes);

// Nodes 0, then n-1 geometric points from lo to hi.
std::vector<double> geometric_grid(double lo, double hi, std::size_t n);

}  // namespace conelab
