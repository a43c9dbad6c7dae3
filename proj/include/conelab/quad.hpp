#pragma once

// Integration on [0, inf) for integrands with a power-law singularity at the
// origin and Gaussian, power or compact decay at infinity.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <variant>

namespace conelab {

struct QuadratureConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-12;
  std::size_t max_subdivisions = std::size_t{1} << 16;
  // Tail mass allowed past the truncation radius, relative to the integrand
  // scale sampled on [0, R].
  double tail_tol = 1e-12;
  // Mesh grading toward singular endpoints: nodes at R (i/n)^grading_exponent.
  double grading_exponent = 3.0;

  void validate() const;
};

struct IntegralResult {
  double value = 0.0;
  double error_estimate = 0.0;
  // +inf when the tail was mapped onto a finite interval instead of cut.
  double truncation_radius = 0.0;
  std::size_t subdivisions_used = 0;
};

namespace decay {
// |f(x)| <~ x^prefactor_degree * exp(-rate x^2)
struct Gaussian {
  double rate;
  double prefactor_degree = 0.0;
};
// |f(x)| <~ x^-exponent for x beyond scale; exponent > 1
struct Power {
  double exponent;
  double scale = 1.0;
};
// f vanishes beyond radius
struct Compact {
  double radius;
};
}  // namespace decay

using DecayClass = std::variant<decay::Gaussian, decay::Power, decay::Compact>;

using Integrand = std::function<double(double)>;

// Integral of f over [0, inf). f(x) ~ x^singularity_exponent near 0 (must be
// > -1). Breakpoints mark kinks or jumps of f and become panel boundaries.
IntegralResult integrate_halfline(const Integrand& f,
                                  double singularity_exponent,
                                  const DecayClass& decay,
                                  const QuadratureConfig& cfg = {},
                                  std::span<const double> breakpoints = {});

// Integral of f over [a, b]. When singularity_exponent_at_a is set the
// interval is graded toward a.
IntegralResult integrate_interval(const Integrand& f, double a, double b,
                                  const QuadratureConfig& cfg = {},
                                  std::optional<double> singularity_exponent_at_a = std::nullopt,
                                  std::span<const double> breakpoints = {});

// Gamma function for x > 0.
double gamma_fn(double x);

// Volume of the unit ball in R^N, pi^{N/2} / Gamma(N/2 + 1), for real N > 0.
double unit_ball_volume(double N);

}  // namespace conelab
