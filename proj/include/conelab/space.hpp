#pragma once

// Needle densities and the one-dimensional geometric checks: distortion
// coefficients, the MCP(0,N) density inequality, Bishop-Gromov monotonicity
// and volume-cone detection.

#include <array>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "conelab/quad.hpp"

namespace conelab {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

namespace density {
// c x^{N-1} on [0, inf)
struct PowerLaw {
  double c;
  double N;
};
// c x^{N-1} on [0, R]; the needle is the segment [0, R]
struct TruncatedPowerLaw {
  double c;
  double N;
  double R;
};
// c x^{N-1} e^{-a x} on [0, R], R = inf by default
struct PowerLawExp {
  double c;
  double N;
  double a;
  double R = kInfinity;
};
// Interpolated table on [0, nodes.back()]. Log-linear between two positive
// values, linear otherwise. nodes.front() must be 0.
struct Tabulated {
  std::vector<double> nodes;
  std::vector<double> values;
};
}  // namespace density

class Density {
 public:
  using Kind = std::variant<density::PowerLaw, density::TruncatedPowerLaw, density::PowerLawExp,
                            density::Tabulated>;

  explicit Density(Kind kind);

  static Density power_law(double c, double N) { return Density(density::PowerLaw{c, N}); }
  static Density truncated(double c, double N, double R) {
    return Density(density::TruncatedPowerLaw{c, N, R});
  }
  static Density power_law_exp(double c, double N, double a, double R = kInfinity) {
    return Density(density::PowerLawExp{c, N, a, R});
  }
  static Density tabulated(std::vector<double> nodes, std::vector<double> values) {
    return Density(density::Tabulated{std::move(nodes), std::move(values)});
  }

  const Kind& kind() const { return kind_; }
  std::string kind_name() const;

  // h(x). Throws DomainError for x < 0 or, for tables, x beyond the last node.
  double operator()(double x) const;

  // Right end of the needle (inf for unbounded needles).
  double support_end() const;
  // h(x) ~ x^e as x -> 0+.
  double origin_exponent() const;
  // Polynomial growth degree of h at infinity (unbounded needles only).
  double growth_degree() const;
  // Rate of the exponential factor e^{-a x} (0 when absent).
  double exponential_rate() const;
  // Points where h is not smooth.
  std::vector<double> breakpoints() const;

 private:
  Kind kind_;
};

double eval_density(const Density& d, double x);

// m(B_rho) = integral of h over [0, rho) intersected with the needle.
double ball_volume(const Density& d, double rho);

// An integrand g(x) to be integrated against the needle measure h(x) dx.
struct NeedleIntegrand {
  std::function<double(double)> g;
  double origin_exponent = 0.0;  // g ~ x^e at 0
  // Tail of g: |g| <~ x^tail_degree exp(-gaussian_rate x^2); zero past support_end.
  double tail_degree = 0.0;
  double gaussian_rate = 0.0;
  double support_end = kInfinity;
  double scale = 1.0;  // where the asymptotic regime of g starts
  std::vector<double> breakpoints;
};

IntegralResult integrate_on_needle(const Density& d, const NeedleIntegrand& integrand,
                                   const QuadratureConfig& cfg = {});

// ---------------------------------------------------------------------------
// Distortion coefficients

struct DistortionInput {
  double K;
  double N;
  double t;
  double theta;

  void validate() const;
};

// sigma^{(t)}_{K,N}(theta); +inf is a regular return value.
double sigma(const DistortionInput& in);
// tau^{(t)}_{K,N}(theta) = t^{1/N} sigma^{(t)}_{K,N-1}(theta)^{(N-1)/N}, N >= 1.
double tau(const DistortionInput& in);

// ---------------------------------------------------------------------------
// MCP(0,N) density inequality, sampled

struct McpGrid {
  std::size_t x0_points = 64;
  std::size_t x1_points = 64;
  std::size_t t_points = 32;
  // Sample box [0, box_end]^2; default min(support_end, 20).
  std::optional<double> box_end;
};

struct McpSlackReport {
  double min_slack = 0.0;
  std::array<double, 3> argmin{};  // (x0, x1, t)
  std::size_t samples_tested = 0;
  double box_end = 0.0;
  double scale = 0.0;  // max h over the sampled x0 grid

  // min_slack >= -rel_tol * scale
  bool satisfied(double rel_tol = 1e-12) const;
};

McpSlackReport check_mcp_density(const Density& d, double N, const McpGrid& grid = {});

// ---------------------------------------------------------------------------
// Bishop-Gromov profile and volume cones

struct BishopGromovProfile {
  std::vector<double> radii;
  std::vector<double> ratios;  // m(B_rho) / rho^N
  bool monotone_nonincreasing = false;
};

BishopGromovProfile bishop_gromov_profile(const Density& d, double N, std::span<const double> radii,
                                          double rel_tol = 1e-12);

struct ConeFit {
  bool is_cone = false;
  double A = 0.0;  // m(B_r0) / (omega_N r0^N) at the smallest radius
  double max_rel_deviation = 0.0;
  std::vector<double> radii_tested;
  double tolerance = 0.0;
};

inline constexpr double kDefaultConeTolerance = 1e-8;

// 41 log-spaced radii in [1e-2, 1e2].
std::vector<double> default_cone_radii();

ConeFit cone_fit(const Density& d, double N, std::span<const double> radii,
                 double tol = kDefaultConeTolerance);

}  // namespace conelab
