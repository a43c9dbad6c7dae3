#pragma once

// Finite radial ensembles of cone needles c_a x^{N-1} dx with quotient
// weights q_a: assembly, the reweighting m~_a = m_a / C_a, and the
// aggregation chains for HPW and CKN.

#include <optional>
#include <variant>
#include <vector>

#include "conelab/functionals.hpp"
#include "conelab/space.hpp"

namespace conelab {

struct Ray {
  double c;
  double q;
};

struct NeedleEnsemble {
  double N;
  std::vector<Ray> rays;

  // N > 1, c > 0, q > 0, sum q = 1 to 1e-12.
  void validate() const;
  Density ray_density(std::size_t i) const { return Density::power_law(rays[i].c, N); }
  // The assembled cone: sum q c x^{N-1}.
  Density assembled_density() const;
};

// sum_a q_a c_a rho^N / N
double assemble(const NeedleEnsemble& e, double rho);

struct DisintegrationCheck {
  double max_rel_deviation = 0.0;
  std::vector<double> radii;
  std::vector<double> assembled;
  std::vector<double> per_ray_sum;
};

// Compares assemble() with sum_a w_a m_a(B_rho), where w = weights if given
// (unnormalized perturbations allowed) and w = q otherwise.
DisintegrationCheck verify_disintegration(const NeedleEnsemble& e, const std::vector<double>& radii,
                                          const std::optional<std::vector<double>>& weights = std::nullopt);

// One test function for all rays (radial u), or one per ray.
using RayFunctions = std::variant<TestFunction, std::vector<TestFunction>>;

struct ReweightResult {
  std::vector<double> C;                 // int d^2 u^2 dm_a
  std::vector<double> tilde_q;           // C_a q_a (0 for dropped rays)
  std::vector<double> normalized_moment; // int d^2 u^2 dm~_a, expected 1
  std::vector<std::size_t> dropped;      // rays with C_a = 0
  double tilde_q_total = 0.0;
  double total_moment = 0.0;             // int d^2 u^2 dm, computed on the assembled space
  double max_moment_deviation = 0.0;     // max |normalized_moment - 1|
  double total_rel_deviation = 0.0;      // |tilde_q_total - total_moment| / total_moment
  double reassembly_rel_deviation = 0.0; // sum tilde_q m~_a(B_rho) vs m(B_rho)
};

ReweightResult reweight(const NeedleEnsemble& e, const RayFunctions& u,
                        const std::vector<double>& test_radii = default_cone_radii(), const QuadratureConfig& cfg = {});

struct HpwChainReport {
  // Per ray: D_a C_a / M0_a^2 - N^2/4 (inequality 3-4 in quotient form).
  std::vector<double> ray_slack;
  // Per ray, reweighted: D~_a * 1 - (N^2/4) M0~_a^2, in raw units of m~_a.
  std::vector<double> reweighted_slack;
  // Integrated reweighted inequality, times q~(Q) / M0^2.
  double integrated_slack = 0.0;
  // Cauchy-Schwarz across rays: (sum q~ M0~^2)(sum q~) - (sum q~ M0~)^2, over M0^2.
  double cauchy_schwarz_slack = 0.0;
  // D M2 / M0^2 - N^2/4 for the assembled space.
  double final_slack = 0.0;
  // |final - (integrated + N^2/4 cauchy_schwarz)|
  double chain_identity_residual = 0.0;
  double dirichlet = 0.0;
  double moment2 = 0.0;
  double mass = 0.0;
  std::vector<std::size_t> dropped;
};

HpwChainReport aggregate_hpw(const NeedleEnsemble& e, const RayFunctions& u, const QuadratureConfig& cfg = {});

struct RayCknCheck {
  double lhs = 0.0;     // ((N-q)/p) int |u|^p d^{-q} dm_a
  double middle = 0.0;  // int |u|^{p-1} d^{1-q} |u'| dm_a
  double rhs = 0.0;     // sqrt(int |u'|^2 dm_a) sqrt(int |u|^{2p-2} d^{2-2q} dm_a)
  double slack = 0.0;   // rhs - lhs
  double first_slack = 0.0;   // middle - lhs
  double second_slack = 0.0;  // rhs - middle
  double rel_slack = 0.0;     // slack / rhs
  double error = 0.0;
};

RayCknCheck ray_ckn_check(const Ray& ray, double N, const CknParams& params, const TestFunction& u,
                          const QuadratureConfig& cfg = {});

}  // namespace conelab
