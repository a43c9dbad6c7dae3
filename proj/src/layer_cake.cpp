#include "conelab/layer_cake.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "conelab/errors.hpp"
#include "conelab/grids.hpp"

namespace conelab {

namespace {

void check_monotone(const NeedleIntegrand& g, double end) {
  std::vector<double> probes{0.0};
  for (double x : log_spaced(1e-6, 1e3, 256)) {
    if (x < end) probes.push_back(x);
  }
  double prev = g.g(0.0);
  for (double x : probes) {
    const double v = g.g(x);
    if (!(v >= 0.0)) throw std::invalid_argument("layer cake needs a nonnegative integrand; g(" + std::to_string(x) + ") < 0");
    if (v > prev * (1.0 + 1e-12)) {
      throw std::invalid_argument("layer cake needs a nonincreasing integrand; g increases near x=" + std::to_string(x));
    }
    prev = v;
  }
}

// sup {x : g(x) > t}, for nonincreasing g, capped at the needle end.
double level_radius(const NeedleIntegrand& g, double t, double end) {
  if (std::isfinite(end) && g.g(end) > t) return end;
  double lo = 0.0;
  double hi = 1.0;
  while (g.g(hi) > t) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw QuadratureError("level set of the layer-cake integrand is unbounded");
    if (hi >= end) {
      hi = end;
      break;
    }
  }
  for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g.g(mid) > t) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

LayerCakeResult layer_cake_check(const NeedleIntegrand& g, const Density& d, const QuadratureConfig& cfg,
                                 double level_singularity) {
  const double end = std::min(g.support_end, d.support_end());
  check_monotone(g, end);
  const double top = g.g(0.0);
  if (!(std::isfinite(top) && top > 0.0)) throw std::invalid_argument("layer cake needs 0 < g(0) < inf");

  const auto direct = integrate_on_needle(d, g, cfg);
  const auto layered = integrate_interval(
      [&](double t) { return ball_volume(d, level_radius(g, t, end)); }, 0.0, top, cfg, level_singularity);

  LayerCakeResult out;
  out.direct = direct.value;
  out.direct_error = direct.error_estimate;
  out.layer_cake = layered.value;
  out.layer_cake_error = layered.error_estimate;
  out.rel_deviation = std::abs(direct.value - layered.value) / std::abs(direct.value);
  return out;
}

}  // namespace conelab
