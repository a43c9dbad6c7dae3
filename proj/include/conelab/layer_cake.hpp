#pragma once

// Cavalieri check: int g dm against int_0^{g(0)} m({g > t}) dt for a
// nonnegative, nonincreasing g on a needle.

#include "conelab/quad.hpp"
#include "conelab/space.hpp"

namespace conelab {

struct LayerCakeResult {
  double direct = 0.0;
  double direct_error = 0.0;
  double layer_cake = 0.0;
  double layer_cake_error = 0.0;
  double rel_deviation = 0.0;
};

// level_singularity: m({g > t}) ~ t^e as t -> 0+ (log growth counts as any
// e slightly below 0). Throws std::invalid_argument when g is negative or
// increasing somewhere on the probe grid.
LayerCakeResult layer_cake_check(const NeedleIntegrand& g, const Density& d, const QuadratureConfig& cfg = {},
                                 double level_singularity = -0.5);

}  // namespace conelab
