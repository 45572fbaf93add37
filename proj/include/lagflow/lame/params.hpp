#pragma once

#include "lagflow/core/types.hpp"

#include <cmath>

namespace lagflow {

/// Physical constants of the barotropic fluid.
struct FluidParams {
  double mu = 1.0;
  double lambda = 0.5;
  double a = 1.0;
  double gamma = 1.4;
  double p_ext = 1.0;
  double rho_lo = 1.0;  // lower density bound
  double rho_hi = 2.0;  // upper density bound

  void validate() const {
    if (!(mu > 0.0)) throw ConfigError("fluid.mu must be > 0");
    if (!(2.0 * mu + 3.0 * lambda > 0.0)) throw ConfigError("fluid: 2 mu + 3 lambda must be > 0");
    if (!(2.0 * mu + lambda > 0.0)) throw ConfigError("fluid: 2 mu + lambda must be > 0");
    if (!(a > 0.0)) throw ConfigError("fluid.a must be > 0");
    if (!(gamma > 1.0)) throw ConfigError("fluid.gamma must be > 1");
    if (!(p_ext >= 0.0)) throw ConfigError("fluid.p_ext must be >= 0");
    if (!(rho_lo > 0.0)) throw ConfigError("fluid.rho_lo must be > 0");
    if (!(rho_hi >= rho_lo)) throw ConfigError("fluid.rho_hi must be >= fluid.rho_lo");
  }

  double pressure(double rho) const { return a * std::pow(rho, gamma); }
};

}  // namespace lagflow
