#pragma once

#include "lagflow/flow/monitor.hpp"

#include <cmath>
#include <cstdint>

namespace lagflow {

/// Exponents, thresholds and iteration controls of one pathwise solve.
struct SolveConfig {
  double p = 4.0;
  double q = 8.0;
  double theta = 0.4375;  // 1/2 - 1/(2q)
  double delta = 0.2;
  double delta0 = 0.2;
  double eps_star = 0.25;
  double R = 2.0;
  double r = 1.0;
  double T = 0.05;
  double dt = 1e-3;
  double tol = 1e-10;
  int max_iter = 30;
  double eps = 0.1;  // regularity tag of the forcing modes; recorded only
  double C_monitor = 1.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(p > 2.0)) throw ConfigError("solve.p must be > 2");
    if (!(q > 3.0)) throw ConfigError("solve.q must be > 3");
    if (!(2.0 / p + 3.0 / q < 1.0)) throw ConfigError("solve: 2/p + 3/q must be < 1");
    monitor().validate();
    if (!(R > 0.0)) throw ConfigError("solve.R must be > 0");
    if (!(r > 0.0)) throw ConfigError("solve.r must be > 0");
    if (!(T > 0.0)) throw ConfigError("solve.T must be > 0");
    if (!(dt > 0.0)) throw ConfigError("solve.dt must be > 0");
    double k = T / dt;
    if (std::abs(k - std::round(k)) > 1e-9 * k) throw ConfigError("solve: dt must divide T");
    if (!(tol > 0.0)) throw ConfigError("solve.tol must be > 0");
    if (max_iter < 1) throw ConfigError("solve.max_iter must be >= 1");
    if (!(C_monitor > 0.0)) throw ConfigError("solve.C_monitor must be > 0");
  }

  std::size_t steps() const { return static_cast<std::size_t>(std::llround(T / dt)); }

  MonitorConfig monitor() const { return MonitorConfig{delta, delta0, eps_star, p, q, theta}; }
};

}  // namespace lagflow
