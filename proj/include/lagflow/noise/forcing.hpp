/// Finite-rank additive forcing: M spatial modes with amplitudes,
/// each driven by its own scalar Brownian path.
#pragma once

#include "lagflow/fields/field.hpp"
#include "lagflow/noise/brownian.hpp"

#include <vector>

namespace lagflow {

struct StochasticForcing {
  std::vector<Field> modes;
  std::vector<double> amplitudes;

  int count() const { return static_cast<int>(modes.size()); }

  void validate() const {
    if (modes.size() != amplitudes.size()) throw ConfigError("forcing: one amplitude per mode");
    for (const auto& m : modes) {
      if (m.rank() != 1) throw ConfigError("forcing: modes must be vector fields");
      m.check_finite("forcing mode");
    }
  }

  /// sum_m amp_m f_m dbeta_m for step n of the bundle.
  Field increment(const BrownianBundle& b, std::size_t n, const GridPtr& grid) const {
    Field out(grid, 1);
    for (int m = 0; m < count(); ++m) out.axpy(amplitudes[m] * b.mode_increment(m, n), modes[m]);
    return out;
  }
};

}  // namespace lagflow
