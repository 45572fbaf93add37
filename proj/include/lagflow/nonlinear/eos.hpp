/// Barotropic pressure law, pressure potential, and the density
/// recovered from the Jacobian.
#pragma once

#include "lagflow/fields/field.hpp"
#include "lagflow/lame/params.hpp"

#include <limits>
#include <sstream>

namespace lagflow {

/// p(rho) = a rho^gamma and P(rho) = a rho^gamma / (gamma - 1), so that
/// P'(rho) rho - P(rho) = p(rho).
class EquationOfState {
 public:
  EquationOfState(double a, double gamma) : a_(a), gamma_(gamma) {
    if (!(a > 0.0)) throw ConfigError("eos: a must be > 0");
    if (!(gamma > 1.0)) throw ConfigError("eos: gamma must be > 1");
  }
  explicit EquationOfState(const FluidParams& fp) : EquationOfState(fp.a, fp.gamma) {}

  double a() const { return a_; }
  double gamma() const { return gamma_; }

  double p(double rho) const { return a_ * std::pow(rho, gamma_); }
  double dp(double rho) const { return a_ * gamma_ * std::pow(rho, gamma_ - 1.0); }
  double P(double rho) const { return a_ * std::pow(rho, gamma_) / (gamma_ - 1.0); }
  double dP(double rho) const { return a_ * gamma_ * std::pow(rho, gamma_ - 1.0) / (gamma_ - 1.0); }

  Field pressure(const Field& rho) const { return map(rho, [this](double r) { return p(r); }); }
  Field pressure_potential(const Field& rho) const { return map(rho, [this](double r) { return P(r); }); }

 private:
  template <class Fn>
  Field map(const Field& rho, Fn&& fn) const {
    if (rho.rank() != 0) throw Error("eos: scalar density field required");
    Field out(rho.grid_ptr(), 0);
    for (std::size_t n = 0; n < rho.node_count(); ++n) {
      double r = rho(n, 0);
      if (!(r > 0.0)) {
        std::ostringstream os;
        os << "eos: nonpositive density " << r << " at node " << n;
        throw NumericalError(os.str());
      }
      out(n, 0) = fn(r);
    }
    return out;
  }

  double a_, gamma_;
};

inline Field pressure(const Field& rho, const FluidParams& fp) { return EquationOfState(fp).pressure(rho); }
inline Field pressure_potential(const Field& rho, const FluidParams& fp) {
  return EquationOfState(fp).pressure_potential(rho);
}

struct DensityResult {
  Field rho;
  double min = 0.0;
  double max = 0.0;
  bool below_half_floor = false;  // min rho < rho_lo / 2
};

/// rho = rho0 / J. Any J <= 0 is a hard failure.
inline DensityResult density_from_jacobian(const Field& rho0, const Field& J, double rho_lo) {
  if (rho0.rank() != 0 || J.rank() != 0) throw Error("density: scalar fields required");
  DensityResult r;
  r.rho = Field(J.grid_ptr(), 0);
  r.min = std::numeric_limits<double>::infinity();
  r.max = -r.min;
  for (std::size_t n = 0; n < J.node_count(); ++n) {
    double j = J(n, 0);
    if (!(j > 0.0)) {
      std::ostringstream os;
      os << "density: Jacobian " << j << " at node " << n << " is not positive";
      throw NumericalError(os.str());
    }
    double v = rho0(n, 0) / j;
    r.rho(n, 0) = v;
    r.min = std::min(r.min, v);
    r.max = std::max(r.max, v);
  }
  r.below_half_floor = r.min < 0.5 * rho_lo;
  return r;
}

}  // namespace lagflow
