/// Energy and dissipation in label variables, the continuity-equation
/// cross-check, and surrogate norms of the nonlinearities.
#pragma once

#include "lagflow/fields/norms.hpp"
#include "lagflow/lame/operator.hpp"
#include "lagflow/nonlinear/assemble.hpp"

namespace lagflow {

struct EnergySample {
  double energy = 0.0;       // int (rho |u|^2 / 2 + P(rho)) J dy + p_ext int J dy
  double dissipation = 0.0;  // int S(grad_x u) : grad_x u J dy
  double volume = 0.0;       // int J dy
};

/// Energy with grad_x u = grad u Z and volume element J dy.
inline EnergySample energy_report(const Field& rho, const Field& u, const Field& J, const Field& Z,
                                  const FluidParams& fp) {
  const Grid& g = u.grid();
  const int d = g.dim();
  EquationOfState eos(fp);
  Field gu = differentiate(u, 1);
  EnergySample e;
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    double w = g.weight(n) * J(n, 0);
    double r = rho(n, 0);
    if (!(r > 0.0)) throw NumericalError("energy: nonpositive density at node " + std::to_string(n));
    Vec v = u.vec(n);
    Mat Gx = gu.mat(n) * Z.mat(n);
    Mat S = stress(Gx, fp);
    double sd = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) sd += S(i, j) * Gx(i, j);
    e.energy += w * (0.5 * r * v.squaredNorm() + eos.P(r));
    e.dissipation += w * sd;
    e.volume += w;
  }
  e.energy += fp.p_ext * e.volume;
  return e;
}

struct ContinuityCheck {
  TimeSeries rho_ode;
  double max_deviation = 0.0;  // max over frames of |rho_ode - rho0 / J|_inf
};

/// RK2 solution of d_t rho + rho grad u : Z^T = 0 compared with rho0 / J.
inline ContinuityCheck continuity_oracle(const TimeSeries& ubar, const std::vector<FlowState>& states,
                                         const Field& rho0) {
  ContinuityCheck c;
  c.rho_ode = transport_scalar_ode(ubar, states, rho0, -1.0);
  for (std::size_t n = 0; n < c.rho_ode.size(); ++n) {
    const Field& r = c.rho_ode.frames[n];
    const Field& J = states[n].J;
    for (std::size_t i = 0; i < r.node_count(); ++i)
      c.max_deviation = std::max(c.max_deviation, std::abs(r(i, 0) - rho0(i, 0) / J(i, 0)));
  }
  return c;
}

struct NonlinearReport {
  double F_u = 0.0;        // L^p(0, tau; L^q)
  double F_Gamma = 0.0;    // H^{theta,p}(0, tau; L^q) + L^p(0, tau; H^{1,q}) of the extended field
  double M_rho0 = 0.0;     // |rho0|_{H^{1,q}}
  double M_rho0_inv = 0.0; // |1 / rho0|_{H^{1,q}}
  double M_sto = 0.0;      // |U|_{L^p(0, tau; H^{2,q})}
  double theta = 0.0;
  double window = 0.0;
  // F_u / (delta (R + M_sto) + tau^{1/p}); an empirical constant
  double fitted_C_u = 0.0;
  double fitted_C_Gamma = 0.0;
};

struct NormWindow {
  double p = 4.0;
  double q = 8.0;
  double delta = 0.2;
  double R = 2.0;
};

/// Surrogate norms of F_u and F_Gamma on the frames given (the stopped window),
/// with theta = 1/2 - 1/(2q).
inline NonlinearReport nonlinearity_norm_report(const TimeSeries& F_u, const TimeSeries& F_Gamma, const Field& rho0,
                                                const TimeSeries& U, const NormWindow& w) {
  NonlinearReport r;
  r.theta = 0.5 - 0.5 / w.q;
  r.window = F_u.end_time();
  if (F_u.size() > 1) {
    r.F_u = lp_time_norm(F_u, NormKind::Lq, w.q, w.p);
    FractionalTimeNorm fr(r.theta, w.p, NormKind::Lq, w.q);
    for (std::size_t n = 0; n < F_Gamma.size(); ++n) fr.append(F_Gamma.times[n], F_Gamma.frames[n]);
    r.F_Gamma = fr.value() + lp_time_norm(F_Gamma, NormKind::H1q, w.q, w.p);
  }
  r.M_rho0 = norm(rho0, NormKind::H1q, w.q);
  Field inv(rho0.grid_ptr(), 0);
  for (std::size_t n = 0; n < rho0.node_count(); ++n) inv(n, 0) = 1.0 / rho0(n, 0);
  r.M_rho0_inv = norm(inv, NormKind::H1q, w.q);
  if (U.size() > 1) r.M_sto = lp_time_norm(U.head(F_u.size()), NormKind::H2q, w.q, w.p);
  double tau_term = std::pow(r.window, 1.0 / w.p);
  double den_u = w.delta * (w.R + r.M_sto) + tau_term;
  double den_g = w.delta * (1.0 + w.R + r.M_sto) + tau_term;
  r.fitted_C_u = den_u > 0.0 ? r.F_u / den_u : 0.0;
  r.fitted_C_Gamma = den_g > 0.0 ? r.F_Gamma / den_g : 0.0;
  return r;
}

}  // namespace lagflow
