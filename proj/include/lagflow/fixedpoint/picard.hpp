/// Reference solution, the solution map Psi, the stopped Picard
/// iteration and the contraction probe.
#pragma once

#include "lagflow/fixedpoint/config.hpp"
#include "lagflow/flow/engine.hpp"
#include "lagflow/lame/solve.hpp"
#include "lagflow/nonlinear/energy.hpp"

#include <memory>
#include <sstream>
#include <string>

namespace lagflow {

/// Everything one path needs that does not change between Picard iterates.
struct FixedPointContext {
  GridPtr grid;
  FluidParams fluid;
  SolveConfig cfg;
  Field rho0;
  Field u0;
  Field N_ext;
  TimeSeries U;  // stochastic convolution on [0, T]
  std::shared_ptr<const LameStepper> stepper;
  std::shared_ptr<const FlowEngine> engine;
};

/// max over boundary slots of |(S(grad u0) - p(rho0) I) N + p_ext N|.
inline double compatibility_check(const LameOperator& op, const Field& u0) {
  const Grid& g = op.grid();
  auto Bu = op.apply_B(u0);
  double m = 0.0;
  for (std::size_t s = 0; s < g.boundary_count(); ++s) {
    double p = op.params().pressure(op.rho0()(g.boundary_nodes()[s], 0));
    m = std::max(m, (Bu[s] - (p - op.params().p_ext) * g.normal(s)).norm());
  }
  return m;
}

/// Traction data (p(rho0) - p_ext) N of the reference problem.
inline BoundaryValues reference_traction(const Field& rho0, const FluidParams& fp) {
  const Grid& g = rho0.grid();
  BoundaryValues out(g.boundary_count());
  for (std::size_t s = 0; s < g.boundary_count(); ++s)
    out[s] = (fp.pressure(rho0(g.boundary_nodes()[s], 0)) - fp.p_ext) * g.normal(s);
  return out;
}

/// Lame solve with f = 0, g = (p(rho0) - p_ext) N and v(0) = u0 on [0, T].
inline TimeSeries solve_reference(const FixedPointContext& ctx) {
  BoundaryValues g = reference_traction(ctx.rho0, ctx.fluid);
  Field zero(ctx.grid, 1);
  return solve_lame(
             *ctx.stepper, [&](std::size_t) { return zero; }, [&](std::size_t) { return g; }, ctx.u0,
             ctx.cfg.steps())
      .v;
}

/// Discrete (|v|^p_{L^p H^{2,q}} + |d_t v|^p_{L^p L^q})^{1/p} over the first `frames` frames.
inline double iteration_norm(const TimeSeries& v, double p, double q, std::size_t frames) {
  frames = std::min(frames, v.size());
  if (frames < 2) return frames == 1 ? norm(v.frames[0], NormKind::H2q, q) : 0.0;
  const double dt = v.times[1] - v.times[0];
  double s = 0.0;
  for (std::size_t n = 0; n < frames; ++n)
    s += trapezoid_weight(n, frames, dt) * std::pow(norm(v.frames[n], NormKind::H2q, q), p);
  for (std::size_t n = 1; n < frames; ++n) {
    Field dv = v.frames[n] - v.frames[n - 1];
    s += dt * std::pow(norm(dv, NormKind::Lq, q) / dt, p);
  }
  return std::pow(s, 1.0 / p);
}

inline TimeSeries series_difference(const TimeSeries& a, const TimeSeries& b, std::size_t frames) {
  frames = std::min({frames, a.size(), b.size()});
  TimeSeries d;
  for (std::size_t n = 0; n < frames; ++n) d.push(a.times[n], a.frames[n] - b.frames[n]);
  return d;
}

/// Flow, density and nonlinearities generated by one velocity iterate, cut at
/// the stopping time.
struct WindowData {
  TimeSeries ubar;
  std::vector<FlowState> states;
  std::vector<MonitorSample> monitor;
  TimeSeries rho;
  TimeSeries F_u;
  TimeSeries F_Gamma;  // extended to all nodes
  std::vector<BoundaryValues> traction;
  double sigma = 0.0;
  bool fired = false;
  bool guard_failed = false;
  double min_density = 0.0;
  bool density_flag = false;
  std::size_t last = 0;  // index of the last frame in the window
};

inline WindowData evaluate_window(const TimeSeries& v, const FixedPointContext& ctx) {
  WindowData w;
  const std::size_t frames = std::min(v.size(), ctx.U.size());
  for (std::size_t n = 0; n < frames; ++n) w.ubar.push(v.times[n], v.frames[n] + ctx.U.frames[n]);
  std::vector<FlowState> states = ctx.engine->states(w.ubar);
  StoppingMonitor mon(ctx.cfg.monitor(), w.ubar.end_time());
  w.last = frames - 1;
  for (std::size_t n = 0; n < frames; ++n) {
    if (mon.append(states[n])) {
      w.last = states[n].valid || n == 0 ? n : n - 1;
      break;
    }
  }
  w.fired = mon.fired();
  w.guard_failed = mon.guard_failed();
  w.sigma = w.fired ? mon.sigma() : w.ubar.end_time();
  w.monitor = mon.history();
  states.resize(w.last + 1);
  w.ubar = w.ubar.head(w.last + 1);
  w.states = std::move(states);
  w.min_density = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n <= w.last; ++n) {
    const FlowState& s = w.states[n];
    const Field& u = w.ubar.frames[n];
    DensityResult dr = density_from_jacobian(ctx.rho0, s.J, ctx.fluid.rho_lo);
    w.min_density = std::min(w.min_density, dr.min);
    w.density_flag = w.density_flag || dr.below_half_floor;
    Field gu = differentiate(u, 1);
    Field hu = differentiate(u, 2);
    Field gZ = differentiate(s.Z, 1);
    Field Fu = assemble_F_u(gu, hu, s.Z, gZ, s.J, ctx.rho0, ctx.fluid);
    Field Fg = assemble_F_Gamma_field(gu, s.Z, s.J, ctx.rho0, ctx.N_ext, ctx.fluid);
    Fu.check_finite("F_u");
    Fg.check_finite("F_Gamma");
    w.F_u.push(s.t, std::move(Fu));
    w.F_Gamma.push(s.t, std::move(Fg));
    w.traction.push_back(assemble_F_Gamma(gu, s.Z, s.J, ctx.rho0, ctx.N_ext, ctx.fluid));
    w.rho.push(s.t, std::move(dr.rho));
  }
  return w;
}

struct PsiResult {
  TimeSeries v;
  WindowData window;
};

/// Psi(v1): flow of v1 + U, then the Lame solve with the resulting F_u, F_Gamma
/// and initial value u0 on [0, sigma].
inline PsiResult apply_Psi(const TimeSeries& v1, const FixedPointContext& ctx) {
  PsiResult r;
  r.window = evaluate_window(v1, ctx);
  const WindowData& w = r.window;
  r.v = solve_lame(
            *ctx.stepper, [&](std::size_t n) { return w.F_u.frames[n]; }, [&](std::size_t n) { return w.traction[n]; },
            ctx.u0, w.last)
            .v;
  return r;
}

/// Non-contraction or ball violation of the Picard iteration.
class PicardError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct SolutionBundle {
  SolveConfig cfg;
  TimeSeries v, U, ubar, rho, v_ref;
  std::vector<FlowState> states;
  std::vector<MonitorSample> monitor;
  TimeSeries F_u, F_Gamma;
  std::vector<EnergySample> energy;
  double tau = 0.0;
  double sigma = 0.0;
  bool fired = false;
  int iterations = 0;
  double kappa = 0.0;
  std::vector<double> differences;  // |v^(m) - v^(m-1)| per iterate
  double v_ref_norm = 0.0;
  double compatibility_residual = 0.0;
  double transformed_residual = 0.0;  // max per-frame residual of the recast system
  double min_density = 0.0;
  bool density_flag = false;
  bool converged = false;
};

namespace detail {

/// max over steps of the scaled residual of
///   (v^{n+1} - v^n)/dt + A v^{n+1} - F_u^{n+1} (interior),  B v^{n+1} - F_Gamma^{n+1} (boundary).
inline double recast_residual(const TimeSeries& v, const WindowData& w, const LameOperator& op) {
  const Grid& g = op.grid();
  const int d = g.dim();
  double m = 0.0;
  const std::size_t frames = std::min(v.size(), w.F_u.size());
  for (std::size_t n = 0; n + 1 < frames; ++n) {
    double dt = v.times[n + 1] - v.times[n];
    Field Av = op.apply_A(v.frames[n + 1]);
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      if (g.is_boundary(i)) continue;
      for (int c = 0; c < d; ++c) {
        double r = (v.frames[n + 1](i, c) - v.frames[n](i, c)) / dt + Av(i, c) - w.F_u.frames[n + 1](i, c);
        m = std::max(m, std::abs(r));
      }
    }
    m = std::max(m, max_boundary_gap(op.apply_B(v.frames[n + 1]), w.traction[n + 1]));
  }
  return m;
}

}  // namespace detail

inline SolutionBundle picard_solve(const FixedPointContext& ctx) {
  ctx.cfg.validate();
  const SolveConfig& cfg = ctx.cfg;
  SolutionBundle b;
  b.cfg = cfg;
  b.U = ctx.U;
  b.v_ref = solve_reference(ctx);
  b.compatibility_residual = compatibility_check(ctx.stepper->op(), ctx.u0);
  b.v_ref_norm = iteration_norm(b.v_ref, cfg.p, cfg.q, b.v_ref.size());
  if (b.v_ref_norm + cfg.r > cfg.R) {
    std::ostringstream os;
    os << "picard: r + |v_ref| = " << cfg.r + b.v_ref_norm << " exceeds R = " << cfg.R;
    throw PicardError(os.str());
  }
  TimeSeries v = b.v_ref;
  int rising = 0;
  for (int m = 1; m <= cfg.max_iter; ++m) {
    PsiResult ps = apply_Psi(v, ctx);
    const std::size_t frames = std::min(ps.v.size(), v.size());
    double diff = iteration_norm(series_difference(ps.v, v, frames), cfg.p, cfg.q, frames);
    double ball = iteration_norm(series_difference(ps.v, b.v_ref, frames), cfg.p, cfg.q, frames);
    b.differences.push_back(diff);
    b.iterations = m;
    if (ball > cfg.r) {
      std::ostringstream os;
      os << "picard: iterate " << m << " left the ball around v_ref (" << ball << " > r = " << cfg.r
         << "); reduce T or delta";
      throw PicardError(os.str());
    }
    if (b.differences.size() >= 2) {
      double prev = b.differences[b.differences.size() - 2];
      double ratio = prev > 0.0 ? diff / prev : 0.0;
      if (prev > 0.0) b.kappa = std::max(b.kappa, ratio);
      rising = ratio >= 1.0 ? rising + 1 : 0;
      if (rising >= 3) {
        std::ostringstream os;
        os << "picard: no contraction (ratio >= 1 for 3 iterates, last difference " << diff
           << "); reduce T or delta";
        throw PicardError(os.str());
      }
    }
    v = std::move(ps.v);
    if (diff <= cfg.tol) {
      b.converged = true;
      break;
    }
  }
  if (!b.converged) {
    std::ostringstream os;
    os << "picard: no convergence in " << cfg.max_iter << " iterates, last difference " << b.differences.back();
    throw PicardError(os.str());
  }

  WindowData w = evaluate_window(v, ctx);
  b.v = v.head(w.last + 1);
  b.ubar = std::move(w.ubar);
  b.states = w.states;
  b.monitor = w.monitor;
  b.rho = w.rho;
  b.F_u = w.F_u;
  b.F_Gamma = w.F_Gamma;
  b.fired = w.fired;
  b.sigma = w.sigma;
  b.tau = std::min(w.sigma, b.v.end_time());
  b.min_density = w.min_density;
  b.density_flag = w.density_flag;
  b.transformed_residual = detail::recast_residual(b.v, w, ctx.stepper->op());
  for (std::size_t n = 0; n < b.states.size(); ++n)
    b.energy.push_back(energy_report(b.rho.frames[n], b.ubar.frames[n], b.states[n].J, b.states[n].Z, ctx.fluid));
  return b;
}

struct ContractionEstimate {
  double kappa = 0.0;
  double window = 0.0;
  double numerator = 0.0;
  double denominator = 0.0;
};

/// |Psi(v1) - Psi(v2)| / |v1 - v2| on the common window.
inline ContractionEstimate contraction_probe(const TimeSeries& v1, const TimeSeries& v2, const FixedPointContext& ctx) {
  PsiResult a = apply_Psi(v1, ctx);
  PsiResult b = apply_Psi(v2, ctx);
  const std::size_t frames = std::min({a.v.size(), b.v.size(), v1.size(), v2.size()});
  ContractionEstimate e;
  e.denominator = iteration_norm(series_difference(v1, v2, frames), ctx.cfg.p, ctx.cfg.q, frames);
  if (!(e.denominator > 0.0)) throw ConfigError("contraction probe: inputs coincide on the window");
  e.numerator = iteration_norm(series_difference(a.v, b.v, frames), ctx.cfg.p, ctx.cfg.q, frames);
  e.kappa = e.numerator / e.denominator;
  e.window = v1.times[frames - 1];
  return e;
}

}  // namespace lagflow
