/// Builds grid, data, noise, operators and the fixed-point context of
/// one path from a run configuration, and runs the full pipeline.
#pragma once

#include "lagflow/driver/config.hpp"
#include "lagflow/eulerian/output.hpp"

#include <memory>
#include <optional>

namespace lagflow {

/// Transport fields named by the configuration; mode k uses wave numbers
/// (1 + k / 2, 1 + k % 2) for the stream kind.
inline TransportField make_transport(const RunConfig& rc) {
  const int d = static_cast<int>(rc.integer("grid.dim"));
  const int K = static_cast<int>(rc.integer("noise.K"));
  if (K == 0) return TransportField::none(d);
  const std::string kind = rc.str("noise.kind");
  const double amp = rc.num("noise.amplitude");
  const double lo = rc.num("grid.lower"), hi = rc.num("grid.upper");
  std::vector<TransportKind> modes;
  for (int k = 0; k < K; ++k) {
    if (kind == "stream") {
      modes.emplace_back(transport::StreamFunction{amp, 1.0 + k / 2, 1.0 + k % 2});
    } else if (kind == "rotation") {
      Vec axis = Vec::Zero(d);
      if (d == 3) axis[k % 3] = 1.0;
      modes.emplace_back(transport::Rotation{Vec::Constant(d, 0.5 * (lo + hi)), amp, axis});
    } else {
      Vec b = Vec::Zero(d);
      b[k % d] = amp;
      modes.emplace_back(transport::Constant{b});
    }
  }
  double pad = 0.5 * (hi - lo);
  return TransportField(d, std::move(modes), Vec::Constant(d, lo - pad), Vec::Constant(d, hi + pad));
}

/// M forcing modes 2 sin(k1 pi y1) sin(k2 pi y2) e_{m mod dim}, unit L^2 norm on the unit box.
inline StochasticForcing make_forcing(const RunConfig& rc, const GridPtr& g) {
  StochasticForcing f;
  const int M = static_cast<int>(rc.integer("forcing.M"));
  const int d = g->dim();
  const double lo = rc.num("grid.lower"), L = rc.num("grid.upper") - lo;
  for (int m = 0; m < M; ++m) {
    const double k1 = 1.0 + m / d, k2 = 1.0;
    const int comp = m % d;
    f.modes.push_back(Field::vector(g, [&](const Vec& y) {
      Vec v = Vec::Zero(d);
      double s = 2.0;
      s *= std::sin(k1 * M_PI * (y[0] - lo) / L) * std::sin(k2 * M_PI * (y[1] - lo) / L);
      if (d == 3) s *= std::sqrt(2.0) * std::sin(M_PI * (y[2] - lo) / L);
      v[comp] = s;
      return v;
    }));
    f.amplitudes.push_back(rc.num("forcing.amplitude"));
  }
  return f;
}

inline Field make_initial_velocity(const RunConfig& rc, const GridPtr& g) {
  if (rc.str("initial.kind") == "equilibrium") return Field(g, 1);
  const double a = rc.num("initial.amplitude");
  const double lo = rc.num("grid.lower"), L = rc.num("grid.upper") - lo;
  return Field::vector(g, [&](const Vec& y) {
    Vec v = Vec::Zero(g->dim());
    v[0] = a;
    for (int k = 0; k < g->dim(); ++k) v[0] *= std::sin(M_PI * (y[k] - lo) / L);
    return v;
  });
}

/// One path: data, noise, operators and the fixed-point context.
struct Setup {
  RunConfig config;
  GridPtr grid;
  FluidParams fluid;
  SolveConfig cfg;
  TransportField Q;
  StochasticForcing forcing;
  BrownianBundle W;
  Field rho0, u0;
  std::shared_ptr<const LameOperator> op;
  std::shared_ptr<const LameStepper> stepper;
  FixedPointContext ctx;
};

/// Builds the context. A bundle may be supplied (bridged or replayed paths);
/// otherwise it is sampled from the configured seed.
inline Setup make_setup(const RunConfig& rc, std::optional<BrownianBundle> bundle = std::nullopt,
                        std::shared_ptr<const LameStepper> stepper = nullptr) {
  rc.validate();
  Setup s;
  s.config = rc;
  s.fluid = rc.fluid();
  s.cfg = rc.solve();
  const int d = static_cast<int>(rc.integer("grid.dim"));
  if (stepper && std::abs(stepper->step() - s.cfg.dt) > 1e-15 * s.cfg.dt) stepper = nullptr;
  s.grid = stepper ? stepper->op().grid_ptr()
                   : Grid::box(d, static_cast<int>(rc.integer("grid.n")), rc.num("grid.lower"), rc.num("grid.upper"));
  s.Q = make_transport(rc);
  s.forcing = make_forcing(rc, s.grid);
  const int K = s.Q.count(), M = s.forcing.count();
  if (bundle) {
    if (bundle->transport_count() != K || bundle->mode_count() != M)
      throw ConfigError("setup: supplied bundle does not match noise.K / forcing.M");
    if (std::abs(bundle->step() - s.cfg.dt) > 1e-12 * s.cfg.dt || bundle->steps() < s.cfg.steps())
      throw ConfigError("setup: supplied bundle does not cover [0, T] with step dt");
    s.W = std::move(*bundle);
  } else {
    s.W = sample_brownian(K, M, s.cfg.T, s.cfg.dt, s.cfg.seed);
  }
  s.rho0 = Field(s.grid, 0, rc.num("initial.rho0"));
  s.u0 = make_initial_velocity(rc, s.grid);
  if (stepper) {
    s.stepper = stepper;
    s.op = std::shared_ptr<const LameOperator>(stepper, &stepper->op());
  } else {
    auto op = std::make_shared<const LameOperator>(s.grid, s.rho0, s.fluid);
    s.op = op;
    s.stepper = std::make_shared<const LameStepper>(op, s.cfg.dt);
  }

  FixedPointContext& c = s.ctx;
  c.grid = s.grid;
  c.fluid = s.fluid;
  c.cfg = s.cfg;
  c.rho0 = s.rho0;
  c.u0 = s.u0;
  c.N_ext = normal_extension(s.grid);
  c.U = solve_stoch_convolution(*s.stepper, s.forcing, s.W, s.cfg.steps());
  c.stepper = s.stepper;
  if (rc.str("flow.engine") == "deterministic")
    c.engine = std::make_shared<const DeterministicFlowEngine>(s.cfg.eps_star);
  else
    c.engine = std::make_shared<const StochasticFlowEngine>(s.Q, s.W, s.grid, s.cfg.eps_star, rc.num("noise.margin"),
                                                            static_cast<int>(rc.integer("noise.refine")));
  return s;
}

/// Full pipeline of one path.
struct RunResult {
  SolutionBundle bundle;
  std::vector<MovingDomainSnapshot> snapshots;
  KinematicResidual kinematic;
};

inline RunResult run_path(const Setup& s) {
  RunResult r;
  r.bundle = picard_solve(s.ctx);
  r.snapshots = reconstruct(r.bundle);
  r.kinematic = kinematic_residual(r.bundle, s.Q, s.W);
  return r;
}

inline RunRecord make_record(const Setup& s, const RunResult& r, std::string status = "ok") {
  RunRecord rec;
  rec.bundle = &r.bundle;
  rec.snapshots = &r.snapshots;
  rec.kinematic = &r.kinematic;
  rec.config = s.config.effective();
  rec.metadata["transport_globally_bounded"] = s.Q.globally_bounded();
  rec.metadata["transport_kinds"] = nlohmann::json::array();
  for (const auto& m : s.Q.modes()) rec.metadata["transport_kinds"].push_back(kind_name(m));
  // per-path bound class: smallest integer N >= 1 bounding |U|_{L^p H^{2,q}} + |rho0|_{H^{1,q}}
  double m_sto = r.bundle.U.size() > 1 ? lp_time_norm(r.bundle.U, NormKind::H2q, s.cfg.q, s.cfg.p) : 0.0;
  double m_rho = norm(s.rho0, NormKind::H1q, s.cfg.q);
  rec.metadata["M_sto"] = m_sto;
  rec.metadata["bound_class"] = std::max(1.0, std::ceil(m_sto + m_rho));
  rec.metadata["initial_data_norm"] = "discrete H2q surrogate of the trace space";
  rec.seed = s.cfg.seed;
  rec.status = std::move(status);
  const std::size_t every = static_cast<std::size_t>(s.config.integer("output.snapshot_every"));
  for (std::size_t k = 0; k < r.snapshots.size(); k += every) rec.snapshot_frames.push_back(k);
  if (!r.snapshots.empty() && rec.snapshot_frames.back() != r.snapshots.size() - 1)
    rec.snapshot_frames.push_back(r.snapshots.size() - 1);
  return rec;
}

}  // namespace lagflow
