#include "lagflow/driver/acceptance.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace lagflow;

namespace {

RunConfig small(RunConfig rc) {
  rc.set("grid.n", 17);
  return rc;
}

double frame_gap(const TimeSeries& a, const TimeSeries& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    if (a.times[n] != b.times[n]) return std::numeric_limits<double>::infinity();
    m = std::max(m, (a.frames[n] - b.frames[n]).max_abs());
  }
  return m;
}

std::shared_ptr<const LameOperator> rest_operator(int n, FluidParams fp) {
  auto g = Grid::box(2, n);
  return std::make_shared<const LameOperator>(g, Field(g, 0, 1.0), fp);
}

}  // namespace

TEST(SolveConfig, Constraints) {
  SolveConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_NEAR(c.theta, 0.5 - 0.5 / c.q, 1e-15);
  SolveConfig p2 = c;
  p2.p = 2.0;
  EXPECT_THROW(p2.validate(), ConfigError);
  SolveConfig q3 = c;
  q3.q = 3.0;
  EXPECT_THROW(q3.validate(), ConfigError);
  SolveConfig sum = c;
  sum.q = 4.0;  // 2/4 + 3/4 >= 1
  EXPECT_THROW(sum.validate(), ConfigError);
  SolveConfig dl = c;
  dl.delta = 0.3;
  EXPECT_THROW(dl.validate(), ConfigError);
  EXPECT_EQ(c.steps(), 50u);
}

TEST(Compatibility, RestStateAndRigidRotation) {
  FluidParams fp;  // p(1) = 1 = p_ext
  auto op = rest_operator(9, fp);
  EXPECT_LE(compatibility_check(*op, Field(op->grid_ptr(), 1)), 1e-15);
  Field rot = Field::vector(op->grid_ptr(), [](const Vec& y) { return Vec(Vec{{y[1], -y[0]}}); });
  EXPECT_LE(compatibility_check(*op, rot), 1e-12);
}

TEST(Compatibility, StretchHasUnitFaceTraction) {
  FluidParams fp;
  fp.mu = 1.0;
  fp.lambda = 0.0;
  auto op = rest_operator(9, fp);
  Field u = Field::vector(op->grid_ptr(), [](const Vec& y) { return Vec(Vec{{y[0], 0.0}}); });
  EXPECT_NEAR(compatibility_check(*op, u), 2.0, 1e-12);
}

TEST(Reference, EquilibriumIsZero) {
  lagflow::Setup s = make_setup(small(acceptance::equilibrium_config()));
  TimeSeries v = solve_reference(s.ctx);
  EXPECT_EQ(v.size(), s.cfg.steps() + 1);
  for (const auto& f : v.frames) EXPECT_LE(f.max_abs(), 1e-14);
}

TEST(Reference, PressureMismatchDrivesFlowThroughTraction) {
  RunConfig rc = small(acceptance::equilibrium_config());
  rc.set("initial.rho0", 1.2);
  lagflow::Setup s = make_setup(rc);
  TimeSeries v = solve_reference(s.ctx);
  BoundaryValues g = reference_traction(s.rho0, s.fluid);
  EXPECT_GT(v.back().max_abs(), 1e-6);
  for (std::size_t n = 1; n < v.size(); ++n) EXPECT_LE(max_boundary_gap(s.op->apply_B(v.frames[n]), g), 1e-10);
}

/// Compatible data (rigid rotation at rest pressure) keep v_ref at u0, so the
/// L^p-in-time window norm scales like T^{1/p}.
TEST(Reference, WindowNormScalesWithHorizonForCompatibleData) {
  RunConfig rc = small(acceptance::equilibrium_config());
  double prev = 0.0;
  for (double T : {0.04, 0.02, 0.01}) {
    rc.set("solve.T", T);
    lagflow::Setup s = make_setup(rc);
    s.ctx.u0 = Field::vector(s.grid, [](const Vec& y) { return Vec(0.1 * Vec{{y[1] - 0.5, 0.5 - y[0]}}); });
    TimeSeries v = solve_reference(s.ctx);
    for (const auto& f : v.frames) EXPECT_LE((f - s.ctx.u0).max_abs(), 1e-12);
    double nv = iteration_norm(v, s.cfg.p, s.cfg.q, v.size());
    if (prev > 0.0) {
      EXPECT_NEAR(nv / prev, std::pow(0.5, 1.0 / s.cfg.p), 1e-6) << "T = " << T;
    }
    prev = nv;
  }
}

TEST(Psi, EquilibriumMapsZeroToZero) {
  lagflow::Setup s = make_setup(small(acceptance::equilibrium_config()));
  PsiResult r = apply_Psi(constant_series(Field(s.grid, 1), s.cfg.steps(), s.cfg.dt), s.ctx);
  EXPECT_EQ(r.v.size(), s.cfg.steps() + 1);
  for (const auto& f : r.v.frames) EXPECT_LE(f.max_abs(), 1e-12);
  EXPECT_FALSE(r.window.fired);
}

TEST(Psi, PreservesInitialValueAndStaysInBall) {
  lagflow::Setup s = make_setup(small(acceptance::perturbed_config()));
  TimeSeries vref = solve_reference(s.ctx);
  PsiResult r = apply_Psi(vref, s.ctx);
  EXPECT_EQ((r.v.frames[0] - s.u0).max_abs(), 0.0);
  const std::size_t frames = std::min(r.v.size(), vref.size());
  EXPECT_LE(iteration_norm(series_difference(r.v, vref, frames), s.cfg.p, s.cfg.q, frames), s.cfg.r);
}

TEST(Psi, DeterministicEngineMatchesNoiselessStochasticEngine) {
  RunConfig rc = small(acceptance::perturbed_config());
  rc.set("noise.K", 0);
  rc.set("forcing.M", 0);
  lagflow::Setup a = make_setup(rc);
  rc.set("flow.engine", "deterministic");
  lagflow::Setup b = make_setup(rc);
  TimeSeries vref = solve_reference(a.ctx);
  PsiResult ra = apply_Psi(vref, a.ctx), rb = apply_Psi(vref, b.ctx);
  EXPECT_LE(frame_gap(ra.v, rb.v), 1e-10);
}

TEST(Picard, EquilibriumConvergesImmediately) {
  lagflow::Setup s = make_setup(small(acceptance::equilibrium_config()));
  SolutionBundle b = picard_solve(s.ctx);
  EXPECT_TRUE(b.converged);
  EXPECT_EQ(b.iterations, 1);
  for (const auto& f : b.v.frames) EXPECT_LE(f.max_abs(), 1e-12);
  EXPECT_DOUBLE_EQ(b.tau, s.cfg.T);
  EXPECT_FALSE(b.fired);
  EXPECT_LE(b.compatibility_residual, 1e-12);
}

TEST(Picard, PerturbedContractsAndKeepsInvariants) {
  lagflow::Setup s = make_setup(small(acceptance::perturbed_config()));
  SolutionBundle b = picard_solve(s.ctx);
  ASSERT_TRUE(b.converged);
  EXPECT_GT(b.iterations, 1);
  EXPECT_LT(b.kappa, 1.0);
  for (std::size_t m = 2; m < b.differences.size(); ++m)
    EXPECT_LT(b.differences[m], b.differences[m - 1]) << "iterate " << m + 1;
  EXPECT_LE(b.differences.back(), s.cfg.tol);

  // initial condition, window ordering
  EXPECT_EQ((b.v.frames[0] - s.u0).max_abs(), 0.0);
  EXPECT_EQ((b.ubar.frames[0] - s.u0).max_abs(), 0.0);
  EXPECT_LE(b.tau, b.sigma);
  EXPECT_LE(b.v.end_time(), b.tau + 1e-15);
  for (const auto& st : b.states) EXPECT_LE(st.t, b.tau + 1e-15);

  // fixed point: one more application moves the solution by at most 2 tol
  PsiResult again = apply_Psi(b.v, s.ctx);
  const std::size_t frames = std::min(again.v.size(), b.v.size());
  EXPECT_LE(iteration_norm(series_difference(again.v, b.v, frames), s.cfg.p, s.cfg.q, frames), 2.0 * s.cfg.tol);

  // the recast linear system holds up to solver tolerance
  EXPECT_LE(b.transformed_residual, 1e-8);
  EXPECT_EQ(b.energy.size(), b.states.size());
}

TEST(Picard, SameSeedIsBitIdentical) {
  RunConfig rc = small(acceptance::default_config());
  rc.set("seed", 7);
  SolutionBundle a = picard_solve(make_setup(rc).ctx);
  SolutionBundle b = picard_solve(make_setup(rc).ctx);
  EXPECT_EQ(frame_gap(a.v, b.v), 0.0);
  EXPECT_EQ(frame_gap(a.ubar, b.ubar), 0.0);
  EXPECT_EQ(frame_gap(a.rho, b.rho), 0.0);
  EXPECT_EQ(frame_gap(a.F_Gamma, b.F_Gamma), 0.0);
  EXPECT_EQ(a.tau, b.tau);
  EXPECT_EQ(a.kappa, b.kappa);
  EXPECT_EQ(a.differences, b.differences);
}

TEST(Picard, BallViolationAborts) {
  RunConfig rc = small(acceptance::perturbed_config());
  rc.set("solve.r", 1e-12);
  EXPECT_THROW(picard_solve(make_setup(rc).ctx), PicardError);
}

TEST(Picard, ReferenceOutsideRadiusAborts) {
  RunConfig rc = small(acceptance::equilibrium_config());
  rc.set("initial.rho0", 1.5);
  rc.set("solve.R", 1.01);
  rc.set("solve.r", 1.0);
  try {
    picard_solve(make_setup(rc).ctx);
    FAIL() << "expected PicardError";
  } catch (const PicardError& e) {
    EXPECT_NE(std::string(e.what()).find("exceeds R"), std::string::npos) << e.what();
  }
}

TEST(Picard, IterationBudgetExhausted) {
  RunConfig rc = small(acceptance::perturbed_config());
  rc.set("solve.max_iter", 1);
  EXPECT_THROW(picard_solve(make_setup(rc).ctx), PicardError);
}

TEST(Contraction, RejectsIdenticalInputs) {
  lagflow::Setup s = make_setup(small(acceptance::perturbed_config()));
  TimeSeries vref = solve_reference(s.ctx);
  EXPECT_THROW(contraction_probe(vref, vref, s.ctx), ConfigError);
}

TEST(Contraction, SmallerHorizonContractsMore) {
  RunConfig rc = small(acceptance::perturbed_config());
  ContractionEstimate full = acceptance::probe_kappa(rc);
  rc.set("solve.T", 0.025);
  ContractionEstimate half = acceptance::probe_kappa(rc);
  EXPECT_LT(full.kappa, 1.0);
  EXPECT_LT(half.kappa, full.kappa);
  EXPECT_GT(full.denominator, 0.0);
  EXPECT_NEAR(half.window, 0.025, 1e-12);
}

TEST(Contraction, TighterMonitorNeverWorse) {
  RunConfig rc = small(acceptance::perturbed_config());
  ContractionEstimate full = acceptance::probe_kappa(rc);
  rc.set("flow.delta", 0.1);
  EXPECT_LE(acceptance::probe_kappa(rc).kappa, full.kappa);
}
