#include "lagflow/driver/acceptance.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace lagflow;
namespace fs = std::filesystem;

namespace {

RunConfig small(RunConfig rc) {
  rc.set("grid.n", 17);
  return rc;
}

RunConfig translation_config(double amp) {
  RunConfig rc = small(acceptance::equilibrium_config());
  rc.set("noise.K", 1);
  rc.set("noise.kind", "constant");
  rc.set("noise.amplitude", amp);
  return rc;
}

struct PathRun {
  lagflow::Setup setup;
  RunResult result;
};

PathRun run(const RunConfig& rc, std::optional<BrownianBundle> W = std::nullopt) {
  PathRun r{make_setup(rc, std::move(W)), {}};
  r.result = run_path(r.setup);
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("lagflow_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Geometry, BoundaryLoopAndPolygonArea) {
  auto g = Grid::box(2, 9);
  auto loop = boundary_loop(*g);
  EXPECT_EQ(loop.size(), g->boundary_count());
  std::vector<Vec> pts;
  for (auto k : loop) pts.push_back(g->coord(k));
  EXPECT_TRUE(loop_is_simple(pts));
  EXPECT_NEAR(marker_volume(Field::vector(g, [](const Vec& y) { return y; })), 1.0, 1e-15);
  EXPECT_NEAR(marker_volume(Field::vector(g, [](const Vec& y) { return Vec(Vec{{2.0 * y[0], y[1] + 0.3 * y[0]}}); })),
              2.0, 1e-14);
  std::swap(pts[1], pts[pts.size() / 2]);
  EXPECT_FALSE(loop_is_simple(pts));
}

TEST(Reconstruct, InitialSnapshotIsInitialData) {
  PathRun r = run(small(acceptance::perturbed_config()));
  const auto& m = r.result.snapshots.front();
  EXPECT_EQ(m.t, 0.0);
  EXPECT_EQ((m.X - Field::vector(r.setup.grid, [](const Vec& y) { return y; })).max_abs(), 0.0);
  EXPECT_EQ((m.rho - r.setup.rho0).max_abs(), 0.0);
  EXPECT_EQ((m.u - r.setup.u0).max_abs(), 0.0);
  EXPECT_NEAR(m.volume, 1.0, 1e-15);
}

TEST(Reconstruct, EquilibriumSnapshotsDoNotMove) {
  PathRun r = run(small(acceptance::equilibrium_config()));
  const auto& first = r.result.snapshots.front();
  for (const auto& m : r.result.snapshots) {
    EXPECT_LE((m.X - first.X).max_abs(), 1e-12);
    EXPECT_LE((m.rho - first.rho).max_abs(), 1e-12);
    EXPECT_LE((m.u - first.u).max_abs(), 1e-12);
    EXPECT_TRUE(m.boundary_simple);
  }
  EXPECT_EQ(r.result.kinematic.max, 0.0);
  EXPECT_TRUE(validate_solution(r.result.bundle, 1e-10).pass());
}

TEST(Reconstruct, TranslationNoiseShiftsDomainRigidly) {
  const double amp = 0.05;
  PathRun r = run(translation_config(amp));
  auto w = r.setup.W.values(0);
  for (std::size_t n = 0; n < r.result.snapshots.size(); ++n) {
    const auto& m = r.result.snapshots[n];
    Field expect = Field::vector(r.setup.grid, [&](const Vec& y) { return Vec(y + Vec{{amp * w[n], 0.0}}); });
    EXPECT_LE((m.X - expect).max_abs(), 1e-12);
    EXPECT_NEAR(m.volume, 1.0, 1e-10);
  }
  EXPECT_LE(r.result.kinematic.max, 1e-14);
}

TEST(Reconstruct, PolygonVolumeMatchesJacobianVolume) {
  std::vector<double> gaps;
  for (int n : {9, 17}) {
    RunConfig rc = acceptance::default_config();
    rc.set("grid.n", n);
    rc.set("noise.amplitude", 0.02);
    rc.set("initial.amplitude", 0.01);
    PathRun r = run(rc);
    double gap = 0.0;
    for (const auto& m : r.result.snapshots) gap = std::max(gap, std::abs(m.volume - m.jacobian_volume));
    gaps.push_back(gap);
  }
  EXPECT_LE(gaps[1], 1e-3);
  EXPECT_LE(gaps[1], gaps[0] + 1e-12);
}

TEST(Reconstruct, MassConservedInEulerianForm) {
  PathRun r = run(small(acceptance::default_config()));
  const auto& b = r.result.bundle;
  const Grid& g = *r.setup.grid;
  double m0 = 0.0;
  for (std::size_t i = 0; i < g.node_count(); ++i) m0 += g.weight(i) * r.setup.rho0(i, 0);
  for (std::size_t n = 0; n < b.states.size(); ++n) {
    double m = 0.0;
    for (std::size_t i = 0; i < g.node_count(); ++i) m += g.weight(i) * b.rho.frames[n](i, 0) * b.states[n].J(i, 0);
    EXPECT_NEAR(m, m0, 1e-12 * m0);
  }
}

TEST(Reconstruct, MarkerQueriesReadOffLagrangianValues) {
  PathRun r = run(small(acceptance::default_config()));
  const auto& m = r.result.snapshots.back();
  const FlowState& s = r.result.bundle.states.back();
  const Grid& g = *r.setup.grid;
  for (std::size_t i = 0; i < g.node_count(); i += 7) {
    EulerianSample e = eulerian_sample(m, s, m.X.vec(i));
    EXPECT_LE((e.y - g.coord(i)).norm(), 1e-10);
    EXPECT_NEAR(e.rho, m.rho(i, 0), 1e-10);
    EXPECT_LE((e.u - m.u.vec(i)).norm(), 1e-10);
  }
}

TEST(Reconstruct, ForwardAndInverseRoundTrip) {
  RunConfig rc = small(acceptance::default_config());
  rc.set("noise.amplitude", 0.02);
  PathRun r = run(rc);
  const FlowState& s = r.result.bundle.states.back();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(0.05, 0.95);
  for (int k = 0; k < 50; ++k) {
    Vec y{{U(rng), U(rng)}};
    Vec x = Vec::Map(interpolate(s.X, y, 2).data(), 2);
    InverseResult inv = invert_flow(s, x);
    EXPECT_LE((inv.y - y).norm(), 1e-10);
    Vec back = Vec::Map(interpolate(s.X, inv.y, 2).data(), 2);
    EXPECT_LE((back - x).norm(), 1e-10);
  }
}

TEST(Kinematic, ResidualOrderOnBridgedPaths) {
  RunConfig rc = small(acceptance::default_config());
  rc.set("noise.amplitude", 0.02);
  PathRun coarse = run(rc);
  RunConfig fine_rc = rc;
  fine_rc.set("solve.dt", 0.5 * rc.num("solve.dt"));
  PathRun fine = run(fine_rc, refine_bridge(coarse.setup.W));
  ASSERT_GT(coarse.result.kinematic.max, 0.0);
  EXPECT_GE(coarse.result.kinematic.max / fine.result.kinematic.max, 1.8);
}

TEST(Validate, InjectedNegativeJacobianIsLocated) {
  PathRun r = run(small(acceptance::equilibrium_config()));
  SolutionBundle b = r.result.bundle;
  b.states[3].J(12, 0) = -1.0;
  SolutionReport rep = validate_solution(b, 1e-10);
  EXPECT_FALSE(rep.pass());
  EXPECT_FALSE(rep.diffeomorphism.pass);
  EXPECT_NE(rep.diffeomorphism.detail.find("node 12"), std::string::npos) << rep.diffeomorphism.detail;
  EXPECT_NE(rep.diffeomorphism.detail.find("t = 0.003"), std::string::npos) << rep.diffeomorphism.detail;
}

TEST(Validate, ResidualToleranceIsApplied) {
  PathRun r = run(small(acceptance::perturbed_config()));
  SolutionReport rep = validate_solution(r.result.bundle, 1e-6);
  EXPECT_TRUE(rep.pass()) << rep.residual.value;
  SolutionBundle b = r.result.bundle;
  b.transformed_residual = 1.0;
  EXPECT_FALSE(validate_solution(b, 1e-6).residual.pass);
}

TEST(DeterministicReduction, NoNoiseMatchesDeterministicPath) {
  RunConfig rc = small(acceptance::perturbed_config());
  rc.set("noise.K", 0);
  rc.set("forcing.M", 0);
  PathRun a = run(rc);
  rc.set("flow.engine", "deterministic");
  PathRun b = run(rc);
  const auto& x = a.result.bundle;
  const auto& y = b.result.bundle;
  EXPECT_LE(acceptance::series_gap(x.v, y.v), 1e-10);
  EXPECT_LE(acceptance::series_gap(x.rho, y.rho), 1e-10);
  EXPECT_LE(acceptance::series_gap(x.F_Gamma, y.F_Gamma), 1e-10);
  EXPECT_EQ(x.tau, y.tau);
  ASSERT_EQ(a.result.snapshots.size(), b.result.snapshots.size());
  for (std::size_t n = 0; n < a.result.snapshots.size(); ++n)
    EXPECT_LE((a.result.snapshots[n].X - b.result.snapshots[n].X).max_abs(), 1e-10);
}

TEST(Energy, DeterministicRunDoesNotGainEnergy) {
  RunConfig rc = small(acceptance::perturbed_config());
  rc.set("noise.K", 0);
  rc.set("forcing.M", 0);
  rc.set("initial.amplitude", 0.01);
  PathRun r = run(rc);
  const auto& E = r.result.bundle.energy;
  for (std::size_t n = 1; n < E.size(); ++n) EXPECT_LE(E[n].energy, E[n - 1].energy + 1e-8 * E[0].energy);
}

TEST(Outputs, FilesAndSchema) {
  PathRun r = run(small(acceptance::default_config()));
  fs::path dir = scratch("outputs");
  RunRecord rec = make_record(r.setup, r.result);
  write_outputs(rec, dir);

  auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
  for (const char* key : {"seed", "config", "tau", "kappa", "iterations", "min_density", "energy_initial",
                          "energy_final", "monitor_norms_at_tau", "status"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["status"], "ok");
  EXPECT_EQ(j["tau"].get<double>(), r.result.bundle.tau);
  EXPECT_EQ(j["config"]["grid.n"], 17);

  std::ifstream csv(dir / "diagnostics.csv");
  std::string header, line;
  std::getline(csv, header);
  EXPECT_EQ(header,
            "t,normGradXminusI,normZminusI_theta,normJminus1_theta,J_min,J_max,energy,dissipation,kinematic_residual_max");
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, r.setup.cfg.steps() + 1);

  EXPECT_TRUE(fs::exists(dir / "snapshot_0.csv"));
  EXPECT_TRUE(fs::exists(dir / ("snapshot_" + std::to_string(r.result.snapshots.size() - 1) + ".csv")));
  fs::remove_all(dir);
}

TEST(Outputs, SnapshotReloadIsExact) {
  PathRun r = run(small(acceptance::default_config()));
  fs::path dir = scratch("snapshot");
  fs::create_directories(dir);
  const auto& m = r.result.snapshots.back();
  write_snapshot(m, dir / "s.csv");
  SnapshotTable t = load_snapshot(dir / "s.csv");
  EXPECT_EQ(t.header, (std::vector<std::string>{"label_y1", "label_y2", "x1", "x2", "rho", "u1", "u2", "J"}));
  ASSERT_EQ(t.rows.size(), r.setup.grid->node_count());
  auto x1 = t.column("x1"), rho = t.column("rho"), u2 = t.column("u2"), J = t.column("J");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    EXPECT_EQ(x1[i], m.X(i, 0));
    EXPECT_EQ(rho[i], m.rho(i, 0));
    EXPECT_EQ(u2[i], m.u(i, 1));
    EXPECT_EQ(J[i], m.J(i, 0));
  }
  EXPECT_THROW(t.column("missing"), Error);
  fs::remove_all(dir);
}

TEST(Outputs, SameSeedGivesIdenticalBytes) {
  RunConfig rc = small(acceptance::default_config());
  rc.set("seed", 11);
  fs::path da = scratch("bytes_a"), db = scratch("bytes_b");
  PathRun a = run(rc);
  write_outputs(make_record(a.setup, a.result), da);
  PathRun b = run(rc);
  write_outputs(make_record(b.setup, b.result), db);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(da)) {
    EXPECT_EQ(slurp(e.path()), slurp(db / e.path().filename())) << e.path().filename();
    ++files;
  }
  EXPECT_GE(files, 3u);
  fs::remove_all(da);
  fs::remove_all(db);
}

TEST(Outputs, UnwritableDirectoryNamesThePath) {
  PathRun r = run(small(acceptance::equilibrium_config()));
  fs::path blocker = scratch("blocker");
  std::ofstream(blocker) << "x";
  try {
    write_outputs(make_record(r.setup, r.result), blocker / "sub");
    FAIL() << "expected Error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(blocker.string()), std::string::npos) << e.what();
  }
  fs::remove(blocker);
}
