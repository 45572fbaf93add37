/// The twelve acceptance criteria, shared by the CLI (verify-all) and
/// the acceptance test binary. Each criterion returns one pass/fail record.
#pragma once

#include "lagflow/core/parallel.hpp"
#include "lagflow/driver/setup.hpp"
#include "lagflow/lame/symbol.hpp"
#include "lagflow/lame/verify.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>

namespace lagflow {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  double budget = 0.0;  // seconds
};

/// Least-squares slope of log(err) against log(step).
inline double fitted_order(const std::vector<double>& steps, const std::vector<double>& errs) {
  const std::size_t n = steps.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double x = std::log(steps[i]), y = std::log(errs[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace acceptance {

/// Key=value detail builder with fixed formatting.
class Detail {
 public:
  Detail& operator()(const std::string& key, double v) {
    sep();
    os_ << key << '=' << std::setprecision(4) << v;
    return *this;
  }
  Detail& operator()(const std::string& key, const std::string& v) {
    sep();
    os_ << key << '=' << v;
    return *this;
  }
  Detail& list(const std::string& key, const std::vector<double>& v) {
    sep();
    os_ << key << "=[";
    for (std::size_t i = 0; i < v.size(); ++i) os_ << (i ? "," : "") << std::setprecision(4) << v[i];
    os_ << ']';
    return *this;
  }
  std::string str() const { return os_.str(); }

 private:
  void sep() {
    if (os_.tellp() > 0) os_ << ' ';
  }
  std::ostringstream os_;
};

inline RunConfig default_config() { return RunConfig{}; }

/// Rest state: p(rho*) = p_ext, u0 = 0, no noise, no forcing.
inline RunConfig equilibrium_config() {
  RunConfig rc;
  rc.set("noise.K", 0);
  rc.set("forcing.M", 0);
  rc.set("initial.kind", "equilibrium");
  const FluidParams fp = rc.fluid();
  rc.set("initial.rho0", std::pow(fp.p_ext / fp.a, 1.0 / fp.gamma));
  return rc;
}

/// Rest density with a small velocity perturbation and weak transport noise,
/// weak enough that the stopping monitor stays quiet on [0, T].
inline RunConfig perturbed_config() {
  RunConfig rc;
  rc.set("noise.amplitude", 5e-4);
  return rc;
}

inline double sup_over_frames(const TimeSeries& s) {
  double m = 0.0;
  for (const auto& f : s.frames) m = std::max(m, f.max_abs());
  return m;
}

/// Drift series of a prescribed field on the label grid at frames t_n = n dt.
inline TimeSeries drift_series(const GridPtr& g, std::size_t steps, double dt,
                               const std::function<Vec(double, const Vec&)>& u) {
  TimeSeries s;
  for (std::size_t n = 0; n <= steps; ++n) {
    double t = dt * static_cast<double>(n);
    s.push(t, Field::vector(g, [&](const Vec& y) { return u(t, y); }));
  }
  return s;
}

inline TransportField rotation_noise(int d, double rate) {
  return TransportField(d, {transport::Rotation{Vec::Constant(d, 0.5), rate, Vec::Zero(d)}}, Vec::Constant(d, -0.5),
                        Vec::Constant(d, 1.5));
}

inline TransportField stream_noise(int d, int K, double amp) {
  std::vector<TransportKind> modes;
  for (int k = 0; k < K; ++k) modes.emplace_back(transport::StreamFunction{amp, 1.0 + k / 2, 1.0 + k % 2});
  return TransportField(d, std::move(modes), Vec::Constant(d, -0.5), Vec::Constant(d, 1.5));
}

// ---------------------------------------------------------------------------

/// Mass identity on the default run; continuity-equation deviation and its
/// order on bridged paths with a prescribed compressive drift.
inline CriterionResult mass_identity() {
  CriterionResult r{1, "mass identity and continuity equation", false, "", 0.0, 20.0};
  Setup s = make_setup(default_config());
  SolutionBundle b = picard_solve(s.ctx);
  double mass = 0.0;
  const double r0 = s.rho0.max_abs();
  for (std::size_t n = 0; n < b.states.size(); ++n)
    mass = std::max(mass, (b.rho.frames[n].scaled_by(b.states[n].J) - s.rho0).max_abs() / r0);
  double dev_default = continuity_oracle(b.ubar, b.states, s.rho0).max_deviation;

  // single rotation noise and a smooth drift with nonzero divergence
  const double T = 0.05, dt0 = 1e-3;
  auto drift = [](double t, const Vec& y) {
    Vec v = Vec::Zero(y.size());
    v[0] = 0.2 * (1.0 + t) * std::sin(M_PI * y[0]) * std::sin(M_PI * y[1]);
    v[1] = 0.2 * (1.0 + t) * y[0] * y[1];
    return v;
  };
  TransportField Q = rotation_noise(2, 0.5);
  GridPtr g = Grid::box(2, 17);
  const Field rho0(g, 0, 1.0);
  std::vector<double> dts, devs;
  const int seeds = 10;
  for (int level = 0; level < 3; ++level) {
    double mean = 0.0;
    for (int seed = 1; seed <= seeds; ++seed) {
      BrownianBundle W = refined(sample_brownian(1, 0, T, dt0, static_cast<std::uint64_t>(seed)), level);
      StochasticFlowEngine eng(Q, W, g, 1.0);
      TimeSeries u = drift_series(g, W.steps(), W.step(), drift);
      mean += continuity_oracle(u, eng.states(u), rho0).max_deviation / seeds;
    }
    dts.push_back(dt0 / std::pow(2.0, level));
    devs.push_back(mean);
  }
  double order = fitted_order(dts, devs);
  r.pass = mass <= 1e-12 && dev_default <= 5e-3 && devs[0] <= 5e-3 && order >= 0.9;
  r.detail = Detail()("mass_rel", mass)("dev_default", dev_default).list("dev", devs)("order", order).str();
  return r;
}

/// det grad X stays 1 under divergence-free transport with zero drift.
inline CriterionResult volume_preservation() {
  CriterionResult r{2, "volume preservation under transport noise", false, "", 0.0, 60.0};
  GridPtr g = Grid::box(2, 17);
  const double T = 0.05, dt0 = 1e-3;
  const int seeds = 10;
  auto measure = [&](const TransportField& Q, int K) {
    std::vector<double> errs;
    for (int level = 0; level < 3; ++level) {
      double mean = 0.0;
      for (int seed = 1; seed <= seeds; ++seed) {
        BrownianBundle W = refined(sample_brownian(K, 0, T, dt0, static_cast<std::uint64_t>(seed)), level);
        StochasticFlowEngine eng(Q, W, g, 1.0);
        TimeSeries zero = constant_series(Field(g, 1), W.steps(), W.step());
        double m = 0.0;
        for (const auto& st : eng.states(zero)) m = std::max(m, (st.J - Field(g, 0, 1.0)).max_abs());
        mean += m / seeds;
      }
      errs.push_back(mean);
    }
    return errs;
  };
  std::vector<double> dts{dt0, dt0 / 2, dt0 / 4};
  auto single = measure(stream_noise(2, 1, 0.02), 1);
  auto pair = measure(stream_noise(2, 2, 0.02), 2);
  double o1 = fitted_order(dts, single), o2 = fitted_order(dts, pair);
  double worst = std::max(single[0], pair[0]);
  r.pass = worst <= 5e-3 && o1 >= 0.9 && o2 >= 0.45;
  r.detail = Detail().list("single", single)("order_single", o1).list("K2", pair)("order_K2", o2).str();
  return r;
}

/// psi o Y against the direct oracle flow.
inline CriterionResult factorization() {
  CriterionResult r{3, "flow factorization consistency", false, "", 0.0, 30.0};
  GridPtr g = Grid::box(2, 17);
  const double T = 0.05, dt0 = 1e-3;
  const int seeds = 10;
  TransportField Q = rotation_noise(2, 1.0);
  auto drift = [](double, const Vec& y) { return Vec(0.5 * (y - Vec::Constant(y.size(), 0.5))); };
  std::vector<double> gaps;
  for (int level = 0; level < 3; ++level) {
    double ms = 0.0;
    for (int seed = 1; seed <= seeds; ++seed) {
      BrownianBundle W = refined(sample_brownian(1, 0, T, dt0, static_cast<std::uint64_t>(seed)), level);
      StochasticFlowEngine eng(Q, W, g, 1.0);
      TimeSeries u = drift_series(g, W.steps(), W.step(), drift);
      auto a = eng.states(u);
      auto b = direct_flow_oracle(u, Q, W, 1.0);
      double m = 0.0;
      for (std::size_t n = 0; n < a.size(); ++n) m = std::max(m, (a[n].X - b[n].X).max_abs());
      ms += m * m / seeds;
    }
    gaps.push_back(std::sqrt(ms));
  }
  const double C = gaps[0] / dt0;  // fitted once on the coarsest level
  bool bounded = true;
  for (int level = 0; level < 3; ++level) bounded = bounded && gaps[level] <= 1.1 * C * dt0 / std::pow(2.0, level);
  double r1 = gaps[0] / gaps[1], r2 = gaps[1] / gaps[2];
  r.pass = bounded && r1 >= 1.8 && r2 >= 1.8;
  r.detail = Detail().list("rms_gap", gaps)("C", C)("ratio1", r1)("ratio2", r2).str();
  return r;
}

/// X(t, F(t, x)) = x and F(t, X(t, y)) = y on random interior points.
inline CriterionResult inverse_round_trip() {
  CriterionResult r{4, "inverse-flow round trip", false, "", 0.0, 5.0};
  Setup s = make_setup(default_config());
  SolutionBundle b = picard_solve(s.ctx);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.02, 0.98);
  const std::size_t last = b.states.size() - 1;
  double fwd = 0.0, back = 0.0;
  for (std::size_t k = 0; k < 5; ++k) {
    const FlowState& st = b.states[k * last / 4];
    for (int i = 0; i < 100; ++i) {
      Vec y(2);
      y << U(rng), U(rng);
      Vec x = Eigen::Map<const Vec>(interpolate(st.X, y, 2).data(), 2);
      InverseResult inv = invert_flow(st, x);
      Vec x2 = Eigen::Map<const Vec>(interpolate(st.X, inv.y, 2).data(), 2);
      fwd = std::max(fwd, (x2 - x).norm());
      back = std::max(back, (inv.y - y).norm());
    }
  }
  r.pass = fwd <= 1e-10 && back <= 1e-10;
  r.detail = Detail()("X_of_F", fwd)("F_of_X", back).str();
  return r;
}

/// Manufactured solutions of the Lame problem with traction data.
inline CriterionResult lame_mms() {
  CriterionResult r{5, "Lame manufactured solutions", false, "", 0.0, 60.0};
  FluidParams fp;
  std::vector<double> hs, es;
  for (int n : {17, 33, 65}) {
    GridPtr g = Grid::box(2, n);
    auto op = std::make_shared<const LameOperator>(g, Field(g, 0, 1.0), fp);
    LameStepper st(op, 1e-4);
    es.push_back(mms_run(st, mms_sine(), 100).error);
    hs.push_back(1.0 / (n - 1));
  }
  std::vector<double> dts, et;
  {
    GridPtr g = Grid::box(2, 17);
    auto op = std::make_shared<const LameOperator>(g, Field(g, 0, 1.0), fp);
    for (double dt : {4e-3, 2e-3, 1e-3}) {
      LameStepper st(op, dt);
      et.push_back(mms_run(st, mms_quadratic(), static_cast<std::size_t>(std::llround(0.2 / dt))).error);
      dts.push_back(dt);
    }
  }
  double os = fitted_order(hs, es), ot = fitted_order(dts, et);
  r.pass = std::abs(os - 2.0) <= 0.25 && std::abs(ot - 1.0) <= 0.25;
  r.detail = Detail().list("space_err", es)("space_order", os).list("time_err", et)("time_order", ot).str();
  return r;
}

/// Symbol eigenvalues in closed form and the boundary-map determinant sweep.
inline CriterionResult symbol_and_ls() {
  CriterionResult r{6, "symbol and Lopatinskii-Shapiro", false, "", 0.0, 10.0};
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> N(0.0, 1.0);
  auto random_params = [&](FluidParams& fp, double& rho0) {
    fp.mu = std::exp(std::log(0.1) + U(rng) * std::log(100.0));
    // 2 mu + 3 lambda > 0 with some slack
    double lo = -2.0 * fp.mu / 3.0 * 0.99;
    fp.lambda = lo + U(rng) * (10.0 - lo);
    rho0 = 0.5 + 4.5 * U(rng);
  };
  double worst_gap = 0.0;
  for (int c = 0; c < 10000; ++c) {
    FluidParams fp;
    double rho0;
    random_params(fp, rho0);
    const int d = 2 + c % 2;
    Eigen::VectorXd xi(d);
    for (int a = 0; a < d; ++a) xi[a] = N(rng);
    SymbolEigen se = symbol_eigenvalues(fp, rho0, xi);
    worst_gap = std::max(worst_gap, se.max_gap / std::max(1.0, se.closed_form.back()));
  }
  double min_det = std::numeric_limits<double>::infinity();
  for (int c = 0; c < 1000; ++c) {
    FluidParams fp;
    double rho0;
    random_params(fp, rho0);
    const int d = 2 + c % 2;
    Eigen::VectorXd xi = Eigen::VectorXd::Zero(d);
    for (int a = 0; a + 1 < d; ++a) xi[a] = N(rng);
    double mag = std::exp(std::log(1e-2) + U(rng) * std::log(1e4));
    double arg = (U(rng) - 0.5) * (M_PI - 0.2);
    cd eta = std::polar(mag, arg);
    if (eta.real() < 1e-2) eta = cd(1e-2, eta.imag());
    min_det = std::min(min_det, lopatinskii_check(fp, rho0, xi, eta).det_normalized);
  }
  r.pass = worst_gap <= 1e-12 && min_det > 1e-8;
  r.detail = Detail()("max_rel_gap", worst_gap)("min_normalized_det", min_det).str();
  return r;
}

/// Variance of the slowest traction eigenmode of the stochastic convolution.
inline CriterionResult ou_variance() {
  CriterionResult r{7, "stochastic convolution eigenmode variance", false, "", 0.0, 60.0};
  GridPtr g = Grid::box(2, 9);
  FluidParams fp;
  auto op = std::make_shared<const LameOperator>(g, Field(g, 0, 1.0), fp);
  const double dt = 1e-3;
  LameStepper st(op, dt);
  TractionEigenpair ep = traction_eigenpair(*op);
  StochasticForcing fs;
  fs.modes.push_back(ep.mode);
  fs.amplitudes.push_back(1.0);
  const std::vector<std::size_t> probe{20, 50, 100};
  const std::size_t steps = probe.back();
  const int paths = 10000;
  std::vector<double> sum2(probe.size(), 0.0);
  std::vector<std::vector<double>> inc(1, std::vector<double>(steps));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N(0.0, std::sqrt(dt));
  for (int p = 0; p < paths; ++p) {
    for (auto& x : inc[0]) x = N(rng);
    TimeSeries U = solve_stoch_convolution(st, fs, BrownianBundle{}, steps, &inc);
    for (std::size_t k = 0; k < probe.size(); ++k) {
      double c = modal_coefficient(ep, U.frames[probe[k]]);
      sum2[k] += c * c;
    }
  }
  Detail det;
  det("lambda", ep.lambda);
  bool pass = true;
  std::vector<double> rel;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    double t = dt * static_cast<double>(probe[k]);
    double expect = (1.0 - std::exp(-2.0 * ep.lambda * t)) / (2.0 * ep.lambda);
    double var = sum2[k] / paths;
    rel.push_back(var / expect - 1.0);
    pass = pass && std::abs(rel.back()) <= 0.1;
  }
  r.pass = pass;
  r.detail = det.list("rel_dev", rel).str();
  return r;
}

/// Rest state is a fixed point reached in one iterate.
inline CriterionResult equilibrium() {
  CriterionResult r{8, "equilibrium fixed point", false, "", 0.0, 10.0};
  RunConfig rc = equilibrium_config();
  Setup s = make_setup(rc);
  SolutionBundle b = picard_solve(s.ctx);
  const double rstar = rc.num("initial.rho0");
  double vmax = sup_over_frames(b.v);
  r.pass = b.iterations == 1 && vmax <= 1e-10 && std::abs(b.tau - s.cfg.T) <= 1e-12 * s.cfg.T &&
           std::abs(b.min_density - rstar) <= 1e-12 * rstar;
  r.detail = Detail()("iterations", b.iterations)("v_max", vmax)("tau", b.tau)("min_density", b.min_density).str();
  return r;
}

/// Contraction factor of the solution map measured from v_ref and Psi(v_ref).
inline ContractionEstimate probe_kappa(const RunConfig& rc) {
  Setup s = make_setup(rc);
  TimeSeries vref = solve_reference(s.ctx);
  PsiResult ps = apply_Psi(vref, s.ctx);
  return contraction_probe(vref, ps.v, s.ctx);
}

inline CriterionResult contraction() {
  CriterionResult r{9, "contraction of the solution map", false, "", 0.0, 120.0};
  bool pass = true;
  std::vector<double> full, half_T, half_delta;
  for (int seed = 1; seed <= 5; ++seed) {
    RunConfig rc = perturbed_config();
    rc.set("seed", seed);
    double k = probe_kappa(rc).kappa;
    RunConfig rt = rc;
    rt.set("solve.T", 0.5 * rc.num("solve.T"));
    double kt = probe_kappa(rt).kappa;
    RunConfig rd = rc;
    rd.set("flow.delta", 0.5 * rc.num("flow.delta"));
    double kd = probe_kappa(rd).kappa;
    full.push_back(k), half_T.push_back(kt), half_delta.push_back(kd);
    pass = pass && k < 1.0 && kt < k && kd <= k;
  }
  r.pass = pass;
  r.detail = Detail().list("kappa", full).list("kappa_half_T", half_T).list("kappa_half_delta", half_delta).str();
  return r;
}

inline bool same_bytes(const std::filesystem::path& a, const std::filesystem::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
  return fa.good() || fa.eof() ? sa == sb : false;
}

/// Positive stopping time, density floor, reproducibility, and the order of
/// the boundary kinematic residual.
inline CriterionResult well_posedness_probes() {
  CriterionResult r{10, "well-posedness probes", false, "", 0.0, 300.0};
  const int seeds = 100;
  std::vector<double> taus(seeds), mins(seeds);
  std::vector<int> failed(seeds, 0);
  const RunConfig base = default_config();
  const double rstar = base.num("initial.rho0");
  std::shared_ptr<const LameStepper> stepper;
  {
    Setup s = make_setup(base);
    stepper = s.stepper;
  }
  parallel_for(seeds, [&](std::size_t i) {
    RunConfig rc = base;
    rc.set("seed", static_cast<int>(i + 1));
    try {
      Setup s = make_setup(rc, std::nullopt, stepper);
      SolutionBundle b = picard_solve(s.ctx);
      taus[i] = b.tau;
      mins[i] = b.min_density;
    } catch (const NumericalError&) {
      failed[i] = 1;
    }
  });
  double tau_min = *std::min_element(taus.begin(), taus.end());
  double rho_min = *std::min_element(mins.begin(), mins.end());
  int nfail = 0;
  for (int f : failed) nfail += f;

  // byte-identical artifacts for a repeated seed
  namespace fs = std::filesystem;
  fs::path root = fs::temp_directory_path() / ("lagflow_repro_" + std::to_string(std::random_device{}()));
  bool identical = true;
  for (int k = 0; k < 2; ++k) {
    Setup s = make_setup(base);
    RunResult rr = run_path(s);
    write_outputs(make_record(s, rr), root / std::to_string(k));
    dump_bundle(s.W, (root / std::to_string(k) / "brownian.bin").string());
  }
  for (const auto& e : fs::directory_iterator(root / "0"))
    identical = identical && same_bytes(e.path(), root / "1" / e.path().filename());
  fs::remove_all(root);

  // kinematic residual on coupled paths
  std::vector<double> res(2, 0.0);
  const int kseeds = 5;
  for (int seed = 1; seed <= kseeds; ++seed) {
    RunConfig rc = base;
    rc.set("seed", seed);
    BrownianBundle W = sample_brownian(static_cast<int>(rc.integer("noise.K")), static_cast<int>(rc.integer("forcing.M")),
                                       rc.num("solve.T"), rc.num("solve.dt"), static_cast<std::uint64_t>(seed));
    for (int level = 0; level < 2; ++level) {
      RunConfig rl = rc;
      rl.set("solve.dt", rc.num("solve.dt") / std::pow(2.0, level));
      Setup s = make_setup(rl, refined(W, level));
      RunResult rr = run_path(s);
      res[level] += rr.kinematic.max / kseeds;
    }
  }
  double order = std::log2(res[0] / res[1]);
  r.pass = nfail == 0 && tau_min > 0.0 && rho_min >= 0.5 * rstar && identical && order >= 0.9;
  r.detail = Detail()("failed", nfail)("tau_min", tau_min)("min_density", rho_min)("identical", identical ? "yes" : "no")
                 .list("kinematic", res)("order", order)
                 .str();
  return r;
}

inline double series_gap(const TimeSeries& a, const TimeSeries& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    double d = (a.frames[n] - b.frames[n]).max_abs();
    if (std::isnan(d)) return d;
    m = std::max(m, d);
  }
  return m;
}

/// Zero noise through the stochastic engine against the noise-free engine.
inline CriterionResult deterministic_reduction() {
  CriterionResult r{11, "deterministic reduction", false, "", 0.0, 30.0};
  RunConfig rc = default_config();
  rc.set("noise.K", 0);
  rc.set("forcing.M", 0);
  RunConfig rd = rc;
  rd.set("flow.engine", "deterministic");
  Setup ss = make_setup(rc), sd = make_setup(rd);
  RunResult a = run_path(ss), b = run_path(sd);
  const SolutionBundle &x = a.bundle, &y = b.bundle;
  double gap = 0.0;
  gap = std::max({gap, series_gap(x.v, y.v), series_gap(x.ubar, y.ubar), series_gap(x.rho, y.rho),
                  series_gap(x.F_u, y.F_u), series_gap(x.F_Gamma, y.F_Gamma)});
  if (x.states.size() != y.states.size()) gap = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < std::min(x.states.size(), y.states.size()); ++n) {
    gap = std::max({gap, (x.states[n].X - y.states[n].X).max_abs(), (x.states[n].gradX - y.states[n].gradX).max_abs(),
                    (x.states[n].J - y.states[n].J).max_abs(), (x.states[n].Z - y.states[n].Z).max_abs()});
  }
  for (std::size_t n = 0; n < std::min(x.energy.size(), y.energy.size()); ++n)
    gap = std::max(gap, std::abs(x.energy[n].energy - y.energy[n].energy));
  gap = std::max(gap, std::abs(x.tau - y.tau));
  // kappa is a ratio of Picard differences near the tolerance, so it is
  // compared relative to its size
  double kappa_rel = std::abs(x.kappa - y.kappa) / std::max(y.kappa, 1e-300);
  r.pass = gap <= 1e-10 && x.iterations == y.iterations && kappa_rel <= 1e-6;
  r.detail = Detail()("max_gap", gap)("kappa_rel_gap", kappa_rel)("iterations", x.iterations).str();
  return r;
}

/// Energy decay without noise; sqrt(dt) drift of E under transport noise.
inline CriterionResult energy_structure() {
  CriterionResult r{12, "energy structure", false, "", 0.0, 120.0};
  double worst_rise = -std::numeric_limits<double>::infinity();
  for (double amp : {1e-3, 1e-2}) {
    RunConfig rc = default_config();
    rc.set("noise.K", 0);
    rc.set("forcing.M", 0);
    rc.set("initial.amplitude", amp);
    Setup s = make_setup(rc);
    SolutionBundle b = picard_solve(s.ctx);
    const double E0 = b.energy.front().energy;
    for (std::size_t n = 0; n + 1 < b.energy.size(); ++n)
      worst_rise = std::max(worst_rise, (b.energy[n + 1].energy - b.energy[n].energy) / E0);
  }
  const int seeds = 20;
  std::vector<double> C(2, 0.0);
  RunConfig base = default_config();
  base.set("forcing.M", 0);
  for (int seed = 1; seed <= seeds; ++seed) {
    BrownianBundle W = sample_brownian(static_cast<int>(base.integer("noise.K")), 0, base.num("solve.T"),
                                       base.num("solve.dt"), static_cast<std::uint64_t>(seed));
    for (int level = 0; level < 2; ++level) {
      RunConfig rl = base;
      double dt = base.num("solve.dt") / std::pow(2.0, level);
      rl.set("solve.dt", dt);
      rl.set("seed", seed);
      Setup s = make_setup(rl, refined(W, level));
      SolutionBundle b = picard_solve(s.ctx);
      C[level] = std::max(C[level], std::abs(b.energy.back().energy - b.energy.front().energy) / std::sqrt(dt));
    }
  }
  double ratio = C[0] / C[1];
  r.pass = worst_rise <= 1e-8 && ratio >= 0.5 && ratio <= 2.0;
  r.detail = Detail()("max_step_rise_rel", worst_rise).list("C", C)("C_ratio", ratio).str();
  return r;
}

}  // namespace acceptance

using CriterionFn = std::function<CriterionResult()>;

inline std::vector<CriterionFn> acceptance_criteria() {
  using namespace acceptance;
  return {mass_identity, volume_preservation, factorization, inverse_round_trip, lame_mms, symbol_and_ls,
          ou_variance,   equilibrium,         contraction,   well_posedness_probes,     deterministic_reduction,
          energy_structure};
}

inline void print_result(std::ostream& os, const CriterionResult& r) {
  os << (r.pass ? "PASS" : "FAIL") << " [" << std::setw(2) << r.id << "] " << r.name << " (" << std::fixed
     << std::setprecision(1) << r.seconds << " s / " << r.budget << " s) " << std::defaultfloat << r.detail
     << std::endl;
}

/// Runs the selected criteria (all when `ids` is empty) and prints one line each.
/// Exceptions inside a criterion mark it failed with the message as detail.
inline std::vector<CriterionResult> run_acceptance(std::ostream& os, const std::vector<int>& ids = {}) {
  auto all = acceptance_criteria();
  std::vector<CriterionResult> out;
  for (std::size_t k = 0; k < all.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!ids.empty() && std::find(ids.begin(), ids.end(), id) == ids.end()) continue;
    auto t0 = std::chrono::steady_clock::now();
    CriterionResult r;
    try {
      r = all[k]();
    } catch (const std::exception& e) {
      r.id = id;
      r.name = "criterion " + std::to_string(id);
      r.pass = false;
      r.detail = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (r.budget > 0.0 && r.seconds > r.budget) {
      r.pass = false;
      r.detail += " over_budget";
    }
    print_result(os, r);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace lagflow
