#include "lagflow/driver/acceptance.hpp"
#include "lagflow/flow/diagnostics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace lagflow;
using acceptance::drift_series;
using acceptance::rotation_noise;
using acceptance::stream_noise;

namespace {

std::vector<Vec> sample_points(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.05, 0.95);
  std::vector<Vec> pts;
  for (int k = 0; k < count; ++k) pts.push_back(Vec{{U(rng), U(rng)}});
  return pts;
}

Mat rotation_exp(double w) {
  Mat R(2, 2);
  R << std::cos(w), std::sin(w), -std::sin(w), std::cos(w);
  return R;
}

double max_rotation_error(const BrownianBundle& W, double rate, const std::vector<Vec>& pts) {
  NoiseFlow nf = integrate_noise_flow(rotation_noise(2, rate), W, pts);
  auto w = W.values(0);
  Vec c = Vec::Constant(2, 0.5);
  double err = 0.0;
  for (std::size_t n = 0; n < nf.level_count(); ++n)
    for (std::size_t i = 0; i < pts.size(); ++i)
      err = std::max(err, (nf.psi(n, i) - (c + rotation_exp(rate * w[n]) * (pts[i] - c))).norm());
  return err;
}

NoiseFlowTable quiet_table(const GridPtr& g, double T, double dt) {
  return NoiseFlowTable(TransportField::none(2), sample_brownian(0, 0, T, dt, 1), g, 0.125, 2);
}

double sup_gap(const std::vector<FlowState>& a, const std::vector<FlowState>& b) {
  double m = 0.0;
  for (std::size_t n = 0; n < std::min(a.size(), b.size()); ++n) m = std::max(m, (a[n].X - b[n].X).max_abs());
  return m;
}

}  // namespace

TEST(NoiseFlow, ConstantFieldTranslatesExactly) {
  Vec b{{0.3, -0.2}};
  TransportField Q(2, {transport::Constant{b}}, Vec::Constant(2, -5.0), Vec::Constant(2, 5.0));
  auto W = sample_brownian(1, 0, 0.05, 1e-3, 4);
  auto pts = sample_points(20, 1);
  NoiseFlow nf = integrate_noise_flow(Q, W, pts);
  auto w = W.values(0);
  for (std::size_t n = 0; n < nf.level_count(); ++n)
    for (std::size_t i = 0; i < pts.size(); ++i) {
      EXPECT_LE((nf.psi(n, i) - (pts[i] + b * w[n])).norm(), 1e-14);
      EXPECT_LE((nf.D(n, i) - identity(2)).norm(), 0.0);
    }
}

TEST(NoiseFlow, NoFieldsMeansIdentity) {
  auto W = sample_brownian(0, 0, 0.05, 1e-3, 4);
  auto pts = sample_points(5, 2);
  NoiseFlow nf = integrate_noise_flow(TransportField::none(2), W, pts);
  for (std::size_t n = 0; n < nf.level_count(); ++n)
    for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ((nf.psi(n, i) - pts[i]).norm(), 0.0);
}

TEST(NoiseFlow, RotationMatchesMatrixExponentialAtFirstOrder) {
  auto pts = sample_points(30, 3);
  std::vector<double> steps, errs;
  auto W = sample_brownian(1, 0, 0.5, 4e-3, 8);
  for (int l = 0; l < 3; ++l) {
    auto Wl = refined(W, l);
    steps.push_back(Wl.step());
    errs.push_back(max_rotation_error(Wl, 1.0, pts));
  }
  EXPECT_LE(errs[1], 1.0 * steps[1]);  // strong error <= C dt at dt = 1e-3
  EXPECT_GE(fitted_order(steps, errs), 0.9);
}

TEST(NoiseFlow, InverseGradientAndVolume) {
  auto pts = sample_points(30, 5);
  auto W = sample_brownian(2, 0, 0.05, 1e-3, 6);
  NoiseFlow nf = integrate_noise_flow(stream_noise(2, 2, 0.05), W, pts);
  for (std::size_t n = 0; n < nf.level_count(); ++n)
    for (std::size_t i = 0; i < pts.size(); ++i) {
      EXPECT_LE((nf.D(n, i) * nf.Dinv(n, i) - identity(2)).norm(), 1e-8);
      EXPECT_NEAR(nf.D(n, i).determinant(), 1.0, 1e-3);
    }
}

TEST(NoiseFlow, LeavingTheBoxAborts) {
  TransportField Q(2, {transport::Constant{Vec{{50.0, 0.0}}}}, Vec::Constant(2, -0.5), Vec::Constant(2, 1.5));
  auto W = sample_brownian(1, 0, 1.0, 1e-2, 2);
  auto pts = sample_points(3, 1);
  EXPECT_THROW(integrate_noise_flow(Q, W, pts), NumericalError);
}

TEST(LabelFlow, ZeroDriftIsIdentity) {
  auto g = Grid::box(2, 9);
  auto nf = quiet_table(g, 0.05, 1e-3);
  LabelFlow lf = integrate_label_flow(constant_series(Field(g, 1), 50, 1e-3), nf);
  Field id = Field::vector(g, [](const Vec& y) { return y; });
  for (const auto& Y : lf.Y.frames) EXPECT_EQ((Y - id).max_abs(), 0.0);
}

TEST(LabelFlow, ConstantDriftTranslates) {
  auto g = Grid::box(2, 9);
  auto nf = quiet_table(g, 0.05, 1e-3);
  Vec c{{0.7, -0.4}};
  LabelFlow lf = integrate_label_flow(drift_series(g, 50, 1e-3, [&](double, const Vec&) { return c; }), nf);
  for (std::size_t n = 0; n < lf.Y.size(); ++n) {
    Field expect = Field::vector(g, [&](const Vec& y) { return Vec(y + c * lf.Y.times[n]); });
    EXPECT_LE((lf.Y.frames[n] - expect).max_abs(), 1e-13);
  }
}

TEST(LabelFlow, LinearDriftIsIntegratedExactly) {
  auto g = Grid::box(2, 9);
  const double alpha = 0.8;
  auto nf = quiet_table(g, 0.05, 1e-3);
  LabelFlow lf = integrate_label_flow(drift_series(g, 50, 1e-3, [&](double, const Vec& y) { return Vec(alpha * y); }), nf);
  for (std::size_t n = 0; n < lf.Y.size(); ++n) {
    const double s = 1.0 + alpha * lf.Y.times[n];
    Field expect = Field::vector(g, [&](const Vec& y) { return Vec(s * y); });
    EXPECT_LE((lf.Y.frames[n] - expect).max_abs(), 1e-10);
    EXPECT_LE((lf.gradY.frames[n] - s * Field::identity_matrix(g)).max_abs(), 1e-10);
  }
}

TEST(Compose, InitialStateIsIdentity) {
  auto g = Grid::box(2, 9);
  FlowState s = identity_state(g);
  EXPECT_EQ((s.X - Field::vector(g, [](const Vec& y) { return y; })).max_abs(), 0.0);
  EXPECT_EQ((s.Z - Field::identity_matrix(g)).max_abs(), 0.0);
  EXPECT_EQ((s.J - Field(g, 0, 1.0)).max_abs(), 0.0);
  EXPECT_TRUE(s.valid);
}

TEST(Compose, PureTransportNoiseKeepsVolume) {
  auto g = Grid::box(2, 17);
  auto W = sample_brownian(1, 0, 0.05, 1e-3, 12);
  StochasticFlowEngine eng(rotation_noise(2, 0.3), W, g, 0.25);
  auto states = eng.states(constant_series(Field(g, 1), 50, 1e-3));
  for (const auto& s : states) EXPECT_LE((s.J - Field(g, 0, 1.0)).max_abs(), 1e-6);
}

TEST(Compose, LinearDriftJacobianAndInverse) {
  auto g = Grid::box(2, 9);
  const double alpha = 0.8;
  StochasticFlowEngine eng(TransportField::none(2), sample_brownian(0, 0, 0.05, 1e-3, 1), g, 0.25);
  auto states = eng.states(drift_series(g, 50, 1e-3, [&](double, const Vec& y) { return Vec(alpha * y); }));
  for (const auto& s : states) {
    const double f = 1.0 + alpha * s.t;
    EXPECT_LE((s.J - Field(g, 0, f * f)).max_abs(), 1e-10);
    EXPECT_LE((s.Z - (1.0 / f) * Field::identity_matrix(g)).max_abs(), 1e-10);
    EXPECT_LE((s.gradX.scaled_by(Field(g, 0, 1.0)) - f * Field::identity_matrix(g)).max_abs(), 1e-10);
  }
}

TEST(Compose, GuardViolationMarksStateInvalid) {
  auto g = Grid::box(2, 9);
  Field gX = 1.5 * Field::identity_matrix(g);
  FlowState s = make_flow_state(0.1, Field::vector(g, [](const Vec& y) { return Vec(1.5 * y); }), gX, 0.25);
  EXPECT_FALSE(s.valid);
  EXPECT_NEAR(s.guard, 0.5 * std::sqrt(2.0), 1e-14);
}

TEST(DirectOracle, NoNoiseIsQuadratureOfDrift) {
  auto g = Grid::box(2, 9);
  auto W = sample_brownian(0, 0, 0.05, 1e-3, 1);
  auto drift = [](double t, const Vec& y) { return Vec((1.0 + t) * Vec{{y[1], y[0]}}); };
  auto states = direct_flow_oracle(drift_series(g, 50, 1e-3, drift), TransportField::none(2), W, 0.25);
  for (const auto& s : states) {
    const double I = s.t + 0.5 * s.t * s.t;
    Field expect = Field::vector(g, [&](const Vec& y) { return Vec(y + I * Vec{{y[1], y[0]}}); });
    EXPECT_LE((s.X - expect).max_abs(), 1e-13);
  }
}

TEST(DirectOracle, ConstantNoiseTranslates) {
  auto g = Grid::box(2, 9);
  Vec b{{0.2, 0.1}};
  TransportField Q(2, {transport::Constant{b}}, Vec::Constant(2, -5.0), Vec::Constant(2, 5.0));
  auto W = sample_brownian(1, 0, 0.05, 1e-3, 3);
  auto states = direct_flow_oracle(constant_series(Field(g, 1), 50, 1e-3), Q, W, 0.25);
  auto w = W.values(0);
  for (std::size_t n = 0; n < states.size(); ++n) {
    Field expect = Field::vector(g, [&](const Vec& y) { return Vec(y + b * w[n]); });
    EXPECT_LE((states[n].X - expect).max_abs(), 1e-14);
  }
}

TEST(DirectOracle, AgreesWithFactorizedFlowAtFirstOrder) {
  auto g = Grid::box(2, 17);
  auto Q = rotation_noise(2, 1.0);
  auto drift = [](double, const Vec& y) { return Vec(0.5 * (y - Vec::Constant(2, 0.5))); };
  auto W = sample_brownian(1, 0, 0.05, 1e-3, 21);
  std::vector<double> gaps;
  for (int l = 0; l < 2; ++l) {
    auto Wl = refined(W, l);
    auto ub = drift_series(g, Wl.steps(), Wl.step(), drift);
    StochasticFlowEngine eng(Q, Wl, g, 0.25);
    gaps.push_back(sup_gap(eng.states(ub), direct_flow_oracle(ub, Q, Wl, 0.25)));
  }
  EXPECT_LE(gaps[0], 1e-3);  // C = 1 at dt = 1e-3
  EXPECT_LE(gaps[1], 0.75 * gaps[0]);
}

TEST(JacobianOde, MatchesDeterminantAtFirstOrder) {
  auto g = Grid::box(2, 17);
  auto drift = [](double t, const Vec& y) {
    return Vec(0.3 * (1.0 + t) * Vec{{std::sin(M_PI * y[0]) * std::sin(M_PI * y[1]), y[0] * y[1]}});
  };
  auto W = sample_brownian(1, 0, 0.05, 1e-3, 2);
  std::vector<double> devs, steps;
  for (int l = 0; l < 2; ++l) {
    auto Wl = refined(W, l);
    auto ub = drift_series(g, Wl.steps(), Wl.step(), drift);
    StochasticFlowEngine eng(rotation_noise(2, 0.5), Wl, g, 0.25);
    auto states = eng.states(ub);
    TimeSeries Jode = jacobian_ode_oracle(ub, states);
    double m = 0.0;
    for (std::size_t n = 0; n < states.size(); ++n) m = std::max(m, (Jode.frames[n] - states[n].J).max_abs());
    devs.push_back(m);
    steps.push_back(Wl.step());
  }
  EXPECT_LE(devs[0], 5.0 * steps[0]);
  EXPECT_LE(devs[1], 0.75 * devs[0]);
}

TEST(Inverse, AtTimeZeroReturnsThePoint) {
  auto g = Grid::box(2, 9);
  FlowState s = identity_state(g);
  for (const auto& x : sample_points(20, 9)) EXPECT_LE((invert_flow(s, x).y - x).norm(), 1e-12);
}

TEST(Inverse, TranslationFlow) {
  auto g = Grid::box(2, 9);
  Vec c{{0.05, -0.03}};
  FlowState s = make_flow_state(0.1, Field::vector(g, [&](const Vec& y) { return Vec(y + c); }),
                                Field::identity_matrix(g), 0.25);
  for (const auto& y : sample_points(20, 10)) EXPECT_LE((invert_flow(s, Vec(y + c)).y - y).norm(), 1e-12);
}

TEST(Inverse, RotationNoiseRoundTrip) {
  auto g = Grid::box(2, 17);
  auto W = sample_brownian(1, 0, 0.05, 1e-3, 13);
  StochasticFlowEngine eng(rotation_noise(2, 1.0), W, g, 0.25);
  auto drift = [](double, const Vec& y) { return Vec(0.2 * Vec{{y[1] * y[1], std::sin(y[0])}}); };
  auto states = eng.states(drift_series(g, 50, 1e-3, drift));
  const FlowState& s = states.back();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(0.1, 0.9);
  for (int k = 0; k < 100; ++k) {
    Vec y{{U(rng), U(rng)}};
    Vec x = Vec::Map(interpolate(s.X, y, 2).data(), 2);
    InverseResult r = invert_flow(s, x);
    EXPECT_LE(r.residual, 1e-10);
    EXPECT_LE((r.y - y).norm(), 1e-9);
  }
}

TEST(Monitor, QuietFlowNeverFires) {
  auto g = Grid::box(2, 9);
  DeterministicFlowEngine eng(0.25);
  auto states = eng.states(constant_series(Field(g, 1), 50, 1e-3));
  auto m = stopping_monitor(states, MonitorConfig{}, 0.05);
  EXPECT_FALSE(m.fired());
  EXPECT_DOUBLE_EQ(m.sigma(), 0.05);
  EXPECT_EQ(m.current().sum(), 0.0);
}

TEST(Monitor, FirstCrossingSemantics) {
  auto g = Grid::box(2, 9);
  DeterministicFlowEngine eng(0.25);
  auto states = eng.states(drift_series(g, 50, 1e-3, [](double, const Vec& y) { return Vec(2.0 * y); }));
  MonitorConfig cfg;
  cfg.delta = 0.02;
  auto m = stopping_monitor(states, cfg, 0.05);
  ASSERT_TRUE(m.fired());
  EXPECT_LT(m.sigma(), 0.05);
  const auto& h = m.history();
  std::size_t k = m.last_index();
  ASSERT_GE(k, 1u);
  EXPECT_GE(h[k].sum(), cfg.delta);
  EXPECT_LT(h[k - 1].sum(), cfg.delta);
  EXPECT_LE(h[k].sum(), cfg.delta + (h[k].sum() - h[k - 1].sum()));
  for (std::size_t i = 1; i < h.size(); ++i) {
    EXPECT_GE(h[i].gradX, h[i - 1].gradX);
    EXPECT_GE(h[i].Z_theta, h[i - 1].Z_theta);
    EXPECT_GE(h[i].J_theta, h[i - 1].J_theta);
  }
}

TEST(Monitor, SmallerDeltaNeverDelays) {
  auto g = Grid::box(2, 9);
  DeterministicFlowEngine eng(0.25);
  auto states = eng.states(drift_series(g, 50, 1e-3, [](double, const Vec& y) { return Vec(1.0 * y); }));
  double prev = 1e300;
  for (double delta : {0.2, 0.1, 0.05, 0.025, 0.0125}) {
    MonitorConfig cfg;
    cfg.delta = delta;
    double sigma = stopping_monitor(states, cfg, 0.05).sigma();
    EXPECT_LE(sigma, prev);
    prev = sigma;
  }
}

TEST(Monitor, FrozenAfterFiring) {
  auto g = Grid::box(2, 9);
  DeterministicFlowEngine eng(0.25);
  auto states = eng.states(drift_series(g, 50, 1e-3, [](double, const Vec& y) { return Vec(2.0 * y); }));
  MonitorConfig cfg;
  cfg.delta = 0.02;
  StoppingMonitor m(cfg, 0.05);
  double sigma = -1.0;
  for (const auto& s : states) {
    if (m.append(s) && sigma < 0.0) sigma = m.sigma();
  }
  EXPECT_EQ(m.sigma(), sigma);
}

TEST(Monitor, RejectsDeltaAboveDelta0) {
  MonitorConfig cfg;
  cfg.delta = 0.3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.delta = 0.1;
  cfg.delta0 = 0.3;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Diagnostics, NoNoiseValues) {
  auto g = Grid::box(2, 9);
  auto nf = quiet_table(g, 0.02, 1e-3);
  auto d = flow_diagnostics(nf, g, 21, {}, DiagnosticsConfig{});
  for (std::size_t n = 0; n < d.t.size(); ++n) {
    EXPECT_EQ(d.rho[n], 0.0);
    EXPECT_EQ(d.K_alpha[n], 0.0);
    EXPECT_NEAR(d.Lambda[n], 1.0 + 2.0 * std::sqrt(2.0), 1e-14);
  }
}

TEST(Diagnostics, NonnegativeNondecreasingAndStartAtZero) {
  auto g = Grid::box(2, 9);
  auto nf = NoiseFlowTable(stream_noise(2, 2, 0.02), sample_brownian(2, 0, 0.02, 1e-3, 5), g, 0.125, 2);
  auto d = flow_diagnostics(nf, g, 21, {}, DiagnosticsConfig{});
  EXPECT_EQ(d.beta_R[0], 0.0);
  EXPECT_EQ(d.G[0], 0.0 + d.A0[0] + d.C_monitor * (d.A_theta[0] + 0.0));
  for (auto* series : {&d.Lambda, &d.rho, &d.K_alpha, &d.beta_R, &d.B_R, &d.M0, &d.M_theta, &d.A0, &d.A_theta,
                       &d.B_theta, &d.G}) {
    for (std::size_t n = 0; n < series->size(); ++n) {
      EXPECT_GE((*series)[n], 0.0);
      if (n > 0) {
        EXPECT_GE((*series)[n], (*series)[n - 1] * (1.0 - 1e-12));
      }
    }
  }
  EXPECT_GT(d.horizon, 0.0);
  EXPECT_NEAR(d.alpha, 0.46875, 0.0);
}

TEST(Diagnostics, SmallTimeBoundOnRandomDrifts) {
  auto g = Grid::box(2, 9);
  auto nf = NoiseFlowTable(stream_noise(2, 2, 0.02), sample_brownian(2, 0, 0.02, 1e-3, 6), g, 0.125, 2);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::size_t checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    double a = U(rng), b = U(rng), c = U(rng), k = 1.0 + 2.0 * std::abs(U(rng));
    auto drift = [&](double t, const Vec& y) {
      return Vec(Vec{{a * std::sin(k * y[1]) + b * t, c * y[0] * y[0] - a * y[1]}});
    };
    auto res = small_time_bound_check(nf, drift_series(g, 20, 1e-3, drift), 4.0, 8.0, 1.0);
    checked += res.frames_checked;
    EXPECT_LE(res.max_ratio, 1.2) << "trial " << trial;
  }
  EXPECT_GT(checked, 0u);
}

/// Inverse and determinant of matrix-field series near I: their fractional
/// time norms are bounded by one fitted multiple of the norm of A - I, and the
/// multiple is stable under grid refinement.
TEST(InverseStability, FittedConstantStableUnderRefinement) {
  auto fitted = [](int n) {
    auto g = Grid::box(2, n);
    double C = 0.0;
    for (double s : {0.01, 0.03, 0.06}) {
      FractionalTimeNorm a(0.4375, 4.0, NormKind::H1q, 8.0), z(0.4375, 4.0, NormKind::H1q, 8.0),
          j(0.4375, 4.0, NormKind::H1q, 8.0);
      for (int k = 0; k <= 20; ++k) {
        double t = 0.005 * k;
        Field A = Field::matrix(g, [&](const Vec& y) {
          Mat M = identity(2);
          M(0, 0) += s * t * std::sin(M_PI * y[0]);
          M(0, 1) += s * std::sqrt(t) * y[1];
          M(1, 0) -= s * t * y[0] * y[1];
          M(1, 1) += s * std::cos(2.0 * y[1]) * t;
          return M;
        });
        FlowState st = make_flow_state(t, Field(g, 1), A, 0.25);
        a.append(t, A - Field::identity_matrix(g));
        z.append(t, st.Z - Field::identity_matrix(g));
        j.append(t, st.J - Field(g, 0, 1.0));
      }
      C = std::max(C, (z.value() + j.value()) / a.value());
    }
    return C;
  };
  double c1 = fitted(17), c2 = fitted(33);
  EXPECT_LE(std::abs(c2 - c1) / c1, 0.2) << c1 << " vs " << c2;
}

/// |F o Y|_{H2q} <= C (1 + |Y - id| + |Y - id|^2) |F|_{H2q}: C fitted on half
/// the samples bounds the other half.
TEST(Composition, FittedBoundHoldsOnFreshSamples) {
  auto g = Grid::box(2, 17);
  auto Q = stream_noise(2, 1, 0.1);
  auto F = [&](const Vec& x) { return Q.q(0, x); };
  const double Fn = norm(Field::vector(g, F), NormKind::H2q, 8.0);
  auto nf = NoiseFlowTable(stream_noise(2, 2, 0.02), sample_brownian(2, 0, 0.05, 1e-3, 7), g, 0.125, 2);
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> ratios;
  for (int trial = 0; trial < 10; ++trial) {
    double a = U(rng), b = U(rng);
    auto drift = [&](double, const Vec& y) { return Vec(Vec{{a * y[1] * y[1], b * std::sin(2.0 * y[0])}}); };
    LabelFlow lf = integrate_label_flow(drift_series(g, 50, 1e-3, drift), nf);
    const Field& Y = lf.Y.back();
    Field id = Field::vector(g, [](const Vec& y) { return y; });
    double e = norm(Y - id, NormKind::H2q, 8.0);
    Field FY(g, 1);
    for (std::size_t n = 0; n < g->node_count(); ++n) FY.set_vec(n, F(Y.vec(n)));
    ratios.push_back(norm(FY, NormKind::H2q, 8.0) / ((1.0 + e + e * e) * Fn));
  }
  double C = *std::max_element(ratios.begin(), ratios.begin() + 5);
  for (std::size_t k = 5; k < ratios.size(); ++k) EXPECT_LE(ratios[k], 1.5 * C);
}
