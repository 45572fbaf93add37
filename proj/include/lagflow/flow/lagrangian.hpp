/// Label flow Y, composed flow X = psi o Y with its gradient, inverse
/// gradient Z and Jacobian J, and the two independent cross-check integrators.
#pragma once

#include "lagflow/fields/norms.hpp"
#include "lagflow/flow/noise_flow.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace lagflow {

/// Flow quantities at one time level, all indexed by label nodes.
struct FlowState {
  double t = 0.0;
  Field X;
  Field gradX;
  Field Z;
  Field J;
  double guard = 0.0;  // max_y |grad X - I|_F
  bool valid = true;   // guard <= eps_star and J > 0
};

/// Z by closed-form inversion and J = det grad X. The state is marked invalid
/// when the sup-norm guard |grad X - I| <= eps_star fails or J <= 0.
inline FlowState make_flow_state(double t, Field X, Field gradX, double eps_star) {
  FlowState s;
  s.t = t;
  const auto& g = gradX.grid_ptr();
  s.Z = Field(g, 2);
  s.J = Field(g, 0);
  const int d = gradX.dim();
  double guard = 0.0;
  bool positive = true;
  for (std::size_t n = 0; n < gradX.node_count(); ++n) {
    Mat A = gradX.mat(n);
    guard = std::max(guard, (A - identity(d)).norm());
    double det = A.determinant();
    s.J(n, 0) = det;
    if (!(det > 0.0)) positive = false;
    s.Z.set_mat(n, inverse(A));
  }
  s.guard = guard;
  s.valid = guard <= eps_star && positive;
  s.X = std::move(X);
  s.gradX = std::move(gradX);
  return s;
}

inline FlowState identity_state(const GridPtr& g) {
  return make_flow_state(0.0, Field::vector(g, [](const Vec& y) { return y; }), Field::identity_matrix(g), 1.0);
}

struct LabelFlow {
  TimeSeries Y;
  TimeSeries gradY;
  // psi_n(Y_n) and D psi_n(Y_n), filled as a by-product of the Heun steps
  std::vector<Field> psi, Dpsi;
};

namespace detail {

/// d/dt (Y, grad Y) at one label for drift u (value) and grad u.
inline void label_rhs(const PsiJet& j, const Mat& G, const Mat& gradY, const Vec& u, const Mat& gu, Vec& dY,
                      Mat& dgradY) {
  const int d = static_cast<int>(u.size());
  dY = G * u;
  // d_b (G(Y) u)_i = sum_m (d_m G)_{ij} d_b Y_m u_j + G_{ij} d_b u_j
  // with d_m G = -G (d_m D psi) G and (d_m D psi)_{ab} = H.comp[a](b, m).
  Vec Gu = dY;
  Mat acc = Mat::Zero(d, d);  // acc(a, m) = sum_b (d_m D psi)_{ab} (G u)_b
  for (int a = 0; a < d; ++a)
    for (int m = 0; m < d; ++m) {
      double s = 0.0;
      for (int b = 0; b < d; ++b) s += j.H.comp[a](b, m) * Gu[b];
      acc(a, m) = s;
    }
  dgradY = -G * acc * gradY + G * gu;
}

}  // namespace detail

/// Y_t(y) = y + int_0^t D psi_s(Y_s(y))^{-1} u(s, y) ds by Heun, jointly with
/// grad Y. The drift is read at the fixed label y.
inline LabelFlow integrate_label_flow(const TimeSeries& ubar, const NoiseFlowTable& nf) {
  if (ubar.empty()) throw Error("label flow: empty drift series");
  const GridPtr& g = ubar.frames[0].grid_ptr();
  const double dt = nf.step();
  if (ubar.size() > nf.steps() + 1) throw Error("label flow: drift series longer than the noise flow");
  if (ubar.size() > 1 && std::abs(ubar.uniform_step() - dt) > 1e-12 * dt)
    throw Error("label flow: drift frames not aligned with the noise grid");
  LabelFlow lf;
  Field Y = Field::vector(g, [](const Vec& y) { return y; });
  Field gY = Field::identity_matrix(g);
  lf.Y.push(0.0, Y);
  lf.gradY.push(0.0, gY);
  Field gu_prev = differentiate(ubar.frames[0], 1);
  for (std::size_t n = 0; n + 1 < ubar.size(); ++n) {
    Field gu_next = differentiate(ubar.frames[n + 1], 1);
    const Field& u0 = ubar.frames[n];
    const Field& u1 = ubar.frames[n + 1];
    Field Yn(g, 1), gYn(g, 2), P(g, 1), DP(g, 2);
    parallel_for(g->node_count(), [&](std::size_t i) {
      Vec y = Y.vec(i);
      Mat gy = gY.mat(i);
      PsiJet j0 = nf.eval(n, y);
      P.set_vec(i, j0.x);
      DP.set_mat(i, j0.D);
      Mat G0 = inverse(j0.D);
      Vec k1;
      Mat K1;
      detail::label_rhs(j0, G0, gy, u0.vec(i), gu_prev.mat(i), k1, K1);
      Vec yp = y + dt * k1;
      Mat gp = gy + dt * K1;
      PsiJet j1 = nf.eval(n + 1, yp);
      Mat G1 = inverse(j1.D);
      Vec k2;
      Mat K2;
      detail::label_rhs(j1, G1, gp, u1.vec(i), gu_next.mat(i), k2, K2);
      Yn.set_vec(i, y + 0.5 * dt * (k1 + k2));
      gYn.set_mat(i, gy + 0.5 * dt * (K1 + K2));
    });
    lf.psi.push_back(std::move(P));
    lf.Dpsi.push_back(std::move(DP));
    Y = std::move(Yn);
    gY = std::move(gYn);
    Y.check_finite("label flow");
    lf.Y.push(ubar.times[n + 1], Y);
    lf.gradY.push(ubar.times[n + 1], gY);
    gu_prev = std::move(gu_next);
  }
  Field P(g, 1), DP(g, 2);
  const std::size_t last = ubar.size() - 1;
  parallel_for(g->node_count(), [&](std::size_t i) {
    PsiJet j = nf.eval(last, Y.vec(i));
    P.set_vec(i, j.x);
    DP.set_mat(i, j.D);
  });
  lf.psi.push_back(std::move(P));
  lf.Dpsi.push_back(std::move(DP));
  return lf;
}

/// X = psi(Y), grad X = D psi(Y) grad Y, then Z and J at each level.
inline std::vector<FlowState> compose_flow(const NoiseFlowTable& nf, const LabelFlow& lf, double eps_star) {
  std::vector<FlowState> out;
  out.reserve(lf.Y.size());
  for (std::size_t n = 0; n < lf.Y.size(); ++n) {
    const Field& Y = lf.Y.frames[n];
    const Field& gY = lf.gradY.frames[n];
    const GridPtr& g = Y.grid_ptr();
    Field X(g, 1), gX(g, 2);
    const bool cached = lf.psi.size() == lf.Y.size();
    parallel_for(g->node_count(), [&](std::size_t i) {
      if (cached) {
        X.set_vec(i, lf.psi[n].vec(i));
        gX.set_mat(i, lf.Dpsi[n].mat(i) * gY.mat(i));
        return;
      }
      PsiJet j = nf.eval(n, Y.vec(i));
      X.set_vec(i, j.x);
      gX.set_mat(i, j.D * gY.mat(i));
    });
    out.push_back(make_flow_state(lf.Y.times[n], std::move(X), std::move(gX), eps_star));
  }
  return out;
}

/// Heun integration of dX = u(t, y) dt + sum_k Q_k(X) o dW^k jointly with
/// grad X, without the psi / Y factorization.
inline std::vector<FlowState> direct_flow_oracle(const TimeSeries& ubar, const TransportField& Q, const BrownianBundle& W,
                                                 double eps_star) {
  const GridPtr& g = ubar.frames[0].grid_ptr();
  const int K = Q.count();
  const double dt = W.step();
  if (ubar.size() > W.steps() + 1) throw Error("direct flow: drift series longer than the bundle");
  Field X = Field::vector(g, [](const Vec& y) { return y; });
  Field gX = Field::identity_matrix(g);
  std::vector<FlowState> out;
  out.push_back(make_flow_state(0.0, X, gX, eps_star));
  Field gu0 = differentiate(ubar.frames[0], 1);
  std::vector<double> dW(K);
  for (std::size_t n = 0; n + 1 < ubar.size(); ++n) {
    for (int k = 0; k < K; ++k) dW[k] = W.transport_increment(k, n);
    Field gu1 = differentiate(ubar.frames[n + 1], 1);
    Field Xn(g, 1), gXn(g, 2);
    parallel_for(g->node_count(), [&](std::size_t i) {
      Vec x = X.vec(i);
      Mat A = gX.mat(i);
      Vec u0 = ubar.frames[n].vec(i), u1 = ubar.frames[n + 1].vec(i);
      Mat G0 = gu0.mat(i), G1 = gu1.mat(i);
      Vec nx0 = Vec::Zero(x.size());
      Mat nA0 = Mat::Zero(A.rows(), A.cols());
      for (int k = 0; k < K; ++k) {
        TransportJet j = Q.jet(k, x);
        nx0 += dW[k] * j.q;
        nA0 += dW[k] * (j.dq * A);
      }
      Vec xp = x + dt * u0 + nx0;
      Mat Ap = A + dt * G0 + nA0;
      Vec nx1 = Vec::Zero(x.size());
      Mat nA1 = Mat::Zero(A.rows(), A.cols());
      for (int k = 0; k < K; ++k) {
        TransportJet j = Q.jet(k, xp);
        nx1 += dW[k] * j.q;
        nA1 += dW[k] * (j.dq * Ap);
      }
      Xn.set_vec(i, x + 0.5 * dt * (u0 + u1) + 0.5 * (nx0 + nx1));
      gXn.set_mat(i, A + 0.5 * dt * (G0 + G1) + 0.5 * (nA0 + nA1));
    });
    X = std::move(Xn);
    gX = std::move(gXn);
    out.push_back(make_flow_state(ubar.times[n + 1], X, gX, eps_star));
    gu0 = std::move(gu1);
  }
  return out;
}

/// grad u : Z^T = sum_{i,j} d_j u_i Z_{ji}, nodewise.
inline Field velocity_divergence(const Field& gradu, const Field& Z) {
  const int d = Z.dim();
  Field out(Z.grid_ptr(), 0);
  for (std::size_t n = 0; n < Z.node_count(); ++n) {
    double s = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) s += gradu(n, i * d + j) * Z(n, j * d + i);
    out(n, 0) = s;
  }
  return out;
}

/// RK2 integration of d_t y = sign * y (grad u : Z^T), y(0) = y0, on the frames
/// of an existing flow. sign = +1 gives the Jacobian ODE, -1 the transformed
/// continuity equation.
inline TimeSeries transport_scalar_ode(const TimeSeries& ubar, const std::vector<FlowState>& states, const Field& y0,
                                       double sign) {
  const std::size_t frames = std::min(ubar.size(), states.size());
  TimeSeries out;
  Field y = y0;
  out.push(0.0, y);
  Field a0 = velocity_divergence(differentiate(ubar.frames[0], 1), states[0].Z);
  for (std::size_t n = 0; n + 1 < frames; ++n) {
    double dt = ubar.times[n + 1] - ubar.times[n];
    Field a1 = velocity_divergence(differentiate(ubar.frames[n + 1], 1), states[n + 1].Z);
    Field next(y.grid_ptr(), 0);
    for (std::size_t i = 0; i < y.node_count(); ++i) {
      double k1 = sign * y(i, 0) * a0(i, 0);
      double yp = y(i, 0) + dt * k1;
      double k2 = sign * yp * a1(i, 0);
      next(i, 0) = y(i, 0) + 0.5 * dt * (k1 + k2);
    }
    y = std::move(next);
    out.push(ubar.times[n + 1], y);
    a0 = std::move(a1);
  }
  return out;
}

/// Independent Jacobian from d_t J = J grad u : Z^T, J(0) = 1.
inline TimeSeries jacobian_ode_oracle(const TimeSeries& ubar, const std::vector<FlowState>& states) {
  return transport_scalar_ode(ubar, states, Field(ubar.frames[0].grid_ptr(), 0, 1.0), 1.0);
}

/// Newton solve of X_h(t, y) = x with X_h the multilinear interpolant of the
/// marker positions. Starts from the label whose image is nearest to x.
struct InverseResult {
  Vec y;
  double residual = 0.0;
  int iterations = 0;
};

inline InverseResult invert_flow(const FlowState& fs, const Vec& x, double tol = 1e-10, int max_iter = 50) {
  const Grid& g = fs.X.grid();
  const int d = g.dim();
  std::size_t best = 0;
  double bestd = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    double dist = (fs.X.vec(n) - x).squaredNorm();
    if (dist < bestd) {
      bestd = dist;
      best = n;
    }
  }
  Vec y = g.coord(best);
  auto clamp_box = [&](Vec& v) {
    for (int a = 0; a < d; ++a) v[a] = std::clamp(v[a], g.lower(a), g.upper(a));
  };
  InverseResult r;
  for (int it = 0; it <= max_iter; ++it) {
    auto [val, jac] = interpolate_with_jacobian(fs.X, y, 2);
    Vec res = val - x;
    r.residual = res.norm();
    r.iterations = it;
    if (r.residual <= tol) {
      r.y = y;
      return r;
    }
    if (it == max_iter) break;
    Vec step = jac.partialPivLu().solve(res);
    double damp = 1.0;
    for (int ls = 0; ls < 30; ++ls) {
      Vec trial = y - damp * step;
      clamp_box(trial);
      double tr = 0.0;
      auto v = interpolate(fs.X, trial, 2);
      for (int a = 0; a < d; ++a) tr += (v[a] - x[a]) * (v[a] - x[a]);
      if (std::sqrt(tr) < r.residual || ls == 29) {
        y = trial;
        break;
      }
      damp *= 0.5;
    }
  }
  std::ostringstream os;
  os << "invert_flow: no convergence in " << max_iter << " Newton steps, residual " << r.residual;
  throw NumericalError(os.str());
}

}  // namespace lagflow
