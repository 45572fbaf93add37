/// Manufactured-solution runs of the Lame solver and the discrete
/// eigenpair of the homogeneous-traction operator.
#pragma once

#include "lagflow/lame/solve.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include <functional>

namespace lagflow {

/// Exact field v*(t, y) with its time derivative and spatial derivatives:
/// grad(i, a) = d_a v_i, hess[i](a, b) = d_a d_b v_i.
struct Manufactured {
  std::function<Vec(double, const Vec&)> value;
  std::function<Vec(double, const Vec&)> rate;
  std::function<Mat(double, const Vec&)> grad;
  std::function<std::array<Mat, 3>(double, const Vec&)> hess;
};

/// v* = e^{-t} (sin(pi y1) sin(pi y2), 0).
inline Manufactured mms_sine() {
  Manufactured m;
  auto s = [](const Vec& y) { return std::sin(M_PI * y[0]) * std::sin(M_PI * y[1]); };
  m.value = [s](double t, const Vec& y) {
    Vec v = Vec::Zero(y.size());
    v[0] = std::exp(-t) * s(y);
    return v;
  };
  m.rate = [m](double t, const Vec& y) { return Vec(-m.value(t, y)); };
  m.grad = [](double t, const Vec& y) {
    Mat g = Mat::Zero(y.size(), y.size());
    g(0, 0) = std::exp(-t) * M_PI * std::cos(M_PI * y[0]) * std::sin(M_PI * y[1]);
    g(0, 1) = std::exp(-t) * M_PI * std::sin(M_PI * y[0]) * std::cos(M_PI * y[1]);
    return g;
  };
  m.hess = [](double t, const Vec& y) {
    const int d = static_cast<int>(y.size());
    std::array<Mat, 3> h;
    for (auto& x : h) x = Mat::Zero(d, d);
    double e = std::exp(-t) * M_PI * M_PI;
    double s1 = std::sin(M_PI * y[0]), s2 = std::sin(M_PI * y[1]);
    double c1 = std::cos(M_PI * y[0]), c2 = std::cos(M_PI * y[1]);
    h[0](0, 0) = -e * s1 * s2;
    h[0](1, 1) = -e * s1 * s2;
    h[0](0, 1) = h[0](1, 0) = e * c1 * c2;
    return h;
  };
  return m;
}

/// v* = e^{-t} (y1^2 + y1 y2, y2^2 - y1^2): quadratic in space, so the spatial
/// stencils are exact and only the time error remains.
inline Manufactured mms_quadratic() {
  Manufactured m;
  m.value = [](double t, const Vec& y) {
    Vec v = Vec::Zero(y.size());
    v[0] = std::exp(-t) * (y[0] * y[0] + y[0] * y[1]);
    v[1] = std::exp(-t) * (y[1] * y[1] - y[0] * y[0]);
    return v;
  };
  m.rate = [m](double t, const Vec& y) { return Vec(-m.value(t, y)); };
  m.grad = [](double t, const Vec& y) {
    Mat g = Mat::Zero(y.size(), y.size());
    double e = std::exp(-t);
    g(0, 0) = e * (2.0 * y[0] + y[1]);
    g(0, 1) = e * y[0];
    g(1, 0) = -2.0 * e * y[0];
    g(1, 1) = 2.0 * e * y[1];
    return g;
  };
  m.hess = [](double t, const Vec& y) {
    const int d = static_cast<int>(y.size());
    std::array<Mat, 3> h;
    for (auto& x : h) x = Mat::Zero(d, d);
    double e = std::exp(-t);
    h[0](0, 0) = 2.0 * e;
    h[0](0, 1) = h[0](1, 0) = e;
    h[1](1, 1) = 2.0 * e;
    h[1](0, 0) = -2.0 * e;
    return h;
  };
  return m;
}

/// A v* = -(mu Lap v* + (mu + lambda) grad div v*) / rho0 from the exact derivatives.
inline Vec exact_A(const Manufactured& m, double t, const Vec& y, const FluidParams& fp, double rho0) {
  const int d = static_cast<int>(y.size());
  auto h = m.hess(t, y);
  Vec out(d);
  for (int i = 0; i < d; ++i) {
    double lap = 0.0, gdiv = 0.0;
    for (int k = 0; k < d; ++k) lap += h[i](k, k);
    for (int j = 0; j < d; ++j) gdiv += h[j](i, j);
    out[i] = -(fp.mu * lap + (fp.mu + fp.lambda) * gdiv) / rho0;
  }
  return out;
}

struct MmsResult {
  double error = 0.0;  // max over steps and nodes of |v_h - v*|
  double compatibility_residual = 0.0;
};

/// Solves with f = d_t v* + A v*, g = S(grad v*) N, u0 = v*(0) and reports the sup error.
inline MmsResult mms_run(const LameStepper& st, const Manufactured& m, std::size_t steps) {
  const GridPtr& g = st.op().grid_ptr();
  const FluidParams& fp = st.op().params();
  const double rho0 = st.op().rho0()(0, 0);
  const double dt = st.step();
  auto exact = [&](double t) { return Field::vector(g, [&](const Vec& y) { return m.value(t, y); }); };
  auto source = [&](std::size_t n) {
    double t = dt * static_cast<double>(n);
    return Field::vector(g, [&](const Vec& y) { return Vec(m.rate(t, y) + exact_A(m, t, y, fp, rho0)); });
  };
  auto traction = [&](std::size_t n) {
    double t = dt * static_cast<double>(n);
    BoundaryValues b(g->boundary_count());
    for (std::size_t s = 0; s < b.size(); ++s) {
      Vec y = g->coord(g->boundary_nodes()[s]);
      b[s] = stress(m.grad(t, y), fp) * g->normal(s);
    }
    return b;
  };
  LameSolution sol = solve_lame(st, source, traction, exact(0.0), steps);
  MmsResult r;
  r.compatibility_residual = sol.compatibility_residual;
  for (std::size_t n = 0; n < sol.v.size(); ++n) r.error = std::max(r.error, (sol.v.frames[n] - exact(sol.v.times[n])).max_abs());
  return r;
}

/// Eigenpair of the operator that the implicit step inverts on interior
/// unknowns once the traction rows B u = 0 have eliminated the boundary
/// unknowns: A_red = A_II - A_IB B_BB^{-1} B_BI.
struct TractionEigenpair {
  double lambda = 0.0;
  Field mode;             // right eigenvector; boundary values from B u = 0
  Eigen::VectorXd left;   // left eigenvector on interior unknowns, scaled so left . right = 1
  std::vector<Eigen::Index> interior;  // unknown indices of interior rows
};

/// Smallest real eigenvalue of A_red with a real eigenvector (dense; small grids only).
inline TractionEigenpair traction_eigenpair(const LameOperator& op) {
  const Grid& g = op.grid();
  const int d = g.dim();
  std::vector<Eigen::Index> I, B;
  for (std::size_t n = 0; n < g.node_count(); ++n)
    for (int c = 0; c < d; ++c) (g.is_boundary(n) ? B : I).push_back(static_cast<Eigen::Index>(n * d + c));
  Eigen::MatrixXd A = Eigen::MatrixXd(op.A());
  Eigen::MatrixXd Bm = Eigen::MatrixXd(op.B());
  // traction rows are indexed by slot; map boundary unknown order to rows in slot order
  std::vector<Eigen::Index> Brows;
  for (std::size_t s = 0; s < g.boundary_count(); ++s)
    for (int c = 0; c < d; ++c) Brows.push_back(static_cast<Eigen::Index>(s * d + c));
  std::vector<Eigen::Index> Bcols;
  for (std::size_t s = 0; s < g.boundary_count(); ++s)
    for (int c = 0; c < d; ++c) Bcols.push_back(static_cast<Eigen::Index>(g.boundary_nodes()[s] * d + c));
  const auto nI = static_cast<Eigen::Index>(I.size()), nB = static_cast<Eigen::Index>(Bcols.size());
  Eigen::MatrixXd AII = A(I, I), AIB = A(I, Bcols), BBI = Bm(Brows, I), BBB = Bm(Brows, Bcols);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(BBB);
  Eigen::MatrixXd E = lu.solve(BBI);  // u_B = -E u_I
  Eigen::MatrixXd Ared = AII - AIB * E;
  Eigen::EigenSolver<Eigen::MatrixXd> es(Ared);
  if (es.info() != Eigen::Success) throw NumericalError("traction eigenpair: eigen-decomposition failed");
  Eigen::Index best = -1;
  for (Eigen::Index k = 0; k < nI; ++k) {
    auto ev = es.eigenvalues()[k];
    if (std::abs(ev.imag()) > 1e-9 * std::abs(ev) || ev.real() <= 1e-8) continue;
    if (best < 0 || ev.real() < es.eigenvalues()[best].real()) best = k;
  }
  if (best < 0) throw NumericalError("traction eigenpair: no positive real eigenvalue");
  TractionEigenpair r;
  r.lambda = es.eigenvalues()[best].real();
  Eigen::VectorXd phi = es.eigenvectors().col(best).real();
  phi /= phi.norm();
  Eigen::EigenSolver<Eigen::MatrixXd> et(Ared.transpose());
  Eigen::Index lb = 0;
  for (Eigen::Index k = 0; k < nI; ++k)
    if (std::abs(et.eigenvalues()[k] - r.lambda) < std::abs(et.eigenvalues()[lb] - r.lambda)) lb = k;
  Eigen::VectorXd psi = et.eigenvectors().col(lb).real();
  psi /= psi.dot(phi);
  Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(op.unknowns()));
  full(I) = phi;
  full(Bcols) = -E * phi;
  r.mode = op.from_vector(full);
  r.left = psi;
  r.interior = I;
  (void)nB;
  return r;
}

/// Modal coefficient left . u_I of a field.
inline double modal_coefficient(const TractionEigenpair& ep, const Field& u) {
  double c = 0.0;
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(ep.interior.size()); ++k)
    c += ep.left[k] * u.data()[static_cast<std::size_t>(ep.interior[k])];
  return c;
}

}  // namespace lagflow
