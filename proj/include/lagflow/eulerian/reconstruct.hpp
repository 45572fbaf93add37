/// Moving-domain snapshots from the Lagrangian solution, the marker
/// kinematic residual and the local-strong-solution report.
#pragma once

#include "lagflow/fields/interpolate.hpp"
#include "lagflow/fixedpoint/picard.hpp"

#include <sstream>

namespace lagflow {

/// Boundary label nodes in loop order: counterclockwise in 2D. In 3D the
/// boundary nodes are returned in slot order.
inline std::vector<std::size_t> boundary_loop(const Grid& g) {
  if (g.dim() != 2) return {g.boundary_nodes().begin(), g.boundary_nodes().end()};
  const int nx = g.extent(0), ny = g.extent(1);
  std::vector<std::size_t> loop;
  for (int i = 0; i < nx - 1; ++i) loop.push_back(g.node({i, 0, 0}));
  for (int j = 0; j < ny - 1; ++j) loop.push_back(g.node({nx - 1, j, 0}));
  for (int i = nx - 1; i > 0; --i) loop.push_back(g.node({i, ny - 1, 0}));
  for (int j = ny - 1; j > 0; --j) loop.push_back(g.node({0, j, 0}));
  return loop;
}

namespace detail {

inline double cross2(const Vec& a, const Vec& b) { return a[0] * b[1] - a[1] * b[0]; }

inline bool segments_cross(const Vec& p1, const Vec& p2, const Vec& q1, const Vec& q2) {
  double d1 = cross2(q2 - q1, p1 - q1), d2 = cross2(q2 - q1, p2 - q1);
  double d3 = cross2(p2 - p1, q1 - p1), d4 = cross2(p2 - p1, q2 - p1);
  return ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0));
}

}  // namespace detail

/// True when no two non-adjacent edges of the closed polygon intersect.
inline bool loop_is_simple(const std::vector<Vec>& pts) {
  const std::size_t m = pts.size();
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 2; b < m; ++b) {
      if (a == 0 && b == m - 1) continue;
      if (detail::segments_cross(pts[a], pts[(a + 1) % m], pts[b], pts[(b + 1) % m])) return false;
    }
  return true;
}

/// Volume enclosed by the boundary markers: shoelace formula in 2D, the
/// divergence theorem over triangulated faces in 3D.
inline double marker_volume(const Field& X) {
  const Grid& g = X.grid();
  if (g.dim() == 2) {
    auto loop = boundary_loop(g);
    double a = 0.0;
    for (std::size_t k = 0; k < loop.size(); ++k)
      a += detail::cross2(X.vec(loop[k]), X.vec(loop[(k + 1) % loop.size()]));
    return 0.5 * a;
  }
  double v = 0.0;
  auto tri = [&](std::size_t a, std::size_t b, std::size_t c) {
    Eigen::Vector3d p = X.vec(a), q = X.vec(b), r = X.vec(c);
    v += p.dot(q.cross(r)) / 6.0;
  };
  for (int axis = 0; axis < 3; ++axis) {
    int u = (axis + 1) % 3, w = (axis + 2) % 3;
    for (int side = 0; side < 2; ++side) {
      int fixed = side == 0 ? 0 : g.extent(axis) - 1;
      for (int i = 0; i + 1 < g.extent(u); ++i)
        for (int j = 0; j + 1 < g.extent(w); ++j) {
          std::array<int, 3> c00{}, c10{}, c11{}, c01{};
          c00[axis] = c10[axis] = c11[axis] = c01[axis] = fixed;
          c00[u] = i, c00[w] = j;
          c10[u] = i + 1, c10[w] = j;
          c11[u] = i + 1, c11[w] = j + 1;
          c01[u] = i, c01[w] = j + 1;
          // (u, w, axis) is a right-handed frame; the upper face is outward-oriented as listed
          if (side == 1) {
            tri(g.node(c00), g.node(c10), g.node(c11));
            tri(g.node(c00), g.node(c11), g.node(c01));
          } else {
            tri(g.node(c00), g.node(c11), g.node(c10));
            tri(g.node(c00), g.node(c01), g.node(c11));
          }
        }
    }
  }
  return v;
}

struct MovingDomainSnapshot {
  double t = 0.0;
  Field X;    // interior and boundary markers X(t, y)
  Field rho;  // rho(t, X(t, y)) = rho_bar(t, y)
  Field u;    // u(t, X(t, y)) = ubar(t, y)
  Field J;
  double volume = 0.0;           // marker polygon / polyhedron
  double jacobian_volume = 0.0;  // int J dy
  bool boundary_simple = true;
};

inline std::vector<MovingDomainSnapshot> reconstruct(const SolutionBundle& b) {
  std::vector<MovingDomainSnapshot> out;
  for (std::size_t n = 0; n < b.states.size(); ++n) {
    const FlowState& s = b.states[n];
    MovingDomainSnapshot m;
    m.t = s.t;
    m.X = s.X;
    m.rho = b.rho.frames[n];
    m.u = b.ubar.frames[n];
    m.J = s.J;
    m.volume = marker_volume(s.X);
    const Grid& g = s.X.grid();
    for (std::size_t i = 0; i < g.node_count(); ++i) m.jacobian_volume += g.weight(i) * s.J(i, 0);
    if (g.dim() == 2) {
      std::vector<Vec> pts;
      for (auto k : boundary_loop(g)) pts.push_back(s.X.vec(k));
      m.boundary_simple = loop_is_simple(pts);
    }
    out.push_back(std::move(m));
  }
  return out;
}

struct EulerianSample {
  Vec y;
  double rho = 0.0;
  Vec u;
};

/// rho(t, x) and u(t, x) at an arbitrary point: invert the flow, then
/// multilinear interpolation on the label grid.
inline EulerianSample eulerian_sample(const MovingDomainSnapshot& m, const FlowState& s, const Vec& x) {
  InverseResult inv = invert_flow(s, x);
  EulerianSample e;
  e.y = inv.y;
  e.rho = interpolate(m.rho, inv.y, 2)[0];
  auto u = interpolate(m.u, inv.y, 2);
  e.u = Vec::Map(u.data(), static_cast<Eigen::Index>(u.size()));
  return e;
}

struct KinematicResidual {
  std::vector<double> per_step;  // max over boundary markers, one per step
  double max = 0.0;
};

/// Per step and boundary marker: dx - (u_n + u_{n+1}) dt / 2 - sum_k Q_k(x_mid) dW_k
/// with x_mid the midpoint of the marker step.
inline KinematicResidual kinematic_residual(const SolutionBundle& b, const TransportField& Q, const BrownianBundle& W) {
  KinematicResidual r;
  if (b.states.empty()) return r;
  const Grid& g = b.states[0].X.grid();
  const int K = Q.count();
  for (std::size_t n = 0; n + 1 < b.states.size(); ++n) {
    const double dt = b.states[n + 1].t - b.states[n].t;
    double m = 0.0;
    for (std::size_t node : g.boundary_nodes()) {
      Vec x0 = b.states[n].X.vec(node), x1 = b.states[n + 1].X.vec(node);
      Vec res = x1 - x0 - 0.5 * dt * (b.ubar.frames[n].vec(node) + b.ubar.frames[n + 1].vec(node));
      Vec mid = 0.5 * (x0 + x1);
      for (int k = 0; k < K; ++k) res -= Q.q(k, mid) * W.transport_increment(k, n);
      m = std::max(m, res.norm());
    }
    r.per_step.push_back(m);
    r.max = std::max(r.max, m);
  }
  return r;
}

struct CheckResult {
  bool pass = true;
  double value = 0.0;
  std::string detail;
};

struct SolutionReport {
  CheckResult diffeomorphism;  // invertible grad X, J > 0, simple boundary loop
  CheckResult regularity;      // finite norms and shrinking frame gaps
  CheckResult residual;        // recast-system residual per frame
  bool pass() const { return diffeomorphism.pass && regularity.pass && residual.pass; }
};

/// Diffeomorphism, regularity and residual checks of a solution record.
/// `residual_tol` bounds the per-frame residual of the recast system.
inline SolutionReport validate_solution(const SolutionBundle& b, double residual_tol) {
  SolutionReport rep;
  double jmin = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < b.states.size() && rep.diffeomorphism.pass; ++n) {
    const FlowState& s = b.states[n];
    for (std::size_t i = 0; i < s.J.node_count(); ++i) {
      double j = s.J(i, 0);
      jmin = std::min(jmin, j);
      if (!(j > 0.0) || !std::isfinite(j)) {
        std::ostringstream os;
        os << "J = " << j << " at node " << i << ", t = " << s.t;
        rep.diffeomorphism = {false, j, os.str()};
        break;
      }
    }
    if (rep.diffeomorphism.pass && s.guard > b.cfg.eps_star) {
      std::ostringstream os;
      os << "|grad X - I| = " << s.guard << " exceeds eps_star at t = " << s.t;
      rep.diffeomorphism = {false, s.guard, os.str()};
    }
    if (rep.diffeomorphism.pass && s.X.dim() == 2) {
      std::vector<Vec> pts;
      for (auto k : boundary_loop(s.X.grid())) pts.push_back(s.X.vec(k));
      if (!loop_is_simple(pts)) {
        std::ostringstream os;
        os << "boundary loop self-intersects at t = " << s.t;
        rep.diffeomorphism = {false, 0.0, os.str()};
      }
    }
  }
  if (rep.diffeomorphism.pass) {
    rep.diffeomorphism.value = jmin;
    rep.diffeomorphism.detail = "min J";
  }
  // frame-to-frame gaps in the H^{1,q} surrogate; a proxy for time continuity, not a trace norm
  double gap = 0.0;
  bool finite = true;
  for (std::size_t n = 0; n < b.v.size(); ++n) {
    double nv = norm(b.v.frames[n], NormKind::H2q, b.cfg.q);
    finite = finite && std::isfinite(nv);
    if (n > 0) gap = std::max(gap, norm(b.v.frames[n] - b.v.frames[n - 1], NormKind::H1q, b.cfg.q));
  }
  rep.regularity = {finite, gap, "max frame gap (H1q)"};
  rep.residual = {b.transformed_residual <= residual_tol, b.transformed_residual, "max recast residual"};
  return rep;
}

}  // namespace lagflow
