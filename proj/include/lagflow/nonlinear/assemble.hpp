/// Transformed bulk nonlinearity F_u and boundary nonlinearity F_Gamma,
/// both produced by one dimension-generic pointwise kernel.
#pragma once

#include "lagflow/fields/differentiate.hpp"
#include "lagflow/flow/lagrangian.hpp"
#include "lagflow/nonlinear/eos.hpp"

namespace lagflow {

/// Outward normal extended into the box: every face normal is carried inward
/// with weight max(0, 1 - (d_f - d_min) / (2h))^2, where d_f is the distance to
/// face f, and the blended direction is scaled by (1 - d_min / c)^2 with c a
/// quarter of the shortest side. A unit extension cannot exist (it would have to
/// vanish somewhere), so the field tapers to zero before the medial axis, where
/// opposite faces cancel. Boundary nodes carry the grid normals.
inline Field normal_extension(const GridPtr& g) {
  const int d = g->dim();
  Field N(g, 1);
  for (std::size_t n = 0; n < g->node_count(); ++n) {
    int slot = g->boundary_slot(n);
    if (slot >= 0) {
      N.set_vec(n, g->normal(slot));
      continue;
    }
    Vec y = g->coord(n);
    double dist[6];
    double dmin = std::numeric_limits<double>::infinity(), cut = dmin;
    for (int a = 0; a < d; ++a) {
      dist[2 * a] = y[a] - g->lower(a);
      dist[2 * a + 1] = g->upper(a) - y[a];
      dmin = std::min({dmin, dist[2 * a], dist[2 * a + 1]});
      cut = std::min(cut, 0.25 * (g->upper(a) - g->lower(a)));
    }
    const double taper = std::pow(std::max(0.0, 1.0 - dmin / cut), 2);
    if (taper == 0.0) continue;
    Vec acc = Vec::Zero(d);
    for (int a = 0; a < d; ++a) {
      double h = g->spacing(a);
      for (int side = 0; side < 2; ++side) {
        double w = std::max(0.0, 1.0 - (dist[2 * a + side] - dmin) / (2.0 * h));
        acc[a] += (side == 0 ? -1.0 : 1.0) * w * w;
      }
    }
    N.set_vec(n, taper * acc / acc.norm());
  }
  return N;
}

namespace detail {

/// Pointwise data for the transformed nonlinearities. Index conventions:
/// gu(i, k) = d_k u_i, hu[i](k, l) = d_k d_l u_i, Z(k, j) = Z_kj,
/// gZ[l](k, j) = d_l Z_kj, gp[j] = d_j p(rho0 / J).
struct PointData {
  int d = 2;
  Mat gu, Z;
  std::array<Mat, 3> hu, gZ;
  Vec gp;
  double J = 1.0, rho0 = 1.0;
};

inline double kd(int a, int b) { return a == b ? 1.0 : 0.0; }

inline Vec F_u_point(const PointData& s, const FluidParams& fp) {
  const int d = s.d;
  const double mu = fp.mu, ml = fp.mu + fp.lambda;
  const double J = s.J, r0 = s.rho0;
  const Mat& Z = s.Z;
  Vec F = Vec::Zero(d);
  for (int i = 0; i < d; ++i) {
    // Lame defect (J - 1) / rho0 (mu Lap u_i + (mu + lambda) d_i div u)
    double lap = 0.0, gdiv = 0.0;
    for (int k = 0; k < d; ++k) lap += s.hu[i](k, k);
    for (int j = 0; j < d; ++j) gdiv += s.hu[j](i, j);
    double g1 = (J - 1.0) / r0 * (mu * lap + ml * gdiv);

    double g2a = 0.0, g2b = 0.0, g2c = 0.0;
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
          g2a += s.hu[i](k, l) * (Z(k, j) - kd(k, j)) * Z(l, j);
          g2c += Z(l, j) * s.gu(i, k) * s.gZ[l](k, j);
        }
    for (int k = 0; k < d; ++k)
      for (int l = 0; l < d; ++l) g2b += s.hu[i](k, l) * (Z(l, k) - kd(l, k));
    double g2 = mu * J / r0 * (g2a + g2b + g2c);

    double g3a = 0.0, g3b = 0.0, g3c = 0.0;
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
          g3a += s.hu[j](k, l) * (Z(k, j) - kd(k, j)) * Z(l, i);
          g3c += Z(l, i) * s.gu(j, k) * s.gZ[l](k, j);
        }
    for (int j = 0; j < d; ++j)
      for (int l = 0; l < d; ++l) g3b += s.hu[j](j, l) * (Z(l, i) - kd(l, i));
    double g3 = ml * J / r0 * (g3a + g3b + g3c);

    double g4 = 0.0;
    for (int j = 0; j < d; ++j) g4 += Z(j, i) * s.gp[j];
    g4 *= -J / r0;

    F[i] = g1 + g2 + g3 + g4;
  }
  return F;
}

/// Boundary nonlinearity at one point with normal N and pressure p(rho0 / J).
inline Vec F_Gamma_point(const Mat& gu, const Mat& Z, double J, double p, const Vec& N, const FluidParams& fp) {
  const int d = static_cast<int>(N.size());
  const double mu = fp.mu, lam = fp.lambda;
  Vec c = J * Z.transpose() * N;  // c_j = sum_l J Z_lj N_l
  Vec a = N - c;
  double div = gu.trace();
  double zdiv = 0.0;  // sum_{k,l} Z_lk d_l u_k
  for (int k = 0; k < d; ++k)
    for (int l = 0; l < d; ++l) zdiv += Z(l, k) * gu(k, l);
  Vec F = Vec::Zero(d);
  for (int i = 0; i < d; ++i) {
    double s1 = 0.0, s2 = 0.0, s4 = 0.0, s5 = 0.0;
    for (int j = 0; j < d; ++j) {
      s1 += gu(i, j) * a[j];
      s2 += gu(j, i) * a[j];
      for (int k = 0; k < d; ++k) {
        s4 += (kd(k, j) - Z(k, j)) * gu(i, k) * c[j];
        s5 += (kd(k, i) - Z(k, i)) * gu(j, k) * c[j];
      }
    }
    F[i] = mu * s1 + mu * s2 + lam * div * a[i] + mu * s4 + mu * s5 + lam * (div - zdiv) * c[i] +
           (p - fp.p_ext) * c[i];
  }
  return F;
}

inline PointData point_data(std::size_t n, int d, const Field& gu, const Field& hu, const Field& Z, const Field& gZ,
                            const Field& J, const Field& rho0, const Field& gp) {
  PointData s;
  s.d = d;
  s.gu = gu.mat(n);
  s.Z = Z.mat(n);
  s.gp = gp.vec(n);
  s.J = J(n, 0);
  s.rho0 = rho0(n, 0);
  for (int c = 0; c < d; ++c) {
    s.hu[c] = Mat(d, d);
    s.gZ[c] = Mat(d, d);
  }
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c) {
        s.hu[a](b, c) = hu(n, (a * d + b) * d + c);
        s.gZ[c](a, b) = gZ(n, (a * d + b) * d + c);
      }
  return s;
}

}  // namespace detail

/// Pressure p(rho0 / J) as a field.
inline Field transformed_pressure(const Field& J, const Field& rho0, const FluidParams& fp) {
  Field rho = density_from_jacobian(rho0, J, fp.rho_lo).rho;
  return pressure(rho, fp);
}

/// F_u from precomputed derivatives: gu = grad u, hu = grad^2 u, gZ = grad Z.
/// The pressure gradient d_j p(rho0 / J) is differentiated on the grid.
inline Field assemble_F_u(const Field& gu, const Field& hu, const Field& Z, const Field& gZ, const Field& J,
                          const Field& rho0, const FluidParams& fp) {
  const GridPtr& g = Z.grid_ptr();
  const int d = g->dim();
  Field gp = differentiate(transformed_pressure(J, rho0, fp), 1);
  Field F(g, 1);
  parallel_for(g->node_count(), [&](std::size_t n) {
    F.set_vec(n, detail::F_u_point(detail::point_data(n, d, gu, hu, Z, gZ, J, rho0, gp), fp));
  });
  return F;
}

/// F_u(u; Z, J) with all derivatives taken on the grid.
inline Field assemble_F_u(const Field& u, const Field& Z, const Field& J, const Field& rho0, const FluidParams& fp) {
  Field gu = differentiate(u, 1);
  Field hu = differentiate(u, 2);
  Field gZ = differentiate(Z, 1);
  return assemble_F_u(gu, hu, Z, gZ, J, rho0, fp);
}

/// F_Gamma at every node using the normal extension (used for norms).
inline Field assemble_F_Gamma_field(const Field& gu, const Field& Z, const Field& J, const Field& rho0,
                                    const Field& N_ext, const FluidParams& fp) {
  const GridPtr& g = Z.grid_ptr();
  Field p = transformed_pressure(J, rho0, fp);
  Field F(g, 1);
  parallel_for(g->node_count(), [&](std::size_t n) {
    F.set_vec(n, detail::F_Gamma_point(gu.mat(n), Z.mat(n), J(n, 0), p(n, 0), N_ext.vec(n), fp));
  });
  return F;
}

/// F_Gamma at the boundary slots.
inline std::vector<Vec> assemble_F_Gamma(const Field& gu, const Field& Z, const Field& J, const Field& rho0,
                                         const Field& N_ext, const FluidParams& fp) {
  const Grid& g = Z.grid();
  std::vector<Vec> out(g.boundary_count());
  for (std::size_t s = 0; s < g.boundary_count(); ++s) {
    std::size_t n = g.boundary_nodes()[s];
    double p = fp.pressure(rho0(n, 0) / J(n, 0));
    out[s] = detail::F_Gamma_point(gu.mat(n), Z.mat(n), J(n, 0), p, N_ext.vec(n), fp);
  }
  return out;
}

inline std::vector<Vec> assemble_F_Gamma(const Field& u, const Field& Z, const Field& J, const Field& rho0,
                                         const FluidParams& fp) {
  return assemble_F_Gamma(differentiate(u, 1), Z, J, rho0, normal_extension(Z.grid_ptr()), fp);
}

}  // namespace lagflow
