/// A-priori flow functionals (Lambda, rho, K_alpha, beta_R, ..., G)
/// and the a-priori horizon, all evaluated on the discrete grid.
#pragma once

#include "lagflow/flow/lagrangian.hpp"

#include <cmath>
#include <vector>

namespace lagflow {

struct DiagnosticsConfig {
  double p = 4.0;
  double q = 8.0;
  double theta = 0.4375;
  double alpha = 0.46875;  // (theta + 1/2) / 2
  double R = 2.0;
  double delta = 0.2;
  double C_monitor = 1.0;
};

struct FlowDiagnostics {
  std::vector<double> t, Lambda, rho, K_alpha, beta_R, B_R, M0, M_theta, A0, A_theta, B_theta, G;
  double alpha = 0.0;
  double C_monitor = 1.0;
  double horizon = 0.0;  // T_{delta,R,theta}
};

namespace detail {

/// Pointwise C^k-type magnitude: sum over the given derivative arrays of the
/// Euclidean norm at each node, then the sup over nodes.
inline double c_norm(const std::vector<const Field*>& parts) {
  const std::size_t nodes = parts.front()->node_count();
  double m = 0.0;
  for (std::size_t n = 0; n < nodes; ++n) {
    double s = 0.0;
    for (const Field* f : parts) {
      double e = 0.0;
      for (int c = 0; c < f->components(); ++c) e += (*f)(n, c) * (*f)(n, c);
      s += std::sqrt(e);
    }
    m = std::max(m, s);
  }
  return m;
}

inline double c_norm_diff(const std::vector<Field>& a, const std::vector<Field>& b) {
  const std::size_t nodes = a.front().node_count();
  double m = 0.0;
  for (std::size_t n = 0; n < nodes; ++n) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      double e = 0.0;
      for (int c = 0; c < a[k].components(); ++c) {
        double d = a[k](n, c) - b[k](n, c);
        e += d * d;
      }
      s += std::sqrt(e);
    }
    m = std::max(m, s);
  }
  return m;
}

/// D psi and its inverse on the label grid at level n, with derivatives up to order 3.
struct LevelJets {
  std::vector<Field> D;     // D psi, D^2 psi, D^3 psi, D^4 psi
  std::vector<Field> Dinv;  // G, grad G, grad^2 G, grad^3 G
};

inline LevelJets level_jets(const NoiseFlowTable& nf, const GridPtr& labels, std::size_t n) {
  const int d = labels->dim();
  Field D(labels, 2), H(labels, 3), G(labels, 2);
  for (std::size_t i = 0; i < labels->node_count(); ++i) {
    PsiJet j = nf.at_label(n, i);
    D.set_mat(i, j.D);
    G.set_mat(i, inverse(j.D));
    for (int c = 0; c < d; ++c)
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) H(i, (c * d + a) * d + b) = j.H.comp[c](a, b);
  }
  LevelJets lj;
  Field H2 = differentiate(H, 2);
  lj.D = {D, H, differentiate(H, 1), H2};
  Field G2 = differentiate(G, 2);
  lj.Dinv = {G, differentiate(G, 1), G2, differentiate(G2, 1)};
  return lj;
}

}  // namespace detail

/// Diagnostics on the frames 0..frames-1 of the noise grid. U_lp[n] is
/// ||U||_{L^p(0,t_n; H^{2,q})} (zeros when there is no additive forcing).
inline FlowDiagnostics flow_diagnostics(const NoiseFlowTable& nf, const GridPtr& labels, std::size_t frames,
                                        const std::vector<double>& U_lp, const DiagnosticsConfig& cfg) {
  FlowDiagnostics out;
  out.alpha = cfg.alpha;
  out.C_monitor = cfg.C_monitor;
  const double C = cfg.C_monitor, p = cfg.p, th = cfg.theta, al = cfg.alpha;
  std::vector<std::vector<Field>> hist_D, hist_G;  // C^2 parts of D psi and D psi^{-1} per level
  double lam_sup = 0.0, rho_sup = 0.0, K = 0.0;
  double horizon = -1.0;
  for (std::size_t n = 0; n < frames; ++n) {
    double t = nf.step() * static_cast<double>(n);
    detail::LevelJets lj = detail::level_jets(nf, labels, n);
    double cD = detail::c_norm({&lj.D[0], &lj.D[1], &lj.D[2], &lj.D[3]});
    double cG = detail::c_norm({&lj.Dinv[0], &lj.Dinv[1], &lj.Dinv[2], &lj.Dinv[3]});
    lam_sup = std::max(lam_sup, cD + cG);
    Field DmI = lj.D[0] - Field::identity_matrix(labels);
    rho_sup = std::max(rho_sup, detail::c_norm({&DmI, &lj.D[1], &lj.D[2]}));
    std::vector<Field> c2D{lj.D[0], lj.D[1], lj.D[2]};
    std::vector<Field> c2G{lj.Dinv[0], lj.Dinv[1], lj.Dinv[2]};
    for (std::size_t r = 0; r < hist_D.size(); ++r) {
      double gap = t - nf.step() * static_cast<double>(r);
      double v = detail::c_norm_diff(c2D, hist_D[r]) + detail::c_norm_diff(c2G, hist_G[r]);
      K = std::max(K, v / std::pow(gap, al));
    }
    hist_D.push_back(std::move(c2D));
    hist_G.push_back(std::move(c2G));

    double Lambda = 1.0 + lam_sup;
    double BR = cfg.R + (n < U_lp.size() ? U_lp[n] : (U_lp.empty() ? 0.0 : U_lp.back()));
    double beta = C * Lambda * std::pow(t, 1.0 - 1.0 / p) * BR;
    double M0 = 7.0 * beta;
    double Mth = C * std::pow(t, 1.0 - th) * Lambda * (1.0 + beta) * BR;
    double poly = 1.0 + M0 + M0 * M0;
    double A0 = C * (rho_sup * poly * (1.0 + M0) + M0);
    double Bnorm = C * rho_sup * poly;
    double Bth = C * (Lambda * (1.0 + M0) * (1.0 + M0) * Mth + K * std::pow(t, al - th) * poly +
                      std::pow(t, 1.0 / p) * rho_sup * poly);
    double Ath = C * (Bth * (1.0 + M0) + Bnorm * Mth + Mth);
    double Gv = A0 + C * (Ath + std::pow(t, 1.0 / p) * A0);

    out.t.push_back(t);
    out.Lambda.push_back(Lambda);
    out.rho.push_back(rho_sup);
    out.K_alpha.push_back(K);
    out.B_R.push_back(BR);
    out.beta_R.push_back(beta);
    out.M0.push_back(M0);
    out.M_theta.push_back(Mth);
    out.A0.push_back(A0);
    out.B_theta.push_back(Bth);
    out.A_theta.push_back(Ath);
    out.G.push_back(Gv);
    if (horizon < 0.0) {
      if (beta >= 0.125 || Gv >= cfg.delta) horizon = t;
    }
  }
  out.horizon = horizon < 0.0 ? out.t.back() : horizon;
  return out;
}

/// Small-time bound check for Y = id + int a_s(Y_s) b(s) ds with a_s = D psi_s^{-1}.
/// For every frame with beta = C L_a t^{1-1/p} ||b||_{L^p(0,t;H^{2,q})} <= 1/8,
/// records ||Y - id||_{L^inf(0,t;H^{2,q})} / (7 beta). Returns the largest ratio
/// (0 if no frame qualifies).
struct BootstrapCheck {
  double max_ratio = 0.0;
  std::size_t frames_checked = 0;
};

inline BootstrapCheck small_time_bound_check(const NoiseFlowTable& nf, const TimeSeries& b, double p, double q,
                                             double C_monitor) {
  const GridPtr& g = b.frames[0].grid_ptr();
  LabelFlow lf = integrate_label_flow(b, nf);
  BootstrapCheck res;
  double La_sup = 0.0, y_sup = 0.0;
  std::vector<double> bnorms;
  Field id = Field::vector(g, [](const Vec& y) { return y; });
  for (std::size_t n = 0; n < b.size(); ++n) {
    double t = b.times[n];
    detail::LevelJets lj = detail::level_jets(nf, g, n);
    La_sup = std::max(La_sup, detail::c_norm({&lj.Dinv[0], &lj.Dinv[1], &lj.Dinv[2], &lj.Dinv[3]}));
    bnorms.push_back(norm(b.frames[n], NormKind::H2q, q));
    y_sup = std::max(y_sup, norm(lf.Y.frames[n] - id, NormKind::H2q, q));
    if (n == 0) continue;
    double Bb = lp_time_norm(bnorms, b.times[1] - b.times[0], p);
    double beta = C_monitor * (1.0 + La_sup) * std::pow(t, 1.0 - 1.0 / p) * Bb;
    if (beta <= 0.125 && beta > 0.0) {
      res.max_ratio = std::max(res.max_ratio, y_sup / (7.0 * beta));
      ++res.frames_checked;
    }
  }
  return res;
}

}  // namespace lagflow
