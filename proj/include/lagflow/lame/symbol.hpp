/// Principal-symbol eigenvalues of the Lame operator and the
/// half-line boundary-map determinant for the traction condition.
#pragma once

#include "lagflow/lame/params.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <complex>
#include <optional>
#include <vector>

namespace lagflow {

using cd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

struct SymbolEigen {
  std::vector<double> closed_form;  // ascending
  std::vector<double> numerical;    // ascending
  double max_gap = 0.0;
};

/// A#(xi) = (1/rho0)(mu |xi|^2 I + (mu + lambda) xi xi^T).
inline Eigen::MatrixXd principal_symbol(const FluidParams& fp, double rho0, const Eigen::VectorXd& xi) {
  const auto d = xi.size();
  return (fp.mu * xi.squaredNorm() * Eigen::MatrixXd::Identity(d, d) + (fp.mu + fp.lambda) * xi * xi.transpose()) / rho0;
}

inline SymbolEigen symbol_eigenvalues(const FluidParams& fp, double rho0, const Eigen::VectorXd& xi) {
  const double x2 = xi.squaredNorm();
  if (!(x2 > 0.0)) throw ConfigError("symbol: xi must be nonzero");
  if (!(rho0 > 0.0)) throw ConfigError("symbol: rho0 must be positive");
  const auto d = static_cast<int>(xi.size());
  SymbolEigen r;
  for (int k = 0; k < d - 1; ++k) r.closed_form.push_back(fp.mu * x2 / rho0);
  r.closed_form.push_back((2.0 * fp.mu + fp.lambda) * x2 / rho0);
  std::sort(r.closed_form.begin(), r.closed_form.end());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(principal_symbol(fp, rho0, xi), Eigen::EigenvaluesOnly);
  for (int k = 0; k < d; ++k) r.numerical.push_back(es.eigenvalues()[k]);
  std::sort(r.numerical.begin(), r.numerical.end());
  for (int k = 0; k < d; ++k) r.max_gap = std::max(r.max_gap, std::abs(r.closed_form[k] - r.numerical[k]));
  return r;
}

/// Half-line problem in s = distance from the boundary, boundary normal e_d,
/// tangential frequency xi (xi_d = 0):
///   M2 v'' + M1 v' + M0 v = 0,  decaying as s -> infinity,
/// with the traction map v -> B1 v'(0) + B0 v(0).
struct HalfLineProblem {
  CMat M2, M1, M0, B1, B0;
  int dim = 2;
};

inline HalfLineProblem half_line_problem(const FluidParams& fp, double rho0, const Eigen::VectorXd& xi_t, cd eta) {
  const int d = static_cast<int>(xi_t.size());
  const double mu = fp.mu, lam = fp.lambda, ml = mu + lam;
  const cd I(0.0, 1.0);
  CVec xi = xi_t.cast<cd>();
  CVec e = CVec::Zero(d);
  e[d - 1] = 1.0;
  const CMat Id = CMat::Identity(d, d);
  HalfLineProblem h;
  h.dim = d;
  h.M2 = -(mu * Id + ml * e * e.transpose()) / rho0;
  h.M1 = -(I * ml / rho0) * (xi * e.transpose() + e * xi.transpose());
  h.M0 = eta * Id + (mu * xi_t.squaredNorm() * Id + ml * xi * xi.transpose()) / rho0;
  h.B1 = mu * Id + ml * e * e.transpose();
  h.B0 = CMat::Zero(d, d);
  for (int i = 0; i < d - 1; ++i) {
    h.B0(i, d - 1) = I * mu * xi_t[i];
    h.B0(d - 1, i) = I * lam * xi_t[i];
  }
  return h;
}

/// First-order companion matrix of the half-line ODE for z = (v, v').
inline CMat companion(const HalfLineProblem& h) {
  const int d = h.dim;
  CMat C = CMat::Zero(2 * d, 2 * d);
  CMat M2inv = h.M2.inverse();
  C.block(0, d, d, d) = CMat::Identity(d, d);
  C.block(d, 0, d, d) = -M2inv * h.M0;
  C.block(d, d, d, d) = -M2inv * h.M1;
  return C;
}

namespace detail {

/// Swaps diagonal entries k, k+1 of an upper-triangular T by a unitary
/// rotation, updating the Schur vectors U.
inline void swap_schur(CMat& T, CMat& U, int k) {
  const cd a = T(k, k), c = T(k + 1, k + 1), b = T(k, k + 1);
  // (b, c - a) is an eigenvector of the 2x2 block for eigenvalue c.
  cd x0 = b, x1 = c - a;
  double nrm = std::sqrt(std::norm(x0) + std::norm(x1));
  if (nrm == 0.0) return;
  cd cs = x0 / nrm, sn = x1 / nrm;
  CMat Q(2, 2);
  Q << cs, -std::conj(sn), sn, std::conj(cs);
  const auto n = T.rows();
  T.block(k, 0, 2, n) = Q.adjoint() * T.block(k, 0, 2, n);
  T.block(0, k, n, 2) = T.block(0, k, n, 2) * Q;
  U.block(0, k, n, 2) = U.block(0, k, n, 2) * Q;
  T(k + 1, k) = 0.0;
}

}  // namespace detail

enum class LsRoute { Eigenvectors, Schur };

struct LsResult {
  double det_abs = 0.0;          // |det Phi|
  double det_normalized = 0.0;   // |det Phi| / prod of column norms
  int stable_dim = 0;
  std::vector<cd> rates;         // stable exponents kappa (Re < 0), sorted by real part
  CMat Phi;                      // boundary map v(0) -> traction
  LsRoute route = LsRoute::Eigenvectors;
};

/// Stable subspace basis (2d x d) of the companion matrix.
inline CMat stable_basis(const CMat& C, LsRoute route, std::vector<cd>& rates) {
  rates.clear();
  if (route == LsRoute::Eigenvectors) {
    Eigen::ComplexEigenSolver<CMat> es(C, true);
    if (es.info() != Eigen::Success) throw NumericalError("ls-check: eigen-decomposition failed");
    std::vector<int> idx;
    for (int k = 0; k < C.rows(); ++k)
      if (es.eigenvalues()[k].real() < 0.0) idx.push_back(k);
    CMat W(C.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) {
      W.col(static_cast<Eigen::Index>(c)) = es.eigenvectors().col(idx[c]);
      rates.push_back(es.eigenvalues()[idx[c]]);
    }
    return W;
  }
  Eigen::ComplexSchur<CMat> cs(C, true);
  if (cs.info() != Eigen::Success) throw NumericalError("ls-check: Schur decomposition failed");
  CMat T = cs.matrixT(), U = cs.matrixU();
  const int n = static_cast<int>(T.rows());
  // bubble stable eigenvalues to the leading block
  for (int pass = 0; pass < n; ++pass) {
    bool moved = false;
    for (int k = 0; k + 1 < n; ++k) {
      if (T(k, k).real() >= 0.0 && T(k + 1, k + 1).real() < 0.0) {
        detail::swap_schur(T, U, k);
        moved = true;
      }
    }
    if (!moved) break;
  }
  int m = 0;
  while (m < n && T(m, m).real() < 0.0) rates.push_back(T(m, m)), ++m;
  return U.leftCols(m);
}

/// Boundary-map determinant on the stable subspace. The eigenvector route is
/// used unless the stable exponents are (nearly) repeated or the resulting
/// basis is ill-conditioned; then the ordered Schur route is used.
inline LsResult lopatinskii_check(const FluidParams& fp, double rho0, const Eigen::VectorXd& xi_t, cd eta,
                                  std::optional<LsRoute> force = std::nullopt) {
  const int d = static_cast<int>(xi_t.size());
  if (std::abs(xi_t[d - 1]) > 0.0) throw ConfigError("ls-check: xi must be tangential (xi_d = 0)");
  if (!(eta.real() > 0.0)) throw ConfigError("ls-check: Re eta must be positive");
  HalfLineProblem h = half_line_problem(fp, rho0, xi_t, eta);
  CMat C = companion(h);
  LsResult r;
  auto evaluate = [&](LsRoute route) {
    r.route = route;
    CMat W = stable_basis(C, route, r.rates);
    r.stable_dim = static_cast<int>(W.cols());
    if (r.stable_dim != d) return false;
    CMat V = W.topRows(d), Vp = W.bottomRows(d);
    Eigen::JacobiSVD<CMat> svd(V);
    double cond = svd.singularValues()[0] / std::max(svd.singularValues()[d - 1], 1e-300);
    if (route == LsRoute::Eigenvectors && cond > 1e8) return false;
    r.Phi = (h.B0 * V + h.B1 * Vp) * V.inverse();
    return true;
  };
  bool done = false;
  if (!force || *force == LsRoute::Eigenvectors) {
    done = evaluate(LsRoute::Eigenvectors);
    if (done && !force) {
      // repeated exponents make the eigenvector basis unreliable
      double scale = 0.0;
      for (auto k : r.rates) scale = std::max(scale, std::abs(k));
      for (std::size_t i = 0; i < r.rates.size() && done; ++i)
        for (std::size_t j = i + 1; j < r.rates.size(); ++j)
          if (std::abs(r.rates[i] - r.rates[j]) <= 1e-6 * scale) {
            done = false;
            break;
          }
    }
  }
  if (!done && (!force || *force == LsRoute::Schur)) done = evaluate(LsRoute::Schur);
  if (!done) throw NumericalError("ls-check: stable subspace dimension differs from dim");
  std::sort(r.rates.begin(), r.rates.end(), [](cd a, cd b) { return a.real() < b.real(); });
  cd det = r.Phi.determinant();
  r.det_abs = std::abs(det);
  double prod = 1.0;
  for (int c = 0; c < d; ++c) prod *= r.Phi.col(c).norm();
  r.det_normalized = prod > 0.0 ? r.det_abs / prod : 0.0;
  return r;
}

}  // namespace lagflow
