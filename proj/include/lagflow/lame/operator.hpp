/// Discrete Lame operator A u = -(mu/rho0) Lap u - ((mu+lambda)/rho0) grad div u
/// and traction operator B u = S(grad u) N, applied or assembled sparse.
#pragma once

#include "lagflow/fields/differentiate.hpp"
#include "lagflow/lame/params.hpp"

#include <Eigen/Sparse>

#include <fstream>
#include <string>
#include <vector>

namespace lagflow {

using SparseMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Viscous stress S(G) = mu (G + G^T) + lambda tr(G) I for a velocity gradient G.
inline Mat stress(const Mat& G, const FluidParams& fp) {
  return fp.mu * (G + G.transpose()) + fp.lambda * G.trace() * identity(static_cast<int>(G.rows()));
}

class LameOperator {
 public:
  LameOperator(GridPtr grid, Field rho0, FluidParams params)
      : grid_(std::move(grid)), rho0_(std::move(rho0)), fp_(params) {
    fp_.validate();
    if (rho0_.rank() != 0) throw ConfigError("lame: rho0 must be a scalar field");
    for (std::size_t n = 0; n < rho0_.node_count(); ++n)
      if (!(rho0_(n, 0) >= fp_.rho_lo * (1.0 - 1e-12)))
        throw ConfigError("lame: rho0 below the lower density bound at node " + std::to_string(n));
    assemble();
  }

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const Field& rho0() const { return rho0_; }
  const FluidParams& params() const { return fp_; }
  int dim() const { return grid_->dim(); }
  std::size_t unknowns() const { return grid_->node_count() * dim(); }

  /// Interior-stencil matrix of A (rows at every node; boundary rows unused by solves).
  const SparseMat& A() const { return A_; }
  /// Traction rows: row s*dim + i is component i of B u at boundary slot s.
  const SparseMat& B() const { return B_; }

  /// A u at every node (boundary values are the one-sided stencil values).
  Field apply_A(const Field& u) const {
    if (u.rank() != 1) throw Error("apply_A: vector field required");
    u.check_finite("apply_A");
    return from_vector(A_ * to_vector(u));
  }

  /// B u at boundary nodes; one row per boundary slot.
  std::vector<Vec> apply_B(const Field& u) const {
    if (u.rank() != 1) throw Error("apply_B: vector field required");
    u.check_finite("apply_B");
    Eigen::VectorXd b = B_ * to_vector(u);
    std::vector<Vec> out(grid_->boundary_count(), Vec::Zero(dim()));
    for (std::size_t s = 0; s < out.size(); ++s)
      for (int i = 0; i < dim(); ++i) out[s][i] = b[s * dim() + i];
    return out;
  }

  Eigen::VectorXd to_vector(const Field& u) const {
    return Eigen::Map<const Eigen::VectorXd>(u.data().data(), static_cast<Eigen::Index>(u.data().size()));
  }
  Field from_vector(const Eigen::VectorXd& x) const {
    Field u(grid_, 1);
    for (Eigen::Index k = 0; k < x.size(); ++k) u.data()[k] = x[k];
    return u;
  }

  /// Coordinate-format dump: one "row col value" line per nonzero.
  static void dump(const SparseMat& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("matrix dump: cannot open " + path);
    os.precision(17);
    for (int k = 0; k < m.outerSize(); ++k)
      for (SparseMat::InnerIterator it(m, k); it; ++it) os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
  }

 private:
  void assemble() {
    const Grid& g = *grid_;
    const int d = g.dim();
    const double mu = fp_.mu, ml = fp_.mu + fp_.lambda;
    std::vector<Triplet> ta, tb;
    for (std::size_t n = 0; n < g.node_count(); ++n) {
      double inv = 1.0 / rho0_(n, 0);
      // -(mu/rho) sum_a d_aa u_i - ((mu+lambda)/rho) sum_j d_i d_j u_j
      for (int i = 0; i < d; ++i) {
        std::size_t row = n * d + i;
        for (int a = 0; a < d; ++a)
          for (const auto& e : second_derivative_stencil(g, n, a)) ta.emplace_back(row, e.node * d + i, -mu * inv * e.weight);
        for (int j = 0; j < d; ++j)
          for (const auto& e : mixed_derivative_stencil(g, n, i, j)) ta.emplace_back(row, e.node * d + j, -ml * inv * e.weight);
      }
    }
    for (std::size_t s = 0; s < g.boundary_count(); ++s) {
      std::size_t n = g.boundary_nodes()[s];
      const Vec& N = g.normal(s);
      // (B u)_i = sum_j [mu (d_j u_i + d_i u_j) + lambda delta_ij div u] N_j
      for (int i = 0; i < d; ++i) {
        std::size_t row = s * d + i;
        for (int j = 0; j < d; ++j) {
          if (N[j] == 0.0) continue;
          for (const auto& e : first_derivative_stencil(g, n, j)) tb.emplace_back(row, e.node * d + i, mu * N[j] * e.weight);
          for (const auto& e : first_derivative_stencil(g, n, i)) tb.emplace_back(row, e.node * d + j, mu * N[j] * e.weight);
        }
        if (N[i] != 0.0)
          for (int k = 0; k < d; ++k)
            for (const auto& e : first_derivative_stencil(g, n, k))
              tb.emplace_back(row, e.node * d + k, fp_.lambda * N[i] * e.weight);
      }
    }
    const auto U = static_cast<Eigen::Index>(unknowns());
    A_.resize(U, U);
    A_.setFromTriplets(ta.begin(), ta.end());
    B_.resize(static_cast<Eigen::Index>(g.boundary_count() * d), U);
    B_.setFromTriplets(tb.begin(), tb.end());
    A_.makeCompressed();
    B_.makeCompressed();
  }

  GridPtr grid_;
  Field rho0_;
  FluidParams fp_;
  SparseMat A_, B_;
};

}  // namespace lagflow
