/// Implicit-Euler Lame solves with traction rows, and the stochastic
/// convolution driven by finite-rank forcing.
#pragma once

#include "lagflow/lame/operator.hpp"
#include "lagflow/noise/forcing.hpp"

#include <Eigen/SparseLU>

#include <memory>
#include <sstream>

namespace lagflow {

/// Boundary data: one vector per boundary slot.
using BoundaryValues = std::vector<Vec>;

/// System matrix for one step size: interior rows I + dt A, boundary rows B.
/// Factorized once and reused for every step.
class LameStepper {
 public:
  LameStepper(std::shared_ptr<const LameOperator> op, double dt) : op_(std::move(op)), dt_(dt) {
    if (!(dt > 0.0)) throw ConfigError("lame: step must be positive");
    const Grid& g = op_->grid();
    const int d = g.dim();
    const auto U = static_cast<Eigen::Index>(op_->unknowns());
    std::vector<Triplet> t;
    const SparseMat& A = op_->A();
    const SparseMat& B = op_->B();
    SparseMat At = A.transpose();  // row access through the columns of the transpose
    SparseMat Bt = B.transpose();
    for (std::size_t n = 0; n < g.node_count(); ++n) {
      int slot = g.boundary_slot(n);
      for (int i = 0; i < d; ++i) {
        auto row = static_cast<Eigen::Index>(n * d + i);
        if (slot < 0) {
          t.emplace_back(row, row, 1.0);
          for (SparseMat::InnerIterator it(At, row); it; ++it) t.emplace_back(row, it.row(), dt * it.value());
        } else {
          auto brow = static_cast<Eigen::Index>(slot * d + i);
          for (SparseMat::InnerIterator it(Bt, brow); it; ++it) t.emplace_back(row, it.row(), it.value());
        }
      }
    }
    S_.resize(U, U);
    S_.setFromTriplets(t.begin(), t.end());
    S_.makeCompressed();
    lu_.analyzePattern(S_);
    lu_.factorize(S_);
    if (lu_.info() != Eigen::Success) throw NumericalError("lame: factorization failed");
  }

  double step() const { return dt_; }
  const LameOperator& op() const { return *op_; }
  const SparseMat& system() const { return S_; }

  /// v^{n+1} from interior rows v^{n+1} + dt A v^{n+1} = v^n + src and boundary rows B v^{n+1} = g.
  Field advance(const Field& v, const Field& src, const BoundaryValues& g) const {
    Eigen::VectorXd rhs = rhs_vector(v, src, g);
    Eigen::VectorXd x = lu_.solve(rhs);
    if (lu_.info() != Eigen::Success) throw NumericalError("lame: linear solve failed");
    double res = (S_ * x - rhs).norm();
    double scale = std::max(rhs.norm(), 1e-300);
    if (!(res <= 1e-10 * scale + 1e-14)) {
      std::ostringstream os;
      os << "lame: linear residual " << res / scale << " exceeds 1e-10 relative";
      throw NumericalError(os.str());
    }
    return op_->from_vector(x);
  }

  Eigen::VectorXd rhs_vector(const Field& v, const Field& src, const BoundaryValues& g) const {
    const Grid& gr = op_->grid();
    const int d = gr.dim();
    if (g.size() != gr.boundary_count()) throw Error("lame: boundary data size mismatch");
    v.check_finite("lame state");
    src.check_finite("lame source");
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(op_->unknowns()));
    for (std::size_t n = 0; n < gr.node_count(); ++n) {
      int slot = gr.boundary_slot(n);
      for (int i = 0; i < d; ++i) {
        auto row = static_cast<Eigen::Index>(n * d + i);
        if (slot < 0) {
          rhs[row] = v(n, i) + src(n, i);
        } else {
          if (!std::isfinite(g[slot][i])) throw NumericalError("lame: non-finite boundary data at node " + std::to_string(n));
          rhs[row] = g[slot][i];
        }
      }
    }
    return rhs;
  }

 private:
  std::shared_ptr<const LameOperator> op_;
  double dt_;
  SparseMat S_;
  Eigen::SparseLU<SparseMat> lu_;
};

struct LameSolution {
  TimeSeries v;
  double compatibility_residual = 0.0;  // max_s |B u0 - g(0)|
};

inline double max_boundary_gap(const BoundaryValues& a, const BoundaryValues& b) {
  double m = 0.0;
  for (std::size_t s = 0; s < a.size(); ++s) m = std::max(m, (a[s] - b[s]).norm());
  return m;
}

/// Implicit Euler over `steps` steps. f(n) and g(n) give data at t_n; the step
/// n -> n+1 uses f(n+1) and g(n+1).
template <class SourceFn, class TractionFn>
LameSolution solve_lame(const LameStepper& st, SourceFn&& f, TractionFn&& g, const Field& u0, std::size_t steps) {
  LameSolution sol;
  const double dt = st.step();
  sol.compatibility_residual = max_boundary_gap(st.op().apply_B(u0), g(std::size_t{0}));
  Field v = u0;
  sol.v.push(0.0, v);
  for (std::size_t n = 0; n < steps; ++n) {
    Field src = f(n + 1);
    src *= dt;
    v = st.advance(v, src, g(n + 1));
    sol.v.push(dt * static_cast<double>(n + 1), v);
  }
  return sol;
}

/// Series form: f and g are indexed by frame.
inline LameSolution solve_lame(const LameStepper& st, const TimeSeries& f, const std::vector<BoundaryValues>& g,
                               const Field& u0) {
  if (f.size() != g.size() || f.empty()) throw Error("lame: source and traction series differ in length");
  return solve_lame(st, [&](std::size_t n) { return f.frames[n]; }, [&](std::size_t n) { return g[n]; }, u0,
                    f.size() - 1);
}

/// (I + dt A) U^{n+1} = U^n + sum_m amp_m f_m dbeta_m^{n+1}, B U^{n+1} = 0, U(0) = 0.
/// With `increments` given, they replace the bundle's mode increments:
/// increments[m][n] is used for mode m at step n.
inline TimeSeries solve_stoch_convolution(const LameStepper& st, const StochasticForcing& fs, const BrownianBundle& W,
                                          std::size_t steps, const std::vector<std::vector<double>>* increments = nullptr) {
  fs.validate();
  const GridPtr& g = st.op().grid_ptr();
  TimeSeries U;
  Field u(g, 1);
  U.push(0.0, u);
  if (fs.count() == 0) {
    for (std::size_t n = 0; n < steps; ++n) U.push(st.step() * static_cast<double>(n + 1), u);
    return U;
  }
  if (!increments && W.mode_count() != fs.count()) throw ConfigError("stochastic convolution: mode count mismatch");
  BoundaryValues zero(g->boundary_count(), Vec::Zero(g->dim()));
  for (std::size_t n = 0; n < steps; ++n) {
    Field src(g, 1);
    for (int m = 0; m < fs.count(); ++m) {
      double db = increments ? (*increments)[m][n] : W.mode_increment(m, n);
      src.axpy(fs.amplitudes[m] * db, fs.modes[m]);
    }
    u = st.advance(u, src, zero);
    U.push(st.step() * static_cast<double>(n + 1), u);
  }
  return U;
}

}  // namespace lagflow
