/// Noise-only flow psi with its first and second spatial derivatives,
/// integrated by the Stratonovich Heun scheme at a fixed set of start points.
#pragma once

#include "lagflow/core/parallel.hpp"
#include "lagflow/fields/interpolate.hpp"
#include "lagflow/noise/brownian.hpp"
#include "lagflow/noise/transport.hpp"

#include <span>
#include <sstream>
#include <vector>

namespace lagflow {

/// psi, D psi and D^2 psi at one point.
struct PsiJet {
  Vec x;
  Mat D;
  Hess H;

  static PsiJet start(const Vec& x0) {
    int d = static_cast<int>(x0.size());
    return {x0, identity(d), Hess::zero(d)};
  }
};

inline Mat inverse(const Mat& A) {
  const int d = static_cast<int>(A.rows());
  Mat inv(d, d);
  if (d == 2) {
    double det = A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0);
    inv << A(1, 1), -A(0, 1), -A(1, 0), A(0, 0);
    inv /= det;
  } else {
    Eigen::Matrix3d a = A;
    inv = a.inverse();
  }
  return inv;
}

namespace detail {

/// Right-hand side of the joint system for (psi, D psi, D^2 psi) with the
/// increments dW folded in.
inline PsiJet noise_rhs(const TransportField& Q, const PsiJet& s, std::span<const double> dW, bool second) {
  const int d = static_cast<int>(s.x.size());
  PsiJet r{Vec::Zero(d), Mat::Zero(d, d), Hess::zero(d)};
  for (int k = 0; k < Q.count(); ++k) {
    if (dW[k] == 0.0) continue;
    TransportJet j = Q.jet(k, s.x);
    r.x += dW[k] * j.q;
    r.D += dW[k] * (j.dq * s.D);
    if (second) {
      for (int i = 0; i < d; ++i) {
        Mat t = s.D.transpose() * j.d2q.comp[i] * s.D;
        for (int a = 0; a < d; ++a) t += j.dq(i, a) * s.H.comp[a];
        r.H.comp[i] += dW[k] * t;
      }
    }
  }
  return r;
}

inline void axpy(PsiJet& y, double a, const PsiJet& x, int d, bool second) {
  y.x += a * x.x;
  y.D += a * x.D;
  if (second)
    for (int i = 0; i < d; ++i) y.H.comp[i] += a * x.H.comp[i];
}

}  // namespace detail

/// One Heun step of d psi = sum_k Q_k(psi) o dW^k and its variational equations.
inline PsiJet heun_noise_step(const TransportField& Q, const PsiJet& s, std::span<const double> dW, bool second) {
  const int d = static_cast<int>(s.x.size());
  PsiJet f0 = detail::noise_rhs(Q, s, dW, second);
  PsiJet pred = s;
  detail::axpy(pred, 1.0, f0, d, second);
  PsiJet f1 = detail::noise_rhs(Q, pred, dW, second);
  PsiJet out = s;
  detail::axpy(out, 0.5, f0, d, second);
  detail::axpy(out, 0.5, f1, d, second);
  return out;
}

/// psi, D psi and (optionally) D^2 psi at every start point and every level
/// of the Brownian grid, stored flat: per point d + d^2 [+ d^3] doubles.
class NoiseFlow {
 public:
  NoiseFlow() = default;
  NoiseFlow(int dim, std::size_t points, bool second, double dt)
      : dim_(dim), points_(points), second_(second), dt_(dt) {
    stride_ = dim + dim * dim + (second ? dim * dim * dim : 0);
  }

  int dim() const { return dim_; }
  std::size_t point_count() const { return points_; }
  std::size_t level_count() const { return levels_.size(); }
  bool has_second() const { return second_; }
  double step() const { return dt_; }
  double time(std::size_t n) const { return dt_ * static_cast<double>(n); }
  bool identity_flow() const { return identity_; }

  void push_level(std::vector<double> level) { levels_.push_back(std::move(level)); }

  Vec psi(std::size_t n, std::size_t i) const {
    const double* p = raw(n, i);
    Vec v(dim_);
    for (int a = 0; a < dim_; ++a) v[a] = p[a];
    return v;
  }
  Mat D(std::size_t n, std::size_t i) const {
    const double* p = raw(n, i) + dim_;
    Mat m(dim_, dim_);
    for (int a = 0; a < dim_; ++a)
      for (int b = 0; b < dim_; ++b) m(a, b) = p[a * dim_ + b];
    return m;
  }
  Mat Dinv(std::size_t n, std::size_t i) const { return inverse(D(n, i)); }
  Hess H(std::size_t n, std::size_t i) const {
    Hess h = Hess::zero(dim_);
    if (!second_) return h;
    const double* p = raw(n, i) + dim_ + dim_ * dim_;
    for (int c = 0; c < dim_; ++c)
      for (int a = 0; a < dim_; ++a)
        for (int b = 0; b < dim_; ++b) h.comp[c](a, b) = p[(c * dim_ + a) * dim_ + b];
    return h;
  }

  const double* raw(std::size_t n, std::size_t i) const { return levels_[n].data() + i * stride_; }
  int stride() const { return stride_; }

  static void pack(const PsiJet& s, double* out, int dim, bool second) {
    for (int a = 0; a < dim; ++a) out[a] = s.x[a];
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b) out[dim + a * dim + b] = s.D(a, b);
    if (second)
      for (int c = 0; c < dim; ++c)
        for (int a = 0; a < dim; ++a)
          for (int b = 0; b < dim; ++b) out[dim + dim * dim + (c * dim + a) * dim + b] = s.H.comp[c](a, b);
  }

  void mark_identity() { identity_ = true; }

 private:
  int dim_ = 2;
  std::size_t points_ = 0;
  bool second_ = false;
  double dt_ = 0.0;
  int stride_ = 0;
  bool identity_ = false;
  std::vector<std::vector<double>> levels_;
};

/// Integrates psi from each start point over the whole bundle.
/// Throws NumericalError when a trajectory leaves the evaluator box or
/// |det D psi - 1| exceeds 0.5.
inline NoiseFlow integrate_noise_flow(const TransportField& Q, const BrownianBundle& W, std::span<const Vec> points,
                                      bool second = false, std::size_t max_steps = static_cast<std::size_t>(-1)) {
  const int d = Q.dim();
  const std::size_t steps = std::min(W.steps(), max_steps);
  NoiseFlow nf(d, points.size(), second, W.step());
  const int stride = nf.stride();
  std::vector<PsiJet> state(points.size());
  std::vector<double> level(points.size() * stride);
  for (std::size_t i = 0; i < points.size(); ++i) {
    state[i] = PsiJet::start(points[i]);
    NoiseFlow::pack(state[i], level.data() + i * stride, d, second);
  }
  nf.push_level(level);
  if (Q.count() == 0 || W.transport_count() == 0) {
    nf.mark_identity();
    for (std::size_t n = 0; n < steps; ++n) nf.push_level(level);
    return nf;
  }
  if (W.transport_count() != Q.count()) throw ConfigError("noise flow: path count differs from field count");
  std::vector<double> dW(Q.count());
  for (std::size_t n = 0; n < steps; ++n) {
    for (int k = 0; k < Q.count(); ++k) dW[k] = W.transport_increment(k, n);
    parallel_for(points.size(), [&](std::size_t i) {
      PsiJet next = heun_noise_step(Q, state[i], dW, second);
      if (!Q.inside(next.x)) {
        std::ostringstream os;
        os << "noise flow left the evaluator box at t=" << (n + 1) * W.step() << " from start point " << i;
        throw NumericalError(os.str());
      }
      if (std::abs(next.D.determinant() - 1.0) > 0.5) {
        std::ostringstream os;
        os << "noise flow: |det D psi - 1| > 0.5 at t=" << (n + 1) * W.step() << " point " << i;
        throw NumericalError(os.str());
      }
      state[i] = next;
      NoiseFlow::pack(state[i], level.data() + i * stride, d, second);
    });
    nf.push_level(level);
  }
  return nf;
}

/// A NoiseFlow tabulated on a background grid that contains the label grid,
/// evaluated off-node by tensor cubic interpolation.
class NoiseFlowTable {
 public:
  NoiseFlowTable() = default;

  /// Background grid: label box widened by `margin` (rounded up to whole label
  /// cells), spacing h / refine.
  static GridPtr background(const Grid& labels, double margin, int refine) {
    if (refine < 1) throw ConfigError("noise table: refine must be >= 1");
    std::array<int, 3> ext{1, 1, 1};
    std::array<double, 3> lo{0, 0, 0}, hi{0, 0, 0};
    for (int a = 0; a < labels.dim(); ++a) {
      double h = labels.spacing(a);
      int cells = static_cast<int>(std::ceil(margin / h - 1e-9));
      cells = std::max(cells, 2);
      lo[a] = labels.lower(a) - cells * h;
      hi[a] = labels.upper(a) + cells * h;
      ext[a] = refine * (labels.extent(a) - 1 + 2 * cells) + 1;
    }
    return std::make_shared<const Grid>(labels.dim(), ext, lo, hi);
  }

  NoiseFlowTable(const TransportField& Q, const BrownianBundle& W, GridPtr label_grid, double margin, int refine)
      : labels_(std::move(label_grid)) {
    const Grid& labels = *labels_;
    dim_ = labels.dim();
    steps_ = W.steps();
    dt_ = W.step();
    identity_ = Q.count() == 0 || W.transport_count() == 0;
    if (identity_) return;
    grid_ = background(labels, margin, refine);
    std::vector<Vec> pts(grid_->node_count());
    for (std::size_t n = 0; n < pts.size(); ++n) pts[n] = grid_->coord(n);
    flow_ = integrate_noise_flow(Q, W, pts, true);
    // label node -> background node
    label_to_bg_.resize(labels.node_count());
    for (std::size_t n = 0; n < labels.node_count(); ++n) {
      auto idx = labels.index(n);
      std::array<int, 3> b{0, 0, 0};
      for (int a = 0; a < dim_; ++a) {
        int cells = static_cast<int>(std::llround((labels.lower(a) - grid_->lower(a)) / labels.spacing(a)));
        b[a] = refine * (idx[a] + cells);
      }
      label_to_bg_[n] = grid_->node(b);
    }
  }

  bool identity_flow() const { return identity_; }
  std::size_t steps() const { return steps_; }
  double step() const { return dt_; }
  int dim() const { return dim_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const NoiseFlow& flow() const { return flow_; }

  /// psi, D psi, D^2 psi at level n and point x.
  PsiJet eval(std::size_t n, const Vec& x) const {
    if (identity_) return PsiJet::start(x);
    if (!grid_->contains(x, 1e-12)) {
      std::ostringstream os;
      os << "label flow left the noise-flow margin at t=" << n * dt_;
      throw NumericalError(os.str());
    }
    InterpWeights st = interp_weights(*grid_, x, 4);
    const int stride = flow_.stride();
    double acc[3 + 9 + 27] = {};
    for (int e = 0; e < st.size; ++e) {
      const double* p = flow_.raw(n, st.node[e]);
      double w = st.weight[e];
      for (int c = 0; c < stride; ++c) acc[c] += w * p[c];
    }
    return unpack(acc);
  }

  /// Exact tabulated values at a label node.
  PsiJet at_label(std::size_t n, std::size_t label_node) const {
    if (identity_) return PsiJet::start(labels_->coord(label_node));
    return unpack(flow_.raw(n, label_to_bg_[label_node]));
  }

 private:
  PsiJet unpack(const double* p) const {
    const int d = dim_;
    PsiJet s{Vec(d), Mat(d, d), Hess::zero(d)};
    for (int a = 0; a < d; ++a) s.x[a] = p[a];
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) s.D(a, b) = p[d + a * d + b];
    for (int c = 0; c < d; ++c)
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) s.H.comp[c](a, b) = p[d + d * d + (c * d + a) * d + b];
    return s;
  }

  GridPtr labels_;
  int dim_ = 2;
  std::size_t steps_ = 0;
  double dt_ = 0.0;
  bool identity_ = true;
  GridPtr grid_;
  NoiseFlow flow_;
  std::vector<std::size_t> label_to_bg_;
};

}  // namespace lagflow
