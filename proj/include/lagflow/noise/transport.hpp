/// Transport vector fields Q_k with closed-form first and second
/// derivatives, and the Stratonovich-to-Ito drift correction.
#pragma once

#include "lagflow/fields/differentiate.hpp"
#include "lagflow/fields/interpolate.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

namespace lagflow {

/// Q(x), DQ(x) with DQ(i, a) = d_a Q_i, and D2Q.comp[i](a, b) = d_a d_b Q_i.
struct TransportJet {
  Vec q;
  Mat dq;
  Hess d2q;
};

namespace transport {

struct Constant {
  Vec b;
};

/// Q(x) = rate * (x - c) x axis; in 2D the axis is e_3, so Q = rate (x2 - c2, -(x1 - c1)).
struct Rotation {
  Vec center;
  double rate = 1.0;
  Vec axis;  // 3D only
};

/// Q = (d2 phi, -d1 phi[, 0]) with phi = amp sin(k1 pi x1) sin(k2 pi x2).
struct StreamFunction {
  double amp = 1.0;
  double k1 = 1.0, k2 = 1.0;
};

/// Q(x) = x. Not divergence free; used to exercise the drift correction.
struct Linear {};

/// Nodal values of Q on a grid, evaluated by cubic interpolation.
struct Table {
  Field values;
  Field grad;
  Field hess;
};

}  // namespace transport

using TransportKind =
    std::variant<transport::Constant, transport::Rotation, transport::StreamFunction, transport::Linear, transport::Table>;

inline std::string kind_name(const TransportKind& k) {
  switch (k.index()) {
    case 0: return "constant";
    case 1: return "rotation";
    case 2: return "stream-function";
    case 3: return "linear";
    default: return "table";
  }
}

inline transport::Table make_table(const Field& q) {
  if (q.rank() != 1) throw ConfigError("transport table: vector field required");
  return {q, differentiate(q, 1), differentiate(q, 2)};
}

/// The K transport fields and the box on which they may be evaluated.
class TransportField {
 public:
  TransportField() = default;
  TransportField(int dim, std::vector<TransportKind> modes, Vec lower, Vec upper)
      : dim_(dim), modes_(std::move(modes)), lower_(std::move(lower)), upper_(std::move(upper)) {
    for (const auto& m : modes_) {
      if (const auto* t = std::get_if<transport::Table>(&m)) {
        for (int a = 0; a < dim_; ++a) {
          lower_[a] = std::max(lower_[a], t->values.grid().lower(a));
          upper_[a] = std::min(upper_[a], t->values.grid().upper(a));
        }
      }
    }
  }

  /// No transport noise; evaluations are never needed.
  static TransportField none(int dim) {
    return TransportField(dim, {}, Vec::Constant(dim, -1e300), Vec::Constant(dim, 1e300));
  }

  int dim() const { return dim_; }
  int count() const { return static_cast<int>(modes_.size()); }
  const std::vector<TransportKind>& modes() const { return modes_; }
  const TransportKind& mode(int k) const { return modes_[k]; }

  /// Rotation and linear fields grow without bound and so are not C_b; the
  /// run metadata reports this.
  bool globally_bounded() const {
    for (const auto& m : modes_)
      if (std::holds_alternative<transport::Rotation>(m) || std::holds_alternative<transport::Linear>(m)) return false;
    return true;
  }

  bool closed_form() const {
    for (const auto& m : modes_)
      if (std::holds_alternative<transport::Table>(m)) return false;
    return true;
  }

  bool inside(const Vec& x) const {
    for (int a = 0; a < dim_; ++a)
      if (!(x[a] >= lower_[a] && x[a] <= upper_[a])) return false;
    return true;
  }

  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }

  TransportJet jet(int k, const Vec& x) const {
    return std::visit([&](const auto& m) { return eval(m, x); }, modes_[k]);
  }

  Vec q(int k, const Vec& x) const { return jet(k, x).q; }

 private:
  TransportJet blank() const { return {Vec::Zero(dim_), Mat::Zero(dim_, dim_), Hess::zero(dim_)}; }

  TransportJet eval(const transport::Constant& c, const Vec&) const {
    TransportJet j = blank();
    j.q = c.b;
    return j;
  }

  TransportJet eval(const transport::Rotation& r, const Vec& x) const {
    TransportJet j = blank();
    Mat A = Mat::Zero(dim_, dim_);
    if (dim_ == 2) {
      A << 0.0, 1.0, -1.0, 0.0;
    } else {
      // v x axis = -axis x v
      const Vec& w = r.axis;
      A << 0.0, w[2], -w[1], -w[2], 0.0, w[0], w[1], -w[0], 0.0;
    }
    A *= r.rate;
    j.q = A * (x - r.center);
    j.dq = A;
    return j;
  }

  TransportJet eval(const transport::StreamFunction& s, const Vec& x) const {
    using std::cos;
    using std::sin;
    constexpr double pi = std::numbers::pi;
    TransportJet j = blank();
    const double a1 = s.k1 * pi, a2 = s.k2 * pi;
    const double s1 = sin(a1 * x[0]), c1 = cos(a1 * x[0]);
    const double s2 = sin(a2 * x[1]), c2 = cos(a2 * x[1]);
    const double A = s.amp;
    // phi = A s1 s2; Q1 = d2 phi = A a2 s1 c2; Q2 = -d1 phi = -A a1 c1 s2
    j.q[0] = A * a2 * s1 * c2;
    j.q[1] = -A * a1 * c1 * s2;
    j.dq(0, 0) = A * a1 * a2 * c1 * c2;
    j.dq(0, 1) = -A * a2 * a2 * s1 * s2;
    j.dq(1, 0) = A * a1 * a1 * s1 * s2;
    j.dq(1, 1) = -A * a1 * a2 * c1 * c2;
    Mat& h0 = j.d2q.comp[0];
    Mat& h1 = j.d2q.comp[1];
    h0(0, 0) = -A * a1 * a1 * a2 * s1 * c2;
    h0(0, 1) = h0(1, 0) = -A * a1 * a2 * a2 * c1 * s2;
    h0(1, 1) = -A * a2 * a2 * a2 * s1 * c2;
    h1(0, 0) = A * a1 * a1 * a1 * c1 * s2;
    h1(0, 1) = h1(1, 0) = A * a1 * a1 * a2 * s1 * c2;
    h1(1, 1) = A * a1 * a2 * a2 * c1 * s2;
    return j;
  }

  TransportJet eval(const transport::Linear&, const Vec& x) const {
    TransportJet j = blank();
    j.q = x;
    j.dq = identity(dim_);
    return j;
  }

  TransportJet eval(const transport::Table& t, const Vec& x) const {
    TransportJet j = blank();
    const int d = dim_;
    auto v = interpolate(t.values, x, 4);
    auto g = interpolate(t.grad, x, 4);
    auto h = interpolate(t.hess, x, 4);
    for (int i = 0; i < d; ++i) {
      j.q[i] = v[i];
      for (int a = 0; a < d; ++a) {
        j.dq(i, a) = g[i * d + a];
        for (int b = 0; b < d; ++b) j.d2q.comp[i](a, b) = h[(i * d + a) * d + b];
      }
    }
    return j;
  }

  int dim_ = 2;
  std::vector<TransportKind> modes_;
  Vec lower_, upper_;
};

/// Ito correction 1/2 sum_k DQ_k(x) Q_k(x).
inline Vec stratonovich_drift(const TransportField& Q, const Vec& x) {
  Vec out = Vec::Zero(Q.dim());
  for (int k = 0; k < Q.count(); ++k) {
    TransportJet j = Q.jet(k, x);
    out += 0.5 * j.dq * j.q;
  }
  return out;
}

/// max over nodes and k of |div Q_k|. Closed-form kinds use the exact
/// Jacobian; tables use their finite-difference gradient.
inline double check_divergence_free(const TransportField& Q, const Grid& g) {
  double m = 0.0;
  for (int k = 0; k < Q.count(); ++k) {
    if (const auto* t = std::get_if<transport::Table>(&Q.mode(k))) {
      const int d = t->values.dim();
      for (std::size_t n = 0; n < t->grad.node_count(); ++n) {
        double tr = 0.0;
        for (int i = 0; i < d; ++i) tr += t->grad(n, i * d + i);
        m = std::max(m, std::abs(tr));
      }
      continue;
    }
    for (std::size_t n = 0; n < g.node_count(); ++n) m = std::max(m, std::abs(Q.jet(k, g.coord(n)).dq.trace()));
  }
  return m;
}

}  // namespace lagflow
