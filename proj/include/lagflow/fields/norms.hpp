/// Discrete Sobolev surrogates: trapezoidal L^q, H^{1,q}, H^{2,q}
/// and time-window norms (L^p, L^inf, Gagliardo H^{theta,p}).
#pragma once

#include "lagflow/fields/differentiate.hpp"

#include <cmath>
#include <vector>

namespace lagflow {

enum class NormKind { Lq, H1q, H2q };

/// A field together with the derivative arrays its norm needs. Norms of
/// differences are norms of stack differences, since the stack is linear in f.
struct NormStack {
  std::vector<Field> parts;

  NormStack operator-(const NormStack& o) const {
    NormStack r = *this;
    for (std::size_t k = 0; k < parts.size(); ++k) r.parts[k] -= o.parts[k];
    return r;
  }
};

inline NormStack make_stack(const Field& f, NormKind kind) {
  NormStack s;
  s.parts.push_back(f);
  if (kind == NormKind::H1q || kind == NormKind::H2q) s.parts.push_back(differentiate(f, 1));
  if (kind == NormKind::H2q) s.parts.push_back(differentiate(f, 2));
  return s;
}

/// m2^{q/2}; repeated squaring when q/2 is a small integer.
inline double half_power(double m2, double q) {
  const double h = 0.5 * q;
  if (h == std::floor(h) && h >= 1.0 && h <= 16.0) {
    double r = 1.0, b = m2;
    for (auto k = static_cast<unsigned>(h); k; k >>= 1) {
      if (k & 1u) r *= b;
      b *= b;
    }
    return r;
  }
  return std::pow(m2, h);
}

/// sum_n w_n |f_n|^q with |.| the Euclidean norm over components.
inline double lq_power(const Field& f, double q) {
  const Grid& g = f.grid();
  const int nc = f.components();
  double sum = 0.0;
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    double m2 = 0.0;
    for (int c = 0; c < nc; ++c) m2 += f(n, c) * f(n, c);
    if (m2 > 0.0) sum += g.weight(n) * half_power(m2, q);
  }
  return sum;
}

inline double stack_norm(const NormStack& s, double q) {
  double sum = 0.0;
  for (const auto& p : s.parts) sum += lq_power(p, q);
  return std::pow(sum, 1.0 / q);
}

/// stack_norm(a - b, q) without forming the difference.
inline double stack_distance(const NormStack& a, const NormStack& b, double q) {
  double sum = 0.0;
  for (std::size_t k = 0; k < a.parts.size(); ++k) {
    const Field& fa = a.parts[k];
    const Grid& g = fa.grid();
    const int nc = fa.components();
    const double* pa = fa.data().data();
    const double* pb = b.parts[k].data().data();
    double part = 0.0;
    for (std::size_t n = 0; n < g.node_count(); ++n) {
      double m2 = 0.0;
      for (int c = 0; c < nc; ++c) {
        double v = pa[n * nc + c] - pb[n * nc + c];
        m2 += v * v;
      }
      if (m2 > 0.0) part += g.weight(n) * half_power(m2, q);
    }
    sum += part;
  }
  return std::pow(sum, 1.0 / q);
}

inline void check_exponent(double q) {
  if (!(q > 1.0)) throw Error("norm: exponent must be > 1");
}

/// Spatial norm of one field.
inline double norm(const Field& f, NormKind kind, double q) {
  check_exponent(q);
  return stack_norm(make_stack(f, kind), q);
}

inline double norm_lq(const Field& f, double q) { return norm(f, NormKind::Lq, q); }
inline double norm_h1q(const Field& f, double q) { return norm(f, NormKind::H1q, q); }
inline double norm_h2q(const Field& f, double q) { return norm(f, NormKind::H2q, q); }

inline double sup_norm(const Field& f) {
  double m = 0.0;
  const int nc = f.components();
  for (std::size_t n = 0; n < f.node_count(); ++n) {
    double m2 = 0.0;
    for (int c = 0; c < nc; ++c) m2 += f(n, c) * f(n, c);
    m = std::max(m, std::sqrt(m2));
  }
  return m;
}

/// sup over frames of the spatial norm (L^inf-in-time surrogate).
inline double sup_time_norm(const TimeSeries& s, NormKind kind, double q) {
  double m = 0.0;
  for (const auto& f : s.frames) m = std::max(m, norm(f, kind, q));
  return m;
}

/// Trapezoidal weights for a uniform time grid with `count` instants.
inline double trapezoid_weight(std::size_t i, std::size_t count, double dt) {
  if (count < 2) return 0.0;
  return (i == 0 || i + 1 == count) ? 0.5 * dt : dt;
}

/// (int_0^T ||f(t)||^p dt)^{1/p} by the trapezoidal rule.
inline double lp_time_norm(const std::vector<double>& spatial_norms, double dt, double p) {
  check_exponent(p);
  double sum = 0.0;
  for (std::size_t i = 0; i < spatial_norms.size(); ++i)
    sum += trapezoid_weight(i, spatial_norms.size(), dt) * std::pow(spatial_norms[i], p);
  return std::pow(sum, 1.0 / p);
}

inline double lp_time_norm(const TimeSeries& s, NormKind kind, double q, double p) {
  std::vector<double> vals;
  vals.reserve(s.size());
  for (const auto& f : s.frames) vals.push_back(norm(f, kind, q));
  return lp_time_norm(vals, s.uniform_step(), p);
}

/// Incremental evaluation of the discrete H^{theta,p}(0,t; X) norm:
///   ( sum_i w_i ||f_i||^p
///     + sum_{i != j} ||f_i - f_j||^p dt^2 / |t_i - t_j|^{1 + theta p} )^{1/p}
/// with X one of the spatial surrogates. Appending frames never decreases
/// either part, so the running value is monotone in the window.
class FractionalTimeNorm {
 public:
  FractionalTimeNorm(double theta, double p, NormKind kind, double q)
      : theta_(theta), p_(p), kind_(kind), q_(q) {
    if (!(theta > 0.0 && theta < 1.0)) throw Error("fractional norm: theta must lie in (0,1)");
    check_exponent(p);
    check_exponent(q);
  }

  void append(double t, const Field& f) { append(t, make_stack(f, kind_)); }

  void append(double t, NormStack s) {
    if (!times_.empty()) {
      double dt = t - times_.back();
      if (times_.size() == 1) {
        dt_ = dt;
      } else if (std::abs(dt - dt_) > 1e-9 * dt_) {
        throw Error("fractional norm: non-uniform times");
      }
      const double expo = 1.0 + theta_ * p_;
      for (std::size_t j = 0; j < stacks_.size(); ++j) {
        double gap = stack_distance(s, stacks_[j], q_);
        if (gap > 0.0) semi_sum_ += 2.0 * std::pow(gap, p_) * dt_ * dt_ / std::pow(t - times_[j], expo);
      }
    }
    spatial_.push_back(stack_norm(s, q_));
    times_.push_back(t);
    stacks_.push_back(std::move(s));
  }

  std::size_t size() const { return times_.size(); }
  double seminorm() const { return std::pow(semi_sum_, 1.0 / p_); }
  double lp_part() const { return times_.size() < 2 ? 0.0 : lp_time_norm(spatial_, dt_, p_); }
  double value() const {
    double lp = lp_part();
    return std::pow(std::pow(lp, p_) + semi_sum_, 1.0 / p_);
  }

 private:
  double theta_, p_;
  NormKind kind_;
  double q_;
  double dt_ = 0.0;
  double semi_sum_ = 0.0;
  std::vector<double> times_;
  std::vector<double> spatial_;
  std::vector<NormStack> stacks_;
};

/// Gagliardo seminorm of a series (the double-sum part only).
inline double slobodeckij_time_seminorm(const TimeSeries& s, double theta, double p, NormKind kind, double q) {
  s.uniform_step();
  FractionalTimeNorm acc(theta, p, kind, q);
  for (std::size_t i = 0; i < s.size(); ++i) acc.append(s.times[i], s.frames[i]);
  return acc.seminorm();
}

/// Full H^{theta,p}(0,T; X) surrogate: L^p part plus Gagliardo seminorm.
inline double fractional_time_norm(const TimeSeries& s, double theta, double p, NormKind kind, double q) {
  s.uniform_step();
  FractionalTimeNorm acc(theta, p, kind, q);
  for (std::size_t i = 0; i < s.size(); ++i) acc.append(s.times[i], s.frames[i]);
  return acc.value();
}

/// Boundary trace: nodal values on Gamma_0 paired with the outward normal.
struct BoundaryTrace {
  std::vector<std::size_t> nodes;
  std::vector<Vec> normals;
  std::vector<std::vector<double>> values;
};

inline BoundaryTrace trace_boundary(const Field& f) {
  const Grid& g = f.grid();
  BoundaryTrace tr;
  for (std::size_t s = 0; s < g.boundary_count(); ++s) {
    std::size_t n = g.boundary_nodes()[s];
    tr.nodes.push_back(n);
    tr.normals.push_back(g.normal(s));
    auto v = f.at(n);
    tr.values.emplace_back(v.begin(), v.end());
  }
  return tr;
}

}  // namespace lagflow
