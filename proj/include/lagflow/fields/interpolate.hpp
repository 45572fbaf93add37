/// Tensor-product Lagrange interpolation (linear or cubic) on a
/// structured grid, with interpolant gradients.
#pragma once

#include "lagflow/fields/field.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace lagflow {

/// Node weights of a tensor-product interpolant at one point.
/// grad[k][a] is the weight of node k in d/dx_a of the interpolant.
struct InterpStencil {
  static constexpr int capacity = 64;
  std::array<std::size_t, capacity> node{};
  std::array<double, capacity> weight{};
  std::array<std::array<double, 3>, capacity> grad{};
  int size = 0;
};

namespace detail {

/// 1D Lagrange weights on `points` consecutive nodes starting at `first`.
inline void lagrange_1d(double s, int first, int points, std::array<double, 4>& w, std::array<double, 4>& dw) {
  for (int k = 0; k < points; ++k) {
    double xk = first + k;
    double num = 1.0, den = 1.0, dnum = 0.0;
    for (int m = 0; m < points; ++m) {
      if (m == k) continue;
      double xm = first + m;
      den *= xk - xm;
      // d/ds of prod_m (s - xm) via the product rule
      dnum = dnum * (s - xm) + num;
      num *= s - xm;
    }
    w[k] = num / den;
    dw[k] = dnum / den;
  }
}

}  // namespace detail

/// Stencil for evaluating at x with `points` = 2 (multilinear) or 4 (cubic)
/// nodes per axis. Points outside the box are extrapolated from the edge cell;
/// callers decide whether that is acceptable.
inline InterpStencil interp_stencil(const Grid& g, const Vec& x, int points = 2) {
  if (points != 2 && points != 4) throw Error("interpolation: 2 or 4 points per axis");
  const int d = g.dim();
  std::array<int, 3> first{0, 0, 0};
  std::array<std::array<double, 4>, 3> w{}, dw{};
  std::array<int, 3> cnt{1, 1, 1};
  for (int a = 0; a < 3; ++a) {
    if (a >= d) {
      w[a][0] = 1.0;
      dw[a][0] = 0.0;
      continue;
    }
    double s = (x[a] - g.lower(a)) / g.spacing(a);
    int n = g.extent(a);
    int i0 = static_cast<int>(std::floor(s));
    int f = points == 2 ? i0 : i0 - 1;
    f = std::clamp(f, 0, n - points);
    first[a] = f;
    cnt[a] = points;
    detail::lagrange_1d(s, f, points, w[a], dw[a]);
    for (int k = 0; k < points; ++k) dw[a][k] /= g.spacing(a);
  }
  InterpStencil st;
  for (int k2 = 0; k2 < cnt[2]; ++k2)
    for (int k1 = 0; k1 < cnt[1]; ++k1)
      for (int k0 = 0; k0 < cnt[0]; ++k0) {
        int e = st.size++;
        st.node[e] = g.node({first[0] + k0, first[1] + k1, first[2] + k2});
        st.weight[e] = w[0][k0] * w[1][k1] * w[2][k2];
        st.grad[e] = {dw[0][k0] * w[1][k1] * w[2][k2], w[0][k0] * dw[1][k1] * w[2][k2],
                      w[0][k0] * w[1][k1] * dw[2][k2]};
      }
  return st;
}

/// Node weights only (no gradient weights), for hot evaluation loops.
struct InterpWeights {
  std::array<std::size_t, InterpStencil::capacity> node{};
  std::array<double, InterpStencil::capacity> weight{};
  int size = 0;
};

inline InterpWeights interp_weights(const Grid& g, const Vec& x, int points = 2) {
  if (points != 2 && points != 4) throw Error("interpolation: 2 or 4 points per axis");
  const int d = g.dim();
  std::array<int, 3> first{0, 0, 0};
  std::array<std::array<double, 4>, 3> w{}, dw{};
  std::array<int, 3> cnt{1, 1, 1};
  for (int a = 0; a < 3; ++a) {
    if (a >= d) {
      w[a][0] = 1.0;
      continue;
    }
    double s = (x[a] - g.lower(a)) / g.spacing(a);
    int n = g.extent(a);
    int i0 = static_cast<int>(std::floor(s));
    int f = points == 2 ? i0 : i0 - 1;
    f = std::clamp(f, 0, n - points);
    first[a] = f;
    cnt[a] = points;
    detail::lagrange_1d(s, f, points, w[a], dw[a]);
  }
  InterpWeights st;
  for (int k2 = 0; k2 < cnt[2]; ++k2)
    for (int k1 = 0; k1 < cnt[1]; ++k1) {
      std::size_t row = g.node({first[0], first[1] + k1, first[2] + k2});
      for (int k0 = 0; k0 < cnt[0]; ++k0) {
        int e = st.size++;
        st.node[e] = row + static_cast<std::size_t>(k0);
        st.weight[e] = w[0][k0] * w[1][k1] * w[2][k2];
      }
    }
  return st;
}

/// Interpolated components of f at x.
inline std::vector<double> interpolate(const Field& f, const Vec& x, int points = 2) {
  InterpStencil st = interp_stencil(f.grid(), x, points);
  std::vector<double> out(f.components(), 0.0);
  for (int e = 0; e < st.size; ++e)
    for (int c = 0; c < f.components(); ++c) out[c] += st.weight[e] * f(st.node[e], c);
  return out;
}

/// Value and Jacobian (rows: components, cols: axes) of an interpolated vector field.
inline std::pair<Vec, Mat> interpolate_with_jacobian(const Field& f, const Vec& x, int points = 2) {
  if (f.rank() != 1) throw Error("interpolate_with_jacobian: vector field required");
  const int d = f.dim();
  InterpStencil st = interp_stencil(f.grid(), x, points);
  Vec v = Vec::Zero(d);
  Mat m = Mat::Zero(d, d);
  for (int e = 0; e < st.size; ++e)
    for (int c = 0; c < d; ++c) {
      double fv = f(st.node[e], c);
      v[c] += st.weight[e] * fv;
      for (int a = 0; a < d; ++a) m(c, a) += st.grad[e][a] * fv;
    }
  return {v, m};
}

}  // namespace lagflow
