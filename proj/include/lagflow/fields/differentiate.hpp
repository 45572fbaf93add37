/// Second-order finite-difference stencils on the structured grid:
/// centered in the interior, one-sided second order at the boundary.
#pragma once

#include "lagflow/fields/field.hpp"

#include <array>
#include <vector>

namespace lagflow {

struct StencilEntry {
  std::size_t node;
  double weight;
};

/// Fixed-capacity stencil (mixed derivatives need 3 x 3 = 9 entries).
struct Stencil {
  std::array<StencilEntry, 9> entries{};
  int size = 0;

  void add(std::size_t node, double w) { entries[size++] = {node, w}; }
  const StencilEntry* begin() const { return entries.data(); }
  const StencilEntry* end() const { return entries.data() + size; }

  template <class Get>
  double apply(Get&& get) const {
    double s = 0.0;
    for (const auto& e : *this) s += e.weight * get(e.node);
    return s;
  }
};

/// 1D weights for d/dx at position i of n points, spacing h; offsets relative to i.
inline int first_derivative_1d(int i, int n, double h, std::array<int, 3>& off, std::array<double, 3>& w) {
  if (i == 0) {
    off = {0, 1, 2};
    w = {-1.5 / h, 2.0 / h, -0.5 / h};
  } else if (i == n - 1) {
    off = {0, -1, -2};
    w = {1.5 / h, -2.0 / h, 0.5 / h};
  } else {
    off = {-1, 1, 0};
    w = {-0.5 / h, 0.5 / h, 0.0};
    return 2;
  }
  return 3;
}

inline Stencil first_derivative_stencil(const Grid& g, std::size_t node, int axis) {
  auto idx = g.index(node);
  std::array<int, 3> off{};
  std::array<double, 3> w{};
  int m = first_derivative_1d(idx[axis], g.extent(axis), g.spacing(axis), off, w);
  auto stride = static_cast<std::ptrdiff_t>(g.stride(axis));
  Stencil s;
  for (int k = 0; k < m; ++k) s.add(static_cast<std::size_t>(static_cast<std::ptrdiff_t>(node) + off[k] * stride), w[k]);
  return s;
}

/// d^2/dx_a^2: centered 3-point interior, 4-point one-sided at the ends.
inline Stencil second_derivative_stencil(const Grid& g, std::size_t node, int axis) {
  auto idx = g.index(node);
  int i = idx[axis], n = g.extent(axis);
  double h2 = g.spacing(axis) * g.spacing(axis);
  auto stride = static_cast<std::ptrdiff_t>(g.stride(axis));
  auto at = [&](int o) { return static_cast<std::size_t>(static_cast<std::ptrdiff_t>(node) + o * stride); };
  Stencil s;
  if (i == 0) {
    s.add(at(0), 2.0 / h2);
    s.add(at(1), -5.0 / h2);
    s.add(at(2), 4.0 / h2);
    s.add(at(3), -1.0 / h2);
  } else if (i == n - 1) {
    s.add(at(0), 2.0 / h2);
    s.add(at(-1), -5.0 / h2);
    s.add(at(-2), 4.0 / h2);
    s.add(at(-3), -1.0 / h2);
  } else {
    s.add(at(-1), 1.0 / h2);
    s.add(at(0), -2.0 / h2);
    s.add(at(1), 1.0 / h2);
  }
  return s;
}

/// d_a d_b f; a == b falls back to the pure second-derivative stencil.
inline Stencil mixed_derivative_stencil(const Grid& g, std::size_t node, int a, int b) {
  if (a == b) return second_derivative_stencil(g, node, a);
  Stencil sa = first_derivative_stencil(g, node, a);
  Stencil out;
  for (const auto& ea : sa) {
    Stencil sb = first_derivative_stencil(g, ea.node, b);
    for (const auto& eb : sb) out.add(eb.node, ea.weight * eb.weight);
  }
  return out;
}

namespace detail {

/// Per-axis stencil tables indexed by the node's position along the axis;
/// offsets are already multiplied by the axis stride.
struct AxisTable {
  struct Row {
    std::array<std::ptrdiff_t, 4> off{};
    std::array<double, 4> w{};
    int size = 0;
  };
  std::vector<Row> first, second;
};

inline AxisTable axis_table(const Grid& g, int axis) {
  AxisTable t;
  const int n = g.extent(axis);
  std::array<int, 3> idx{0, 0, 0};
  t.first.resize(n);
  t.second.resize(n);
  for (int i = 0; i < n; ++i) {
    idx[axis] = i;
    const std::size_t node = g.node(idx);
    auto fill = [&](const Stencil& s, AxisTable::Row& r) {
      for (const auto& e : s) {
        r.off[r.size] = static_cast<std::ptrdiff_t>(e.node) - static_cast<std::ptrdiff_t>(node);
        r.w[r.size++] = e.weight;
      }
    };
    fill(first_derivative_stencil(g, node, axis), t.first[i]);
    fill(second_derivative_stencil(g, node, axis), t.second[i]);
  }
  return t;
}

}  // namespace detail

/// Gradient (order 1) or full second-derivative array (order 2) of f.
/// The result has rank f.rank() + order; derivative indices come last.
inline Field differentiate(const Field& f, int order = 1) {
  if (order != 1 && order != 2) throw Error("differentiate: order must be 1 or 2");
  const Grid& g = f.grid();
  for (int a = 0; a < g.dim(); ++a)
    if (g.extent(a) < 5) throw Error("differentiate: grid extent must be >= 5");
  f.check_finite("differentiate");
  const int d = g.dim();
  const int nc = f.components();
  std::array<detail::AxisTable, 3> tab;
  for (int a = 0; a < d; ++a) tab[a] = detail::axis_table(g, a);
  Field out(f.grid_ptr(), f.rank() + order);
  const double* fd = f.data().data();
  const int oc = out.components();
  double* od = out.data().data();
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    const auto idx = g.index(n);
    const auto base = static_cast<std::ptrdiff_t>(n);
    double* o = od + n * oc;
    if (order == 1) {
      for (int a = 0; a < d; ++a) {
        const auto& r = tab[a].first[idx[a]];
        for (int c = 0; c < nc; ++c) {
          double s = 0.0;
          for (int k = 0; k < r.size; ++k) s += r.w[k] * fd[(base + r.off[k]) * nc + c];
          o[c * d + a] = s;
        }
      }
    } else {
      for (int a = 0; a < d; ++a) {
        for (int b = a; b < d; ++b) {
          for (int c = 0; c < nc; ++c) {
            double s = 0.0;
            if (a == b) {
              const auto& r = tab[a].second[idx[a]];
              for (int k = 0; k < r.size; ++k) s += r.w[k] * fd[(base + r.off[k]) * nc + c];
            } else {
              // moving along axis a leaves the index along b unchanged
              const auto& ra = tab[a].first[idx[a]];
              const auto& rb = tab[b].first[idx[b]];
              for (int ka = 0; ka < ra.size; ++ka)
                for (int kb = 0; kb < rb.size; ++kb)
                  s += ra.w[ka] * rb.w[kb] * fd[(base + ra.off[ka] + rb.off[kb]) * nc + c];
            }
            o[(c * d + a) * d + b] = s;
            o[(c * d + b) * d + a] = s;
          }
        }
      }
    }
  }
  return out;
}

/// Divergence of a vector field.
inline Field divergence(const Field& u) {
  if (u.rank() != 1) throw Error("divergence: vector field required");
  Field grad = differentiate(u, 1);
  const int d = u.dim();
  Field out(u.grid_ptr(), 0);
  for (std::size_t n = 0; n < u.node_count(); ++n) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += grad(n, i * d + i);
    out(n, 0) = s;
  }
  return out;
}

}  // namespace lagflow
