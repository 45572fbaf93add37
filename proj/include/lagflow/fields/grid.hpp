/// Structured node grid on an axis-aligned box, with boundary
/// enumeration, outward normals and trapezoidal quadrature weights.
#pragma once

#include "lagflow/core/types.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lagflow {

class Grid {
 public:
  /// Nodes are numbered with axis 0 fastest: node = i0 + n0 * (i1 + n1 * i2).
  Grid(int dim, std::array<int, 3> extent, std::array<double, 3> lower,
       std::array<double, 3> upper)
      : dim_(dim), extent_(extent), lower_(lower), upper_(upper) {
    if (dim != 2 && dim != 3) throw ConfigError("grid: dim must be 2 or 3");
    for (int a = 0; a < 3; ++a) {
      if (a >= dim) {
        extent_[a] = 1;
        lower_[a] = upper_[a] = 0.0;
        spacing_[a] = 1.0;
        continue;
      }
      if (extent_[a] < 5) throw ConfigError("grid: extent must be >= 5 per axis");
      if (!(upper_[a] > lower_[a])) throw ConfigError("grid: empty box side");
      spacing_[a] = (upper_[a] - lower_[a]) / (extent_[a] - 1);
    }
    node_count_ = static_cast<std::size_t>(extent_[0]) * extent_[1] * extent_[2];
    build_boundary();
    build_weights();
  }

  /// Uniform box [lo, hi]^dim with n nodes per axis.
  static std::shared_ptr<const Grid> box(int dim, int n, double lo = 0.0, double hi = 1.0) {
    std::array<double, 3> l{lo, lo, lo}, u{hi, hi, hi};
    return std::make_shared<const Grid>(dim, std::array<int, 3>{n, n, n}, l, u);
  }

  int dim() const { return dim_; }
  int extent(int axis) const { return extent_[axis]; }
  double spacing(int axis) const { return spacing_[axis]; }
  double lower(int axis) const { return lower_[axis]; }
  double upper(int axis) const { return upper_[axis]; }
  std::size_t node_count() const { return node_count_; }

  std::array<int, 3> index(std::size_t node) const {
    std::array<int, 3> idx{0, 0, 0};
    idx[0] = static_cast<int>(node % extent_[0]);
    std::size_t rest = node / extent_[0];
    idx[1] = static_cast<int>(rest % extent_[1]);
    idx[2] = static_cast<int>(rest / extent_[1]);
    return idx;
  }

  std::size_t node(const std::array<int, 3>& idx) const {
    return static_cast<std::size_t>(idx[0]) +
           static_cast<std::size_t>(extent_[0]) *
               (static_cast<std::size_t>(idx[1]) + static_cast<std::size_t>(extent_[1]) * idx[2]);
  }

  /// Node offset along one axis; caller guarantees the neighbour exists.
  std::size_t stride(int axis) const {
    std::size_t s = 1;
    for (int a = 0; a < axis; ++a) s *= extent_[a];
    return s;
  }

  Vec coord(std::size_t node) const {
    auto idx = index(node);
    Vec x(dim_);
    for (int a = 0; a < dim_; ++a) x[a] = lower_[a] + idx[a] * spacing_[a];
    return x;
  }

  bool is_boundary(std::size_t node) const { return slot_[node] >= 0; }
  int boundary_slot(std::size_t node) const { return slot_[node]; }
  std::span<const std::size_t> boundary_nodes() const { return boundary_; }
  std::size_t boundary_count() const { return boundary_.size(); }
  /// Outward unit normal at boundary slot s (corner: normalized sum of faces).
  const Vec& normal(std::size_t slot) const { return normals_[slot]; }
  const std::vector<Vec>& normals() const { return normals_; }

  double weight(std::size_t node) const { return weights_[node]; }
  const std::vector<double>& weights() const { return weights_; }
  double volume() const {
    double v = 1.0;
    for (int a = 0; a < dim_; ++a) v *= upper_[a] - lower_[a];
    return v;
  }

  bool contains(const Vec& x, double tol = 0.0) const {
    for (int a = 0; a < dim_; ++a)
      if (x[a] < lower_[a] - tol || x[a] > upper_[a] + tol) return false;
    return true;
  }

  bool same_shape(const Grid& o) const {
    return dim_ == o.dim_ && extent_ == o.extent_ && lower_ == o.lower_ && upper_ == o.upper_;
  }

 private:
  void build_boundary() {
    slot_.assign(node_count_, -1);
    for (std::size_t n = 0; n < node_count_; ++n) {
      auto idx = index(n);
      Vec normal = Vec::Zero(dim_);
      bool on_boundary = false;
      for (int a = 0; a < dim_; ++a) {
        if (idx[a] == 0) {
          normal[a] -= 1.0;
          on_boundary = true;
        } else if (idx[a] == extent_[a] - 1) {
          normal[a] += 1.0;
          on_boundary = true;
        }
      }
      if (!on_boundary) continue;
      slot_[n] = static_cast<int>(boundary_.size());
      boundary_.push_back(n);
      normals_.push_back(normal / normal.norm());
    }
  }

  void build_weights() {
    weights_.assign(node_count_, 1.0);
    for (std::size_t n = 0; n < node_count_; ++n) {
      auto idx = index(n);
      double w = 1.0;
      for (int a = 0; a < dim_; ++a) {
        double wa = spacing_[a];
        if (idx[a] == 0 || idx[a] == extent_[a] - 1) wa *= 0.5;
        w *= wa;
      }
      weights_[n] = w;
    }
  }

  int dim_;
  std::array<int, 3> extent_;
  std::array<double, 3> lower_, upper_, spacing_{};
  std::size_t node_count_ = 0;
  std::vector<int> slot_;
  std::vector<std::size_t> boundary_;
  std::vector<Vec> normals_;
  std::vector<double> weights_;
};

using GridPtr = std::shared_ptr<const Grid>;

}  // namespace lagflow
