#pragma once

#include "lagflow/core/types.hpp"
#include "lagflow/fields/grid.hpp"

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace lagflow {

/// Nodal tensor field of rank 0..3; one value per node per component.
///
/// Component layout for rank r is row-major over r indices of size dim, so a
/// rank-2 field stores M(i, j) at i * dim + j. Gradients append the derivative
/// index last: grad(f)_{c, a} = d_a f_c.
class Field {
 public:
  Field() = default;
  Field(GridPtr grid, int rank, double fill = 0.0)
      : grid_(std::move(grid)), rank_(rank), ncomp_(ipow(grid_->dim(), rank)),
        data_(grid_->node_count() * ncomp_, fill) {}

  static Field scalar(GridPtr g, const std::function<double(const Vec&)>& fn) {
    Field f(g, 0);
    for (std::size_t n = 0; n < g->node_count(); ++n) f.data_[n] = fn(g->coord(n));
    return f;
  }

  static Field vector(GridPtr g, const std::function<Vec(const Vec&)>& fn) {
    Field f(g, 1);
    for (std::size_t n = 0; n < g->node_count(); ++n) f.set_vec(n, fn(g->coord(n)));
    return f;
  }

  static Field matrix(GridPtr g, const std::function<Mat(const Vec&)>& fn) {
    Field f(g, 2);
    for (std::size_t n = 0; n < g->node_count(); ++n) f.set_mat(n, fn(g->coord(n)));
    return f;
  }

  static Field identity_matrix(GridPtr g) {
    Field f(g, 2);
    int d = g->dim();
    for (std::size_t n = 0; n < g->node_count(); ++n)
      for (int i = 0; i < d; ++i) f(n, i * d + i) = 1.0;
    return f;
  }

  const GridPtr& grid_ptr() const { return grid_; }
  const Grid& grid() const { return *grid_; }
  int rank() const { return rank_; }
  int components() const { return ncomp_; }
  int dim() const { return grid_->dim(); }
  std::size_t node_count() const { return grid_->node_count(); }
  bool empty() const { return !grid_; }

  double& operator()(std::size_t node, int comp) { return data_[node * ncomp_ + comp]; }
  double operator()(std::size_t node, int comp) const { return data_[node * ncomp_ + comp]; }

  std::span<double> at(std::size_t node) { return {data_.data() + node * ncomp_, static_cast<std::size_t>(ncomp_)}; }
  std::span<const double> at(std::size_t node) const {
    return {data_.data() + node * ncomp_, static_cast<std::size_t>(ncomp_)};
  }

  Vec vec(std::size_t node) const {
    Vec v(dim());
    for (int i = 0; i < dim(); ++i) v[i] = (*this)(node, i);
    return v;
  }
  void set_vec(std::size_t node, const Vec& v) {
    for (int i = 0; i < dim(); ++i) (*this)(node, i) = v[i];
  }
  Mat mat(std::size_t node) const {
    int d = dim();
    Mat m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = (*this)(node, i * d + j);
    return m;
  }
  void set_mat(std::size_t node, const Mat& m) {
    int d = dim();
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) (*this)(node, i * d + j) = m(i, j);
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  /// Throws NumericalError naming the first node holding a non-finite value.
  void check_finite(const std::string& what = "field") const {
    for (std::size_t k = 0; k < data_.size(); ++k) {
      if (!std::isfinite(data_[k]))
        throw NumericalError(what + ": non-finite value at node " + std::to_string(k / ncomp_));
    }
  }

  /// NaN if any entry is NaN.
  double max_abs() const {
    double m = 0.0;
    for (double v : data_) {
      if (std::isnan(v)) return v;
      m = std::max(m, std::abs(v));
    }
    return m;
  }

  Field& operator+=(const Field& o) {
    check_compatible(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Field& operator-=(const Field& o) {
    check_compatible(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Field& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }
  /// this += s * o
  Field& axpy(double s, const Field& o) {
    check_compatible(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += s * o.data_[k];
    return *this;
  }

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double s, Field a) { return a *= s; }
  friend Field operator*(Field a, double s) { return a *= s; }

  /// Pointwise product with a scalar field.
  Field scaled_by(const Field& s) const {
    if (s.rank() != 0) throw Error("scaled_by: scalar field required");
    Field out = *this;
    for (std::size_t n = 0; n < node_count(); ++n)
      for (int c = 0; c < ncomp_; ++c) out(n, c) *= s(n, 0);
    return out;
  }

 private:
  void check_compatible(const Field& o) const {
    if (o.ncomp_ != ncomp_ || o.data_.size() != data_.size())
      throw Error("field arithmetic: incompatible shapes");
  }

  GridPtr grid_;
  int rank_ = 0;
  int ncomp_ = 1;
  std::vector<double> data_;
};

/// Strictly increasing instants starting at 0 with one frame per instant.
struct TimeSeries {
  std::vector<double> times;
  std::vector<Field> frames;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
  void push(double t, Field f) {
    if (!times.empty() && !(t > times.back()))
      throw Error("time series: instants must be strictly increasing");
    times.push_back(t);
    frames.push_back(std::move(f));
  }
  const Field& back() const { return frames.back(); }
  double end_time() const { return times.empty() ? 0.0 : times.back(); }

  /// Uniform step; throws if the instants are not uniform to 1e-9 relative.
  double uniform_step() const {
    if (times.size() < 2) return 0.0;
    double dt = times[1] - times[0];
    for (std::size_t i = 1; i < times.size(); ++i) {
      double d = times[i] - times[i - 1];
      if (std::abs(d - dt) > 1e-9 * std::max(1.0, std::abs(dt)) + 1e-15)
        throw Error("time series: non-uniform instants");
    }
    return dt;
  }

  /// Frames [0, count).
  TimeSeries head(std::size_t count) const {
    TimeSeries s;
    count = std::min(count, size());
    s.times.assign(times.begin(), times.begin() + count);
    s.frames.assign(frames.begin(), frames.begin() + count);
    return s;
  }
};

inline TimeSeries constant_series(const Field& f, std::size_t steps, double dt) {
  TimeSeries s;
  for (std::size_t n = 0; n <= steps; ++n) s.push(n * dt, f);
  return s;
}

}  // namespace lagflow
