#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace lagflow {

/// Small vector / matrix with runtime size 2 or 3 and inline storage.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;

/// Second derivatives of a vector-valued map: comp[i](a, b) = d_a d_b f_i.
struct Hess {
  std::array<Mat, 3> comp;

  static Hess zero(int dim) {
    Hess h;
    for (int i = 0; i < 3; ++i) h.comp[i] = Mat::Zero(dim, dim);
    return h;
  }
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or violated model constraint.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: non-finite data, solver stagnation, scheme blow-up.
class NumericalError : public Error {
 public:
  using Error::Error;
};

inline Mat identity(int dim) { return Mat::Identity(dim, dim); }

inline int ipow(int base, int exp) {
  int r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

}  // namespace lagflow
