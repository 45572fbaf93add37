/// Brownian bundles: K transport paths plus M forcing-mode paths on a
/// uniform step, with bridge refinement and a binary replay format.
#pragma once

#include "lagflow/core/types.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace lagflow {

/// Increments of K + M independent Brownian paths.
/// Path index p < K is a transport path W^p; p >= K is forcing mode p - K.
class BrownianBundle {
 public:
  BrownianBundle() = default;
  BrownianBundle(int K, int M, std::size_t steps, double dt, std::uint64_t seed)
      : K_(K), M_(M), steps_(steps), dt_(dt), seed_(seed),
        inc_(static_cast<std::size_t>(K + M), std::vector<double>(steps, 0.0)) {}

  int transport_count() const { return K_; }
  int mode_count() const { return M_; }
  int path_count() const { return K_ + M_; }
  std::size_t steps() const { return steps_; }
  double step() const { return dt_; }
  double horizon() const { return dt_ * static_cast<double>(steps_); }
  std::uint64_t seed() const { return seed_; }

  /// Increment of path p over [t_n, t_{n+1}].
  double increment(int p, std::size_t n) const { return inc_[p][n]; }
  double& increment(int p, std::size_t n) { return inc_[p][n]; }
  double transport_increment(int k, std::size_t n) const { return inc_[k][n]; }
  double mode_increment(int m, std::size_t n) const { return inc_[K_ + m][n]; }

  const std::vector<double>& path_increments(int p) const { return inc_[p]; }

  /// W_p(t_n); W_p(0) = 0.
  double value(int p, std::size_t n) const {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i) w += inc_[p][i];
    return w;
  }

  /// Cumulative values W_p(t_0..t_steps).
  std::vector<double> values(int p) const {
    std::vector<double> w(steps_ + 1, 0.0);
    for (std::size_t i = 0; i < steps_; ++i) w[i + 1] = w[i] + inc_[p][i];
    return w;
  }

  /// Same transport paths with the forcing modes dropped.
  BrownianBundle transport_only() const {
    BrownianBundle b(K_, 0, steps_, dt_, seed_);
    for (int k = 0; k < K_; ++k) b.inc_[k] = inc_[k];
    return b;
  }

  bool operator==(const BrownianBundle& o) const = default;

  friend BrownianBundle sample_brownian(int, int, double, double, std::uint64_t);
  friend BrownianBundle refine_bridge(const BrownianBundle&);
  friend BrownianBundle coarsen(const BrownianBundle&);
  friend BrownianBundle load_bundle(const std::string&);

 private:
  int K_ = 0, M_ = 0;
  std::size_t steps_ = 0;
  double dt_ = 0.0;
  std::uint64_t seed_ = 0;
  std::vector<std::vector<double>> inc_;
};

namespace detail {

/// One independent stream per (seed, path, tag, extra).
inline std::mt19937_64 path_stream(std::uint64_t seed, int path, std::uint32_t tag, std::uint64_t extra = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(path), tag, static_cast<std::uint32_t>(extra & 0xffffffffu),
                    static_cast<std::uint32_t>(extra >> 32)};
  return std::mt19937_64(seq);
}

inline std::size_t step_count(double T, double dt) {
  if (!(dt > 0.0)) throw ConfigError("brownian: step must be positive");
  if (!(T > 0.0)) throw ConfigError("brownian: horizon must be positive");
  double r = T / dt;
  auto n = static_cast<std::size_t>(std::llround(r));
  if (n == 0 || std::abs(static_cast<double>(n) * dt - T) > 1e-12 * T)
    throw ConfigError("brownian: step does not divide the horizon");
  return n;
}

}  // namespace detail

/// Reproducible bundle: each path has its own generator seeded from (seed, path).
inline BrownianBundle sample_brownian(int K, int M, double T, double dt, std::uint64_t seed) {
  if (K < 0 || M < 0) throw ConfigError("brownian: negative path count");
  std::size_t steps = detail::step_count(T, dt);
  BrownianBundle b(K, M, steps, dt, seed);
  const double sd = std::sqrt(dt);
  for (int p = 0; p < K + M; ++p) {
    auto gen = detail::path_stream(seed, p, 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t n = 0; n < steps; ++n) b.inc_[p][n] = sd * normal(gen);
  }
  return b;
}

/// Brownian-bridge midpoint insertion. Coarse-instant values are preserved;
/// the new midpoint of [t_n, t_{n+1}] has mean (W_n + W_{n+1})/2 and variance dt/4.
inline BrownianBundle refine_bridge(const BrownianBundle& b) {
  BrownianBundle r(b.K_, b.M_, 2 * b.steps_, 0.5 * b.dt_, b.seed_);
  const double sd = 0.5 * std::sqrt(b.dt_);
  for (int p = 0; p < b.path_count(); ++p) {
    auto gen = detail::path_stream(b.seed_, p, 1, b.steps_);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t n = 0; n < b.steps_; ++n) {
      double dw = b.inc_[p][n];
      double first = 0.5 * dw + sd * normal(gen);
      r.inc_[p][2 * n] = first;
      r.inc_[p][2 * n + 1] = dw - first;
    }
  }
  return r;
}

/// Restriction to every other instant (inverse of refine_bridge on the coarse grid).
inline BrownianBundle coarsen(const BrownianBundle& b) {
  if (b.steps_ % 2 != 0) throw Error("brownian: odd step count cannot be coarsened");
  BrownianBundle c(b.K_, b.M_, b.steps_ / 2, 2.0 * b.dt_, b.seed_);
  for (int p = 0; p < b.path_count(); ++p)
    for (std::size_t n = 0; n < c.steps_; ++n) c.inc_[p][n] = b.inc_[p][2 * n] + b.inc_[p][2 * n + 1];
  return c;
}

/// `levels` bridge refinements of a bundle sampled at the coarsest step.
inline BrownianBundle refined(const BrownianBundle& b, int levels) {
  BrownianBundle r = b;
  for (int i = 0; i < levels; ++i) r = refine_bridge(r);
  return r;
}

namespace detail {

template <class T>
void put(std::ofstream& os, T v) {
  static_assert(sizeof(T) == 8);
  unsigned char bytes[8];
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(bytes), 8);
}

template <class T>
T get(std::ifstream& is) {
  unsigned char bytes[8];
  if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw Error("bundle load: truncated file");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  T v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace detail

/// Little-endian dump: u64 K, u64 M, u64 steps, f64 dt, u64 seed, then
/// f64 increments path by path.
inline void dump_bundle(const BrownianBundle& b, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("bundle dump: cannot open " + path);
  detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(b.transport_count()));
  detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(b.mode_count()));
  detail::put<std::uint64_t>(os, b.steps());
  detail::put<double>(os, b.step());
  detail::put<std::uint64_t>(os, b.seed());
  for (int p = 0; p < b.path_count(); ++p)
    for (std::size_t n = 0; n < b.steps(); ++n) detail::put<double>(os, b.increment(p, n));
  if (!os) throw Error("bundle dump: write failed for " + path);
}

inline BrownianBundle load_bundle(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("bundle load: cannot open " + path);
  auto K = detail::get<std::uint64_t>(is);
  auto M = detail::get<std::uint64_t>(is);
  auto steps = detail::get<std::uint64_t>(is);
  auto dt = detail::get<double>(is);
  auto seed = detail::get<std::uint64_t>(is);
  if (K > 1024 || M > 1024 || steps > (1u << 30)) throw Error("bundle load: implausible header in " + path);
  BrownianBundle b(static_cast<int>(K), static_cast<int>(M), steps, dt, seed);
  for (int p = 0; p < b.path_count(); ++p)
    for (std::size_t n = 0; n < steps; ++n) b.inc_[p][n] = detail::get<double>(is);
  return b;
}

}  // namespace lagflow
