/// Flat dotted-key run configuration with defaults, overrides and
/// validation of every model constraint at load.
#pragma once

#include "lagflow/fixedpoint/config.hpp"
#include "lagflow/lame/params.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <string>

namespace lagflow {

class RunConfig {
 public:
  RunConfig() : values_(defaults()) { finalize(); }

  static nlohmann::json defaults() {
    return {
        {"grid.dim", 2},           {"grid.n", 33},
        {"grid.lower", 0.0},       {"grid.upper", 1.0},
        {"fluid.mu", 1.0},         {"fluid.lambda", 0.5},
        {"fluid.a", 1.0},          {"fluid.gamma", 1.4},
        {"fluid.p_ext", 1.0},      {"fluid.rho_lo", 1.0},
        {"fluid.rho_hi", 2.0},     {"solve.p", 4.0},
        {"solve.q", 8.0},          {"solve.theta", nullptr},
        {"solve.R", 2.0},          {"solve.r", 1.0},
        {"solve.T", 0.05},         {"solve.dt", 1e-3},
        {"solve.tol", 1e-10},      {"solve.max_iter", 30},
        {"solve.eps", 0.1},        {"flow.delta", 0.2},
        {"flow.delta0", 0.2},      {"flow.eps_star", 0.25},
        {"flow.C_monitor", 1.0},   {"flow.engine", "stochastic"},
        {"noise.K", 2},            {"noise.kind", "stream"},
        {"noise.amplitude", 0.001}, {"noise.margin", 0.125},
        {"noise.refine", 2},       {"forcing.M", 1},
        {"forcing.amplitude", 0.01}, {"initial.kind", "perturbed"},
        {"initial.amplitude", 1e-3}, {"initial.rho0", 1.0},
        {"seed", 1},               {"output.snapshot_every", 10},
    };
  }

  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    if (!j.is_object()) throw ConfigError("config: top level must be an object of dotted keys");
    for (const auto& [k, v] : j.items()) c.put(k, v);
    c.finalize();
    return c;
  }

  static RunConfig load(const std::filesystem::path& p) {
    std::ifstream is(p);
    if (!is) throw ConfigError("config: cannot open " + p.string());
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config: " + p.string() + ": " + e.what());
    }
    return from_json(j);
  }

  /// key=value with value parsed as JSON, else taken as a string.
  void set(const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("config: override must be key=value: " + assignment);
    std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
    nlohmann::json v;
    try {
      v = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception&) {
      v = raw;
    }
    put(key, v);
    finalize();
  }

  void set(const std::string& key, const nlohmann::json& v) {
    put(key, v);
    finalize();
  }

  double num(const std::string& k) const {
    const auto& v = at(k);
    if (!v.is_number()) throw ConfigError("config: " + k + " must be a number");
    return v.get<double>();
  }
  long integer(const std::string& k) const {
    double x = num(k);
    if (x != std::floor(x)) throw ConfigError("config: " + k + " must be an integer");
    return static_cast<long>(x);
  }
  std::string str(const std::string& k) const {
    const auto& v = at(k);
    if (!v.is_string()) throw ConfigError("config: " + k + " must be a string");
    return v.get<std::string>();
  }

  /// Every effective key, defaults included.
  const nlohmann::json& effective() const { return values_; }

  FluidParams fluid() const {
    FluidParams f;
    f.mu = num("fluid.mu");
    f.lambda = num("fluid.lambda");
    f.a = num("fluid.a");
    f.gamma = num("fluid.gamma");
    f.p_ext = num("fluid.p_ext");
    f.rho_lo = num("fluid.rho_lo");
    f.rho_hi = num("fluid.rho_hi");
    return f;
  }

  SolveConfig solve() const {
    SolveConfig s;
    s.p = num("solve.p");
    s.q = num("solve.q");
    s.theta = num("solve.theta");
    s.R = num("solve.R");
    s.r = num("solve.r");
    s.T = num("solve.T");
    s.dt = num("solve.dt");
    s.tol = num("solve.tol");
    s.max_iter = static_cast<int>(integer("solve.max_iter"));
    s.eps = num("solve.eps");
    s.delta = num("flow.delta");
    s.delta0 = num("flow.delta0");
    s.eps_star = num("flow.eps_star");
    s.C_monitor = num("flow.C_monitor");
    s.seed = static_cast<std::uint64_t>(integer("seed"));
    return s;
  }

  /// Throws ConfigError naming the first violated constraint.
  void validate() const {
    long dim = integer("grid.dim");
    if (dim != 2 && dim != 3) throw ConfigError("grid.dim must be 2 or 3");
    if (integer("grid.n") < 9) throw ConfigError("grid.n must be >= 9");
    if (!(num("grid.upper") > num("grid.lower"))) throw ConfigError("grid.upper must exceed grid.lower");
    FluidParams f = fluid();
    f.validate();
    solve().validate();
    if (integer("noise.K") < 0) throw ConfigError("noise.K must be >= 0");
    std::string kind = str("noise.kind");
    if (kind != "stream" && kind != "rotation" && kind != "constant")
      throw ConfigError("noise.kind must be stream, rotation or constant");
    if (!(num("noise.margin") > 0.0)) throw ConfigError("noise.margin must be > 0");
    if (integer("noise.refine") < 1) throw ConfigError("noise.refine must be >= 1");
    if (integer("forcing.M") < 0) throw ConfigError("forcing.M must be >= 0");
    std::string init = str("initial.kind");
    if (init != "perturbed" && init != "equilibrium") throw ConfigError("initial.kind must be perturbed or equilibrium");
    double r0 = num("initial.rho0");
    if (!(r0 >= f.rho_lo && r0 <= f.rho_hi)) throw ConfigError("initial.rho0 must lie in [fluid.rho_lo, fluid.rho_hi]");
    std::string engine = str("flow.engine");
    if (engine != "stochastic" && engine != "deterministic")
      throw ConfigError("flow.engine must be stochastic or deterministic");
    if (engine == "deterministic" && integer("noise.K") != 0)
      throw ConfigError("flow.engine = deterministic requires noise.K = 0");
    if (integer("output.snapshot_every") < 1) throw ConfigError("output.snapshot_every must be >= 1");
  }

 private:
  const nlohmann::json& at(const std::string& k) const {
    auto it = values_.find(k);
    if (it == values_.end()) throw ConfigError("config: unknown key " + k);
    return *it;
  }

  void put(const std::string& k, const nlohmann::json& v) {
    static const nlohmann::json known = defaults();
    if (!known.contains(k)) throw ConfigError("config: unknown key " + k);
    values_[k] = v;
    if (k == "solve.q" && !explicit_theta_) values_["solve.theta"] = nullptr;
    if (k == "solve.theta") explicit_theta_ = !v.is_null();
  }

  /// theta defaults to 1/2 - 1/(2q).
  void finalize() {
    if (values_["solve.theta"].is_null()) values_["solve.theta"] = 0.5 - 0.5 / num("solve.q");
  }

  nlohmann::json values_;
  bool explicit_theta_ = false;
};

}  // namespace lagflow
