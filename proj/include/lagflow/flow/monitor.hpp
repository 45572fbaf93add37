/// Stopping monitor for the Lagrangian transform: sigma is the first
/// time the deformation norm sum reaches delta.
#pragma once

#include "lagflow/flow/lagrangian.hpp"

namespace lagflow {

struct MonitorConfig {
  double delta = 0.2;
  double delta0 = 0.2;
  double eps_star = 0.25;
  double p = 4.0;
  double q = 8.0;
  double theta = 0.4375;

  void validate() const {
    if (!(delta > 0.0)) throw ConfigError("monitor: delta must be positive");
    if (delta > delta0) throw ConfigError("monitor: delta must not exceed delta0");
    if (delta0 > eps_star) throw ConfigError("monitor: delta0 must not exceed eps_star");
    if (!(theta > 0.0 && theta < 0.5)) throw ConfigError("monitor: theta must lie in (0, 1/2)");
  }
};

struct MonitorSample {
  double t = 0.0;
  double gradX = 0.0;   // |grad X - I|_{L^inf(0,t; H^{1,q})}
  double Z_theta = 0.0;  // |Z - I|_{H^{theta,p}(0,t; H^{1,q})}
  double J_theta = 0.0;  // |J - 1|_{H^{theta,p}(0,t; H^{1,q})}
  double sum() const { return gradX + Z_theta + J_theta; }
};

class StoppingMonitor {
 public:
  StoppingMonitor(MonitorConfig cfg, double horizon)
      : cfg_(cfg), horizon_(horizon), zacc_(cfg.theta, cfg.p, NormKind::H1q, cfg.q),
        jacc_(cfg.theta, cfg.p, NormKind::H1q, cfg.q), sigma_(horizon) {
    cfg_.validate();
  }

  /// Feeds the next frame. Returns true if the monitor has fired (now or before).
  bool append(const FlowState& s) {
    if (fired_) return true;
    const GridPtr& g = s.gradX.grid_ptr();
    Field dA = s.gradX - Field::identity_matrix(g);
    Field dZ = s.Z - Field::identity_matrix(g);
    Field dJ = s.J - Field(g, 0, 1.0);
    gradx_sup_ = std::max(gradx_sup_, norm(dA, NormKind::H1q, cfg_.q));
    zacc_.append(s.t, dZ);
    jacc_.append(s.t, dJ);
    MonitorSample m{s.t, gradx_sup_, zacc_.value(), jacc_.value()};
    history_.push_back(m);
    if (!s.valid || m.sum() >= cfg_.delta) {
      fired_ = true;
      guard_failed_ = !s.valid;
      sigma_ = s.t;
      fired_index_ = history_.size() - 1;
    }
    return fired_;
  }

  bool fired() const { return fired_; }
  bool guard_failed() const { return guard_failed_; }
  double sigma() const { return sigma_; }
  /// Index of the frame at which the monitor fired (last frame otherwise).
  std::size_t last_index() const { return fired_ ? fired_index_ : history_.size() - 1; }
  const std::vector<MonitorSample>& history() const { return history_; }
  const MonitorSample& current() const { return history_.back(); }
  const MonitorConfig& config() const { return cfg_; }

 private:
  MonitorConfig cfg_;
  double horizon_;
  FractionalTimeNorm zacc_, jacc_;
  double gradx_sup_ = 0.0;
  bool fired_ = false;
  bool guard_failed_ = false;
  double sigma_;
  std::size_t fired_index_ = 0;
  std::vector<MonitorSample> history_;
};

/// Runs the monitor over a precomputed series of flow states.
inline StoppingMonitor stopping_monitor(const std::vector<FlowState>& states, const MonitorConfig& cfg, double horizon) {
  StoppingMonitor m(cfg, horizon);
  for (const auto& s : states)
    if (m.append(s)) break;
  return m;
}

}  // namespace lagflow
