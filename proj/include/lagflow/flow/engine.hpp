/// Flow engines used by the solution map: the factorized stochastic
/// flow and a noise-free path that never touches noise objects.
#pragma once

#include "lagflow/flow/monitor.hpp"

#include <memory>

namespace lagflow {

class FlowEngine {
 public:
  virtual ~FlowEngine() = default;
  /// Flow states at every frame of the drift series.
  virtual std::vector<FlowState> states(const TimeSeries& ubar) const = 0;
  virtual bool deterministic() const = 0;
};

/// X = psi o Y with psi tabulated once per Brownian path and shared by every
/// call (one call per Picard iterate).
class StochasticFlowEngine final : public FlowEngine {
 public:
  StochasticFlowEngine(const TransportField& Q, const BrownianBundle& W, GridPtr labels, double eps_star,
                       double margin = 0.125, int refine = 2)
      : table_(std::make_shared<NoiseFlowTable>(Q, W, std::move(labels), margin, refine)), eps_star_(eps_star) {}

  std::vector<FlowState> states(const TimeSeries& ubar) const override {
    return compose_flow(*table_, integrate_label_flow(ubar, *table_), eps_star_);
  }
  bool deterministic() const override { return false; }
  const NoiseFlowTable& table() const { return *table_; }

 private:
  std::shared_ptr<const NoiseFlowTable> table_;
  double eps_star_;
};

/// X = y + int u ds and grad X = I + int grad u ds by the trapezoidal rule.
class DeterministicFlowEngine final : public FlowEngine {
 public:
  explicit DeterministicFlowEngine(double eps_star) : eps_star_(eps_star) {}

  std::vector<FlowState> states(const TimeSeries& ubar) const override {
    const GridPtr& g = ubar.frames[0].grid_ptr();
    Field X = Field::vector(g, [](const Vec& y) { return y; });
    Field gX = Field::identity_matrix(g);
    std::vector<FlowState> out;
    out.push_back(make_flow_state(0.0, X, gX, eps_star_));
    Field gu0 = differentiate(ubar.frames[0], 1);
    for (std::size_t n = 0; n + 1 < ubar.size(); ++n) {
      double dt = ubar.times[n + 1] - ubar.times[n];
      Field gu1 = differentiate(ubar.frames[n + 1], 1);
      X.axpy(0.5 * dt, ubar.frames[n]).axpy(0.5 * dt, ubar.frames[n + 1]);
      gX.axpy(0.5 * dt, gu0).axpy(0.5 * dt, gu1);
      out.push_back(make_flow_state(ubar.times[n + 1], X, gX, eps_star_));
      gu0 = std::move(gu1);
    }
    return out;
  }
  bool deterministic() const override { return true; }

 private:
  double eps_star_;
};

}  // namespace lagflow
