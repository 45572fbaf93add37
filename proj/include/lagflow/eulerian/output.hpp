/// summary.json, diagnostics.csv and snapshot files of one run, plus
/// snapshot reload.
#pragma once

#include "lagflow/eulerian/reconstruct.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace lagflow {

struct RunRecord {
  const SolutionBundle* bundle = nullptr;
  const std::vector<MovingDomainSnapshot>* snapshots = nullptr;
  const KinematicResidual* kinematic = nullptr;  // may be null
  nlohmann::json config;                          // effective configuration echo
  nlohmann::json metadata = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string status = "ok";
  std::vector<std::size_t> snapshot_frames;  // frames written as snapshot_<k>.csv
};

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw Error("output: cannot open " + p.string());
  os << std::setprecision(17);
  return os;
}

inline void close_out(std::ofstream& os, const std::filesystem::path& p) {
  os.flush();
  if (!os) throw Error("output: write failed for " + p.string());
}

}  // namespace detail

inline nlohmann::json summary_json(const RunRecord& rec) {
  const SolutionBundle& b = *rec.bundle;
  nlohmann::json j;
  j["seed"] = rec.seed;
  j["config"] = rec.config;
  j["tau"] = b.tau;
  j["kappa"] = b.kappa;
  j["iterations"] = b.iterations;
  j["min_density"] = b.min_density;
  j["energy_initial"] = b.energy.empty() ? 0.0 : b.energy.front().energy;
  j["energy_final"] = b.energy.empty() ? 0.0 : b.energy.back().energy;
  nlohmann::json mon = nlohmann::json::object();
  if (!b.monitor.empty()) {
    std::size_t last = std::min(b.monitor.size(), b.states.size()) - 1;
    const MonitorSample& m = b.monitor[last];
    mon = {{"t", m.t}, {"normGradXminusI", m.gradX}, {"normZminusI_theta", m.Z_theta},
           {"normJminus1_theta", m.J_theta}, {"sum", m.sum()}};
  }
  j["monitor_norms_at_tau"] = mon;
  j["status"] = rec.status;
  j["metadata"] = rec.metadata;
  j["monitor_fired"] = b.fired;
  j["density_below_half_floor"] = b.density_flag;
  j["compatibility_residual"] = b.compatibility_residual;
  j["transformed_residual"] = b.transformed_residual;
  j["picard_differences"] = b.differences;
  if (rec.kinematic) j["kinematic_residual_max"] = rec.kinematic->max;
  return j;
}

inline void write_snapshot(const MovingDomainSnapshot& s, const std::filesystem::path& p) {
  const Grid& g = s.X.grid();
  const int d = g.dim();
  auto os = detail::open_out(p);
  for (int a = 0; a < d; ++a) os << "label_y" << a + 1 << ',';
  for (int a = 0; a < d; ++a) os << 'x' << a + 1 << ',';
  os << "rho,";
  for (int a = 0; a < d; ++a) os << 'u' << a + 1 << ',';
  os << "J\n";
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    Vec y = g.coord(n);
    for (int a = 0; a < d; ++a) os << y[a] << ',';
    for (int a = 0; a < d; ++a) os << s.X(n, a) << ',';
    os << s.rho(n, 0) << ',';
    for (int a = 0; a < d; ++a) os << s.u(n, a) << ',';
    os << s.J(n, 0) << '\n';
  }
  detail::close_out(os, p);
}

/// Columns of a snapshot file, keyed by header name.
struct SnapshotTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<double> column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error("snapshot: no column " + name);
    auto c = static_cast<std::size_t>(it - header.begin());
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
  }
};

inline SnapshotTable load_snapshot(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw Error("snapshot: cannot open " + p.string());
  SnapshotTable t;
  std::string line;
  if (!std::getline(is, line)) throw Error("snapshot: empty file " + p.string());
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) t.header.push_back(cell);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::vector<double> row;
    for (std::string cell; std::getline(ls, cell, ',');) row.push_back(std::stod(cell));
    if (row.size() != t.header.size()) throw Error("snapshot: ragged row in " + p.string());
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline void write_outputs(const RunRecord& rec, const std::filesystem::path& dir) {
  const SolutionBundle& b = *rec.bundle;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("output: cannot create " + dir.string() + ": " + ec.message());

  {
    auto p = dir / "summary.json";
    std::ofstream os(p);
    if (!os) throw Error("output: cannot open " + p.string());
    os << summary_json(rec).dump(2) << '\n';
    detail::close_out(os, p);
  }
  {
    auto p = dir / "diagnostics.csv";
    auto os = detail::open_out(p);
    os << "t,normGradXminusI,normZminusI_theta,normJminus1_theta,J_min,J_max,energy,dissipation,"
          "kinematic_residual_max\n";
    for (std::size_t n = 0; n < b.states.size(); ++n) {
      const FlowState& s = b.states[n];
      double jmin = std::numeric_limits<double>::infinity(), jmax = -jmin;
      for (std::size_t i = 0; i < s.J.node_count(); ++i) {
        jmin = std::min(jmin, s.J(i, 0));
        jmax = std::max(jmax, s.J(i, 0));
      }
      const MonitorSample m = n < b.monitor.size() ? b.monitor[n] : MonitorSample{};
      double kin = 0.0;
      if (rec.kinematic && n > 0 && n - 1 < rec.kinematic->per_step.size()) kin = rec.kinematic->per_step[n - 1];
      os << s.t << ',' << m.gradX << ',' << m.Z_theta << ',' << m.J_theta << ',' << jmin << ',' << jmax << ','
         << b.energy[n].energy << ',' << b.energy[n].dissipation << ',' << kin << '\n';
    }
    detail::close_out(os, p);
  }
  if (rec.snapshots)
    for (std::size_t k : rec.snapshot_frames)
      if (k < rec.snapshots->size()) write_snapshot((*rec.snapshots)[k], dir / ("snapshot_" + std::to_string(k) + ".csv"));
}

}  // namespace lagflow
