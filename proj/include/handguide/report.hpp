#pragma once

#include <iomanip>
#include <ostream>
#include <vector>

#include "handguide/controller.hpp"
#include "handguide/registration.hpp"

namespace handguide {

/// Sweep CSV: one row per perturbation, then a summary block with the
/// mean/min/max/sigma of the raw seeds and of the converged ICP runs.
inline void write_sweep_csv(std::ostream& out, const SweepReport& report, const SweepOptions& opt) {
  const auto steps = static_cast<int>(2 * std::lround(opt.translation_half_extent / opt.translation_step) + 1);
  out << "# yaw step " << opt.yaw_step_deg << " deg; translation grid inclusive of both ends, " << steps
      << " steps per axis over [" << -opt.translation_half_extent << ", " << opt.translation_half_extent
      << "] m; rms in m\n";
  out << "kind,dx,dy,dz,yaw_deg,rms,iterations,converged\n";
  out << std::setprecision(10);
  for (const auto& e : report.entries) {
    out << e.kind << ',' << e.offset.x() << ',' << e.offset.y() << ',' << e.offset.z() << ',' << e.yaw_deg << ','
        << e.rms << ',' << e.iterations << ',' << (e.converged ? 1 : 0) << '\n';
  }
  out << '\n' << "group,mean,min,max,sigma,count\n";
  auto row = [&](const char* name, const SweepStats& s) {
    out << name << ',' << s.mean << ',' << s.min << ',' << s.max << ',' << s.sigma << ',' << s.count << '\n';
  };
  row("seed", report.seed);
  row("icp_all", report.icp_all);
  row("icp_rotation", report.icp_rotation);
  row("icp_translation", report.icp_translation);
}

/// Command-vs-state trace: t, cmd_1..cmd_n, state_1..state_n.
struct TraceRow {
  double t = 0.0;
  std::vector<double> command;
  std::vector<double> state;
};

inline void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  if (rows.empty()) return;
  out << 't';
  for (std::size_t j = 0; j < rows.front().command.size(); ++j) out << ",cmd_" << j + 1;
  for (std::size_t j = 0; j < rows.front().state.size(); ++j) out << ",state_" << j + 1;
  out << '\n' << std::setprecision(12);
  for (const auto& r : rows) {
    out << r.t;
    for (double v : r.command) out << ',' << v;
    for (double v : r.state) out << ',' << v;
    out << '\n';
  }
}

}  // namespace handguide
