#pragma once

#include <memory>
#include <vector>

#include "handguide/report.hpp"
#include "handguide/session.hpp"

namespace handguide {

struct GuideRun {
  std::vector<JointState> commands;  // one per hand sample that moved the chain
  std::vector<TraceRow> trace;       // one per controller tick
  std::vector<std::string> warnings;
};

/// Batch form of a link-guidance session: the hand stream is fed through the
/// same message path as the live service, then the clock runs on for
/// `settle_time` seconds so the state can catch up with the last command.
inline GuideRun run_guide(std::shared_ptr<const KinematicChain> chain, const std::vector<HandSample>& hands,
                          const SessionOptions& options, double settle_time = 2.0) {
  SessionOptions opt = options;
  opt.message_clock = true;
  Session session(opt);
  session.load_chain(std::move(chain));
  session.handle({{"type", "mode"}, {"value", "link_guidance"}});

  GuideRun run;
  JointState command = session.controller().target;
  auto consume = [&](const std::vector<nlohmann::json>& msgs) {
    for (const auto& m : msgs) {
      const auto type = m.at("type").get<std::string>();
      if (type == "target") {
        command = joint_state_from_json(m);
        run.commands.push_back(command);
      } else if (type == "state") {
        run.trace.push_back({m.at("t").get<double>(), command.angles,
                             m.at("angles").get<std::vector<double>>()});
      } else if (type == "error") {
        run.warnings.push_back(m.at("msg").get<std::string>());
      }
    }
  };
  for (const auto& h : hands) {
    nlohmann::json msg = to_json(h);
    msg["type"] = "hand";
    consume(session.handle(msg));
  }
  const double end = (hands.empty() ? 0.0 : hands.back().timestamp) + settle_time;
  consume(session.advance_clock(end));
  return run;
}

}  // namespace handguide
