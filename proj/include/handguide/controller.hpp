#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "handguide/chain.hpp"
#include "handguide/errors.hpp"

namespace handguide {

/// Time-optimal rest-to-rest motion of one axis under velocity and
/// acceleration bounds, planned from an arbitrary initial velocity.
/// Phases: accelerate toward the peak, cruise, decelerate to rest.
class TrapezoidProfile {
 public:
  struct Phase {
    double duration = 0.0;
    double acceleration = 0.0;
  };

  TrapezoidProfile() = default;

  TrapezoidProfile(double position, double velocity, double target, double max_velocity, double max_acceleration)
      : start_(position), v0_(velocity), target_(target) {
    const double a = max_acceleration;
    const double d = target - position;
    const double stop = velocity * std::abs(velocity) / (2.0 * a);  // signed braking distance
    const double gap = d - stop;
    const double tiny = 1e-12 * std::max(1.0, std::abs(d));

    if (std::abs(gap) <= tiny) {
      // Braking alone lands on the target.
      phases_[0] = {std::abs(velocity) / a, velocity > 0.0 ? -a : a};
      return;
    }
    const double dir = gap > 0.0 ? 1.0 : -1.0;
    const double v = dir * velocity;  // initial speed along the travel direction
    const double dist = dir * d;
    double peak = std::sqrt(a * dist + 0.5 * v * v);
    double cruise = 0.0;
    if (peak > max_velocity) {
      peak = max_velocity;
      const double accel_dist = (peak * peak - v * v) / (2.0 * a);
      const double decel_dist = peak * peak / (2.0 * a);
      cruise = std::max(0.0, (dist - accel_dist - decel_dist) / peak);
    }
    phases_[0] = {std::max(0.0, (peak - v) / a), dir * a};
    phases_[1] = {cruise, 0.0};
    phases_[2] = {peak / a, -dir * a};
  }

  double duration() const { return phases_[0].duration + phases_[1].duration + phases_[2].duration; }

  /// Position and velocity `t` seconds after planning. At or beyond the end
  /// the target is returned exactly with zero velocity.
  std::pair<double, double> sample(double t) const {
    if (t >= duration()) return {target_, 0.0};
    double x = start_, v = v0_;
    for (const auto& ph : phases_) {
      const double dt = std::min(t, ph.duration);
      x += v * dt + 0.5 * ph.acceleration * dt * dt;
      v += ph.acceleration * dt;
      t -= dt;
      if (t <= 0.0) break;
    }
    return {x, v};
  }

  const std::array<Phase, 3>& phases() const { return phases_; }

 private:
  double start_ = 0.0;
  double v0_ = 0.0;
  double target_ = 0.0;
  std::array<Phase, 3> phases_{};
};

struct ControllerState {
  JointState current;
  std::vector<double> velocity;
  JointState target;
  std::vector<double> max_velocity;
  std::vector<double> max_acceleration;
  std::vector<JointLimits> limits;
  double time = 0.0;  // controller clock, s

  bool at_rest() const {
    for (std::size_t j = 0; j < velocity.size(); ++j) {
      if (velocity[j] != 0.0 || current.angles[j] != target.angles[j]) return false;
    }
    return true;
  }
};

/// Idle controller holding `start`, with per-joint limits from the chain.
inline ControllerState make_controller(const KinematicChain& chain, const JointState& start) {
  if (!within_limits(chain, start)) throw ValidationError("controller start state is outside the joint limits");
  ControllerState c;
  c.current = start;
  c.target = start;
  c.velocity.assign(chain.joint_count(), 0.0);
  for (const auto& j : chain.joints) {
    c.max_velocity.push_back(j.max_velocity);
    c.max_acceleration.push_back(j.max_acceleration);
    c.limits.push_back(j.limits);
  }
  c.time = start.timestamp;
  return c;
}

/// Replaces the target. The next tick replans every joint from its current
/// position and velocity.
inline ControllerState set_target(ControllerState ctrl, const JointState& target) {
  if (target.size() != ctrl.current.size()) throw InputError("target has the wrong number of joints");
  for (std::size_t j = 0; j < target.size(); ++j) {
    if (!std::isfinite(target.angles[j]) || !ctrl.limits[j].contains(target.angles[j])) {
      throw ValidationError("target for joint " + std::to_string(j) + " is outside its limits");
    }
  }
  ctrl.target = target;
  return ctrl;
}

/// Advances all joints by `dt` along their profiles.
inline ControllerState tick(ControllerState ctrl, double dt) {
  if (!(dt > 0.0)) throw InputError("tick dt must be positive");
  for (std::size_t j = 0; j < ctrl.current.size(); ++j) {
    double& x = ctrl.current.angles[j];
    double& v = ctrl.velocity[j];
    const double goal = ctrl.target.angles[j];
    if (x == goal && v == 0.0) continue;
    const TrapezoidProfile profile(x, v, goal, ctrl.max_velocity[j], ctrl.max_acceleration[j]);
    const auto [nx, nv] = profile.sample(dt);
    x = std::clamp(nx, ctrl.limits[j].lower, ctrl.limits[j].upper);
    v = nv;
  }
  ctrl.time += dt;
  ctrl.current.timestamp = ctrl.time;
  return ctrl;
}

// --- trajectories ------------------------------------------------------------

struct Trajectory {
  std::vector<JointState> samples;  // timestamps strictly increasing

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
};

inline Trajectory record(Trajectory traj, double t, JointState state) {
  if (!traj.empty()) {
    if (!(t > traj.samples.back().timestamp)) throw InputError("trajectory timestamps must increase");
    if (state.size() != traj.samples.front().size()) throw InputError("trajectory joint count changed");
  }
  state.timestamp = t;
  traj.samples.push_back(std::move(state));
  return traj;
}

/// Feeds one trajectory point per controller tick at `rate` Hz, then keeps
/// ticking until the controller rests on the final point (or `settle_limit`
/// seconds pass). The output has one state per tick.
inline std::vector<JointState> replay(const Trajectory& traj, ControllerState ctrl, double rate,
                                      double settle_limit = 60.0) {
  if (traj.empty()) throw InputError("cannot replay an empty trajectory");
  if (!(rate > 0.0)) throw InputError("replay rate must be positive");
  const double dt = 1.0 / rate;
  std::vector<JointState> out;
  out.reserve(traj.size());
  for (const auto& point : traj.samples) {
    ctrl = set_target(std::move(ctrl), point);
    ctrl = tick(std::move(ctrl), dt);
    out.push_back(ctrl.current);
  }
  const auto settle_ticks = static_cast<std::size_t>(std::ceil(settle_limit * rate));
  for (std::size_t k = 0; k < settle_ticks && !ctrl.at_rest(); ++k) {
    ctrl = tick(std::move(ctrl), dt);
    out.push_back(ctrl.current);
  }
  return out;
}

}  // namespace handguide
