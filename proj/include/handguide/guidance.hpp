#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "handguide/chain.hpp"
#include "handguide/convex_hull.hpp"
#include "handguide/kinematics.hpp"

namespace handguide {

struct HandSample {
  Vec3 position = Vec3::Zero();  // world frame, m
  double timestamp = 0.0;
  bool grasping = false;  // hold gesture
};

struct GuidanceConfig {
  double motion_scale = 1.0;            // K
  double active_zone_scale = 1.5;       // hull inflation about its centroid
  double propagation_tolerance = 1e-6;  // m
  double collinearity_tolerance = 1e-6;

  void validate() const {
    if (!(motion_scale > 0.0)) throw ValidationError("motion_scale must be positive");
    if (!(active_zone_scale >= 1.0)) throw ValidationError("active_zone_scale must be >= 1");
    if (!(propagation_tolerance > 0.0)) throw ValidationError("propagation_tolerance must be positive");
    if (!(collinearity_tolerance > 0.0)) throw ValidationError("collinearity_tolerance must be positive");
  }
};

/// One joint rotation applied during propagation.
struct AppliedRotation {
  std::size_t joint = 0;
  Vec3 origin;  // s
  Vec3 axis;    // a
  double angle = 0.0;
};

struct GuidanceUpdate {
  JointState new_state;
  Vec3 residual = Vec3::Zero();  // hand motion the chain did not reproduce: h_t - r
  std::vector<std::size_t> touched_joints;
  std::vector<AppliedRotation> applied;
  std::vector<double> residual_history;  // |r - h_t| before the first joint and after each visited joint
  bool target_reached = true;            // end-effector drag only
};

// --- per-joint decomposition -------------------------------------------------

/// Projection of `h` onto the plane through `s` perpendicular to unit `a`.
inline Vec3 project_onto_joint_plane(const Vec3& h, const Vec3& s, const Vec3& a) {
  return h - (h - s).dot(a) * a;
}

/// Unit vector from the joint origin to the projected point, or nullopt when
/// the point lies on the joint axis.
inline std::optional<Vec3> projection_vector(const Vec3& p, const Vec3& s, double degenerate_radius = 1e-6) {
  const Vec3 d = p - s;
  const double r = d.norm();
  if (!(r > degenerate_radius)) return std::nullopt;
  return d / r;
}

/// Signed angle from v_prev to v_cur about `a`, in [-pi, pi].
inline double joint_angle_delta(const Vec3& v_prev, const Vec3& v_cur, const Vec3& a) {
  const double c = std::clamp(v_prev.dot(v_cur), -1.0, 1.0);
  const double side = a.dot(v_prev.cross(v_cur));
  const double sign = side > 0.0 ? 1.0 : (side < 0.0 ? -1.0 : 0.0);
  return std::acos(c) * sign;
}

/// theta_prev + K * delta when that stays inside the limits, otherwise
/// theta_prev unchanged (no partial clamping).
inline double apply_angle_update(double theta_prev, double delta, double motion_scale, const JointLimits& limits) {
  const double candidate = theta_prev + motion_scale * delta;
  return limits.contains(candidate) ? candidate : theta_prev;
}

/// Rotates `point` by `angle` about the axis `a` through `s` using the
/// quaternion sandwich q (point - s) q^-1 + s.
inline Vec3 rotate_about_joint(const Vec3& point, const Vec3& s, const Vec3& a, double angle) {
  const Quaternion q = Quaternion::from_axis_angle(a, angle);
  return q.rotate(point - s) + s;
}

// --- propagation -------------------------------------------------------------

/// Converts one frame of hand motion on `start_link` into joint updates.
/// Starts at the joint that moves `start_link` and walks toward the base,
/// offering each joint the motion the previous joints could not absorb.
inline GuidanceUpdate propagate_hand_motion(const KinematicChain& chain, const JointState& state, std::size_t start_link,
                                            const Vec3& h_prev, const Vec3& h_cur, const GuidanceConfig& cfg) {
  check_state_size(chain, state);
  if (start_link >= chain.link_count()) throw InputError("start link index out of range");

  GuidanceUpdate out;
  out.new_state = state;
  Vec3 r = h_prev;
  out.residual_history.push_back((h_cur - r).norm());
  const auto first = KinematicChain::parent_joint(start_link);
  if (first && out.residual_history.back() > cfg.propagation_tolerance) {
    for (std::size_t step = 0; step <= *first; ++step) {
      const std::size_t j = *first - step;
      const JointFrame frame = joint_world_frame(chain, out.new_state, j);
      const Vec3 p_prev = project_onto_joint_plane(r, frame.origin, frame.axis);
      const Vec3 p_cur = project_onto_joint_plane(h_cur, frame.origin, frame.axis);
      const auto v_prev = projection_vector(p_prev, frame.origin, cfg.collinearity_tolerance);
      const auto v_cur = projection_vector(p_cur, frame.origin, cfg.collinearity_tolerance);
      if (v_prev && v_cur) {
        const double delta = joint_angle_delta(*v_prev, *v_cur, frame.axis);
        const double theta_prev = out.new_state.angles[j];
        const double theta_new = apply_angle_update(theta_prev, delta, cfg.motion_scale, chain.joints[j].limits);
        const double applied = theta_new - theta_prev;
        if (applied != 0.0) {
          r = rotate_about_joint(r, frame.origin, frame.axis, applied);
          out.new_state.angles[j] = theta_new;
          out.touched_joints.push_back(j);
          out.applied.push_back({j, frame.origin, frame.axis, applied});
        }
      }
      out.residual_history.push_back((h_cur - r).norm());
      if (out.residual_history.back() <= cfg.propagation_tolerance) break;
    }
  }
  out.residual = h_cur - r;
  return out;
}

// --- active zone -------------------------------------------------------------

/// Inflated world-frame hulls of each link's collision mesh at one state.
struct ActiveZone {
  std::vector<std::optional<ConvexHull>> hulls;  // indexed by link
  double scale = 1.0;
};

/// Local-frame hulls, computed once per chain and posed per state.
inline std::vector<std::optional<ConvexHull>> local_link_hulls(const KinematicChain& chain) {
  std::vector<std::optional<ConvexHull>> out;
  out.reserve(chain.link_count());
  for (const auto& link : chain.links) {
    if (link.collision_mesh && !link.collision_mesh->vertices.empty()) {
      out.emplace_back(ConvexHull::build(link.collision_mesh->vertices));
    } else {
      out.emplace_back(std::nullopt);
    }
  }
  return out;
}

inline ActiveZone build_active_zone(const KinematicChain& chain, const JointState& state, double scale,
                                    const std::vector<std::optional<ConvexHull>>& local_hulls) {
  if (!(scale >= 1.0)) throw ValidationError("active zone scale must be >= 1");
  const LinkPoses poses = forward_kinematics(chain, state);
  ActiveZone zone;
  zone.scale = scale;
  zone.hulls.reserve(chain.link_count());
  for (std::size_t i = 0; i < chain.link_count(); ++i) {
    if (i < local_hulls.size() && local_hulls[i]) {
      zone.hulls.emplace_back(local_hulls[i]->transformed(poses.links[i]).scaled(scale));
    } else {
      zone.hulls.emplace_back(std::nullopt);
    }
  }
  return zone;
}

/// Links without a collision mesh get no zone.
inline ActiveZone build_active_zone(const KinematicChain& chain, const JointState& state, double scale) {
  return build_active_zone(chain, state, scale, local_link_hulls(chain));
}

/// Innermost (closest to the tip) link whose zone contains `p`.
inline std::optional<std::size_t> active_link(const ActiveZone& zone, const Vec3& p) {
  for (std::size_t k = zone.hulls.size(); k-- > 0;) {
    if (zone.hulls[k] && zone.hulls[k]->contains(p)) return k;
  }
  return std::nullopt;
}

// --- end-effector drag -------------------------------------------------------

struct IkOptions {
  double damping = 0.05;
  int max_iterations = 200;
  double position_tolerance = 1e-6;
  double orientation_tolerance = 1e-6;
  double max_step = 0.25;  // rad, per iteration
  /// Orientation is tracked only when the chain has at least this many
  /// joints; shorter chains solve for tip position alone.
  std::size_t orientation_min_joints = 6;
};

namespace detail {

struct IkAttempt {
  JointState state;
  Vec3 position_error = Vec3::Zero();
  double orientation_error = 0.0;
  bool converged = false;
};

inline Vec3 rotation_error(const Quaternion& target, const Quaternion& current) {
  const Eigen::AngleAxisd aa(target.matrix() * current.matrix().transpose());
  return aa.angle() * aa.axis();
}

inline IkAttempt damped_least_squares(const KinematicChain& chain, JointState seed, const RigidTransform& target,
                                      bool with_orientation, const IkOptions& opt) {
  const std::size_t n = chain.joint_count();
  const int rows = with_orientation ? 6 : 3;
  IkAttempt out;
  for (int iter = 0;; ++iter) {
    const LinkPoses poses = forward_kinematics(chain, seed);
    const Vec3 tip = poses.end_effector.translation;
    const Vec3 e_pos = target.translation - tip;
    const Vec3 e_rot = with_orientation ? rotation_error(target.rotation, poses.end_effector.rotation) : Vec3::Zero();
    out.state = seed;
    out.position_error = e_pos;
    out.orientation_error = e_rot.norm();
    if (e_pos.norm() <= opt.position_tolerance && e_rot.norm() <= opt.orientation_tolerance) {
      out.converged = true;
      return out;
    }
    if (iter >= opt.max_iterations) return out;

    Eigen::MatrixXd jac(rows, static_cast<Eigen::Index>(n));
    Eigen::VectorXd err(rows);
    err.head<3>() = e_pos;
    if (with_orientation) err.tail<3>() = e_rot;
    for (std::size_t j = 0; j < n; ++j) {
      const JointFrame f = joint_world_frame(chain, poses, j);
      jac.block<3, 1>(0, static_cast<Eigen::Index>(j)) = f.axis.cross(tip - f.origin);
      if (with_orientation) jac.block<3, 1>(3, static_cast<Eigen::Index>(j)) = f.axis;
    }
    const Eigen::MatrixXd jjt =
        jac * jac.transpose() + opt.damping * opt.damping * Eigen::MatrixXd::Identity(rows, rows);
    Eigen::VectorXd step = jac.transpose() * jjt.ldlt().solve(err);
    if (step.norm() > opt.max_step) step *= opt.max_step / step.norm();
    for (std::size_t j = 0; j < n; ++j) {
      const auto& lim = chain.joints[j].limits;
      seed.angles[j] = std::clamp(seed.angles[j] + step(static_cast<Eigen::Index>(j)), lim.lower, lim.upper);
    }
  }
}

inline double total_change(const JointState& a, const JointState& b) {
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) sum += std::abs(a.angles[j] - b.angles[j]);
  return sum;
}

/// Seeds derived from `base`: each joint mirrored (theta -> -theta) and each
/// joint offset by a quarter and a half turn, clamped to the limits.
inline std::vector<JointState> ik_seeds(const KinematicChain& chain, const JointState& base) {
  std::vector<JointState> out;
  for (std::size_t j = 0; j < chain.joint_count(); ++j) {
    const auto& lim = chain.joints[j].limits;
    for (double v : {-base.angles[j], base.angles[j] + M_PI / 2, base.angles[j] - M_PI / 2,
                     base.angles[j] + (base.angles[j] > 0.0 ? -M_PI : M_PI)}) {
      JointState s = base;
      s.angles[j] = std::clamp(v, lim.lower, lim.upper);
      if (s.angles[j] != base.angles[j]) out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace detail

/// Moves the end effector to `target` with damped least squares. The solver
/// starts at the current state and at single-joint variations of it, then
/// once more from the mirror seeds of the best solution found, since a local
/// solver only finds the branch whose basin it starts in. Among converged
/// solutions the one with the smallest sum |theta_new - theta_prev| wins. On
/// failure the state is unchanged and `residual` carries the remaining
/// position error of the attempt from the current state.
inline GuidanceUpdate drag_end_effector(const KinematicChain& chain, const JointState& state,
                                        const RigidTransform& target, const IkOptions& opt = {}) {
  check_state_size(chain, state);
  const bool with_orientation = chain.joint_count() >= opt.orientation_min_joints;

  std::optional<detail::IkAttempt> best;
  auto consider = [&](const JointState& seed) {
    auto attempt = detail::damped_least_squares(chain, seed, target, with_orientation, opt);
    if (attempt.converged &&
        (!best || detail::total_change(attempt.state, state) < detail::total_change(best->state, state))) {
      best = attempt;
    }
    return attempt;
  };
  const detail::IkAttempt from_current = consider(state);
  if (!(best && detail::total_change(best->state, state) == 0.0)) {
    for (const auto& seed : detail::ik_seeds(chain, state)) consider(seed);
    if (best) {
      const JointState found = best->state;
      for (const auto& seed : detail::ik_seeds(chain, found)) consider(seed);
    }
  }

  GuidanceUpdate out;
  if (best) {
    out.new_state = best->state;
    for (std::size_t j = 0; j < state.size(); ++j) {
      if (best->state.angles[j] != state.angles[j]) out.touched_joints.push_back(j);
    }
  } else {
    out.new_state = state;
    out.residual = from_current.position_error;
    out.target_reached = false;
  }
  out.new_state.timestamp = state.timestamp;
  return out;
}

}  // namespace handguide
