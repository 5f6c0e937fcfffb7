#pragma once

#include <string>
#include <vector>

#include "handguide/chain.hpp"

namespace handguide {

struct LinkPoses {
  std::vector<RigidTransform> links;  // world pose of each link, base first
  RigidTransform end_effector;
};

inline void check_state_size(const KinematicChain& chain, const JointState& state) {
  if (state.size() != chain.joint_count()) {
    throw InputError("joint state has " + std::to_string(state.size()) + " angles, chain has " +
                     std::to_string(chain.joint_count()) + " joints");
  }
}

/// Local transform contributed by joint `j` at angle `angle`:
/// origin followed by the rotation about the joint axis.
inline RigidTransform joint_transform(const Joint& joint, double angle) {
  return joint.origin * RigidTransform{Quaternion::from_axis_angle(joint.axis, angle), Vec3::Zero()};
}

inline LinkPoses forward_kinematics(const KinematicChain& chain, const JointState& state) {
  check_state_size(chain, state);
  LinkPoses out;
  out.links.reserve(chain.link_count());
  out.links.push_back(RigidTransform::identity());
  for (std::size_t j = 0; j < chain.joint_count(); ++j) {
    out.links.push_back(out.links.back() * joint_transform(chain.joints[j], state.angles[j]));
  }
  out.end_effector = out.links.back() * chain.end_effector_offset;
  return out;
}

struct JointFrame {
  Vec3 origin;  // s
  Vec3 axis;    // a, unit
};

/// World-frame joint origin and rotation axis given the poses of a state.
inline JointFrame joint_world_frame(const KinematicChain& chain, const LinkPoses& poses, std::size_t j) {
  if (j >= chain.joint_count()) throw InputError("joint index " + std::to_string(j) + " out of range");
  const RigidTransform frame = poses.links[j] * chain.joints[j].origin;
  return {frame.translation, frame.rotation.rotate(chain.joints[j].axis).normalized()};
}

inline JointFrame joint_world_frame(const KinematicChain& chain, const JointState& state, std::size_t j) {
  if (j >= chain.joint_count()) throw InputError("joint index " + std::to_string(j) + " out of range");
  return joint_world_frame(chain, forward_kinematics(chain, state), j);
}

}  // namespace handguide
