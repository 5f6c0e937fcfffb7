#pragma once

#include <cstdint>
#include <random>

#include "handguide/registration.hpp"

namespace handguide {

/// Synthetic referencing cell: the chain's collision surfaces posed at a
/// known state and base pose, plus optional noise, a table slab next to the
/// robot and uniform clutter.
struct SceneSpec {
  JointState state;
  RigidTransform robot_pose;
  std::size_t robot_samples = 16000;
  double noise_sigma = 0.0;  // m, isotropic Gaussian
  bool table = true;
  std::size_t table_samples = 4000;
  std::size_t clutter_points = 0;
  double clutter_half_extent = 2.0;  // clutter box half-size around the robot base, m
  std::uint64_t rng_seed = 7;
};

/// Table slab in the robot base frame, in front of the robot.
inline TriangleMesh table_mesh() { return box_mesh(Vec3(0.45, -0.7, 0.0), Vec3(1.25, 0.7, 0.32)); }

inline PointCloud synthetic_scene(const KinematicChain& chain, const SceneSpec& spec) {
  PointCloud robot = sample_mesh(posed_collision_mesh(chain, spec.state), spec.robot_samples, spec.rng_seed);
  PointCloud scene;
  for (const auto& p : robot.points) scene.points.push_back(spec.robot_pose.apply(p));
  if (spec.table) {
    const PointCloud table = sample_mesh(table_mesh(), spec.table_samples, spec.rng_seed + 1);
    for (const auto& p : table.points) scene.points.push_back(spec.robot_pose.apply(p));
  }
  std::mt19937_64 rng(spec.rng_seed + 2);
  if (spec.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (auto& p : scene.points) p += Vec3(noise(rng), noise(rng), noise(rng));
  }
  std::uniform_real_distribution<double> box(-spec.clutter_half_extent, spec.clutter_half_extent);
  for (std::size_t i = 0; i < spec.clutter_points; ++i) {
    scene.points.push_back(spec.robot_pose.apply(Vec3(box(rng), box(rng), std::abs(box(rng)))));
  }
  return scene;
}

}  // namespace handguide
