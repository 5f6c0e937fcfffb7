#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "handguide/guidance.hpp"

using namespace handguide;

namespace {

constexpr double kL1 = 1.0, kL2 = 0.7;

// Both elbow solutions of the planar two-link arm, theta1 wrapped to (-pi, pi].
std::vector<std::array<double, 2>> elbow_solutions(double x, double y) {
  const double c2 = std::clamp((x * x + y * y - kL1 * kL1 - kL2 * kL2) / (2 * kL1 * kL2), -1.0, 1.0);
  std::vector<std::array<double, 2>> out;
  for (double sign : {1.0, -1.0}) {
    const double t2 = sign * std::acos(c2);
    const double t1 = std::remainder(std::atan2(y, x) - std::atan2(kL2 * std::sin(t2), kL1 + kL2 * std::cos(t2)),
                                     2 * M_PI);
    out.push_back({t1, t2});
  }
  return out;
}

RigidTransform at(const Vec3& p) { return RigidTransform{Quaternion::identity(), p}; }

}  // namespace

TEST(DragEndEffector, CurrentPoseIsAFixedPoint) {
  const auto& c = fixtures::planar2();
  const JointState s{{0.3, -0.8}};
  const auto u = drag_end_effector(c, s, forward_kinematics(c, s).end_effector);
  EXPECT_EQ(u.new_state.angles, s.angles);
  EXPECT_TRUE(u.target_reached);
  EXPECT_TRUE(u.touched_joints.empty());
}

TEST(DragEndEffector, PicksElbowWithSmallerTotalChange) {
  const auto& c = fixtures::planar2();
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> radius(0.35, 1.65), angle(-M_PI, M_PI);
  int worse = 0;
  for (int i = 0; i < 1000; ++i) {
    const JointState s = fixtures::random_state(c, rng, 0.05);
    const double r = radius(rng), phi = angle(rng);
    const Vec3 target(r * std::cos(phi), r * std::sin(phi), 0.0);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& sol : elbow_solutions(target.x(), target.y())) {
      best = std::min(best, std::abs(sol[0] - s.angles[0]) + std::abs(sol[1] - s.angles[1]));
    }
    const auto u = drag_end_effector(c, s, at(target));
    ASSERT_TRUE(u.target_reached) << "target " << target.transpose();
    EXPECT_LE((forward_kinematics(c, u.new_state).end_effector.translation - target).norm(), 1e-6);
    const double got = std::abs(u.new_state.angles[0] - s.angles[0]) + std::abs(u.new_state.angles[1] - s.angles[1]);
    if (got > best + 1e-6) ++worse;
  }
  EXPECT_EQ(worse, 0);
}

TEST(DragEndEffector, UnreachableTargetLeavesStateAndReportsError) {
  const auto& c = fixtures::planar2();
  const JointState s{{0.2, 0.4}};
  const Vec3 target(2.5, 0.0, 0.0);
  const auto u = drag_end_effector(c, s, at(target));
  EXPECT_FALSE(u.target_reached);
  EXPECT_EQ(u.new_state.angles, s.angles);
  // The residual is the remaining position error of the attempt, which can
  // never beat the distance to the reach circle of radius l1 + l2.
  EXPECT_GE(u.residual.norm(), target.norm() - (kL1 + kL2) - 1e-9);
}

TEST(DragEndEffector, SixJointChainTracksPose) {
  const auto& c = fixtures::kr5();
  std::mt19937_64 rng(42);
  int reached = 0;
  for (int i = 0; i < 50; ++i) {
    const JointState s = fixtures::random_state(c, rng, 0.3);
    JointState goal = s;
    for (auto& a : goal.angles) a += std::uniform_real_distribution<double>(-0.15, 0.15)(rng);
    if (!within_limits(c, goal)) continue;
    const auto target = forward_kinematics(c, goal).end_effector;
    const auto u = drag_end_effector(c, s, target);
    if (!u.target_reached) continue;
    ++reached;
    const auto got = forward_kinematics(c, u.new_state).end_effector;
    EXPECT_LE((got.translation - target.translation).norm(), 1e-6);
    EXPECT_LE(rotation_angle_between(got.rotation, target.rotation), 1e-5);
    EXPECT_TRUE(within_limits(c, u.new_state));
  }
  EXPECT_GE(reached, 45);
}
