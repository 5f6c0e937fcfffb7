#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "handguide/geometry.hpp"

using namespace handguide;

namespace {

// Rodrigues' formula as an independent rotation oracle.
Mat3 rodrigues(const Vec3& axis, double angle) {
  const Vec3 k = axis.normalized();
  Mat3 kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Mat3::Identity() + std::sin(angle) * kx + (1 - std::cos(angle)) * kx * kx;
}

}  // namespace

TEST(Quaternion, AxisAngleIsUnit) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ang(-10, 10);
  for (int i = 0; i < 1000; ++i) {
    const auto q = Quaternion::from_axis_angle(fixtures::random_unit(rng) * 3.7, ang(rng));
    EXPECT_NEAR(q.norm(), 1.0, 1e-12);
  }
}

TEST(Quaternion, RotateMatchesRodrigues) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 axis = fixtures::random_unit(rng);
    const double a = ang(rng);
    const Vec3 p = fixtures::random_unit(rng) * 2.0;
    const Vec3 got = Quaternion::from_axis_angle(axis, a).rotate(p);
    EXPECT_LT((got - rodrigues(axis, a) * p).norm(), 1e-12);
  }
}

TEST(Quaternion, QuarterTurnAboutZ) {
  const Vec3 r = Quaternion::from_axis_angle(Vec3::UnitZ(), M_PI / 2).rotate(Vec3::UnitX());
  EXPECT_NEAR(r.x(), 0.0, 1e-15);
  EXPECT_NEAR(r.y(), 1.0, 1e-15);
}

TEST(Quaternion, ProductComposesRotations) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto a = Quaternion::from_axis_angle(fixtures::random_unit(rng), 1.1 * i);
    const auto b = Quaternion::from_axis_angle(fixtures::random_unit(rng), -0.3 * i);
    EXPECT_LT(((a * b).matrix() - a.matrix() * b.matrix()).norm(), 1e-12);
  }
}

TEST(Quaternion, MatrixRoundTrip) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 200; ++i) {
    const auto q = Quaternion::from_axis_angle(fixtures::random_unit(rng), 0.05 * i - 5);
    const auto back = Quaternion::from_matrix(q.matrix());
    EXPECT_LT(rotation_angle_between(q, back), 1e-9);
  }
}

TEST(Quaternion, RpyIsFixedAxisXYZ) {
  const double r = 0.3, p = -0.7, y = 1.2;
  const Mat3 expected = rodrigues(Vec3::UnitZ(), y) * rodrigues(Vec3::UnitY(), p) * rodrigues(Vec3::UnitX(), r);
  EXPECT_LT((Quaternion::from_rpy(r, p, y).matrix() - expected).norm(), 1e-12);
}

TEST(Quaternion, ZeroNormRejected) { EXPECT_ANY_THROW((Quaternion{0, 0, 0, 0}.normalized())); }

TEST(RigidTransform, InverseComposesToIdentity) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 500; ++i) {
    RigidTransform t{Quaternion::from_axis_angle(fixtures::random_unit(rng), u(rng)), Vec3(u(rng), u(rng), u(rng))};
    const RigidTransform id = t.inverse() * t;
    EXPECT_LT(id.translation.norm(), 1e-9);
    EXPECT_LT((id.rotation.matrix() - Mat3::Identity()).norm(), 1e-9);
  }
}

TEST(RigidTransform, CompositionIsAssociative) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-3, 3);
  auto random_tf = [&] {
    return RigidTransform{Quaternion::from_axis_angle(fixtures::random_unit(rng), u(rng)),
                          Vec3(u(rng), u(rng), u(rng))};
  };
  for (int i = 0; i < 500; ++i) {
    const auto a = random_tf(), b = random_tf(), c = random_tf();
    const auto l = (a * b) * c, r = a * (b * c);
    EXPECT_LT((l.matrix() - r.matrix()).norm(), 1e-9);
  }
}

TEST(RigidTransform, MatrixAgreesWithApply) {
  const RigidTransform t = RigidTransform::from_xyz_rpy(Vec3(1, 2, 3), Vec3(0.1, 0.2, 0.3));
  const Vec3 p(0.4, -0.5, 0.6);
  const Eigen::Vector4d h = t.matrix() * Eigen::Vector4d(p.x(), p.y(), p.z(), 1.0);
  EXPECT_LT((h.head<3>() - t.apply(p)).norm(), 1e-12);
}
