#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "handguide/registration.hpp"
#include "handguide/synthetic.hpp"

using namespace handguide;

namespace {

std::vector<Vec3> random_points(std::size_t n, std::mt19937_64& rng, double half = 1.0) {
  std::uniform_real_distribution<double> u(-half, half);
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(u(rng), u(rng), u(rng));
  return out;
}

double brute_rms(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double sum = 0;
  for (const auto& p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : b) best = std::min(best, (p - q).squaredNorm());
    sum += best;
  }
  return std::sqrt(sum / static_cast<double>(a.size()));
}

TriangleMesh unit_square() {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

const PointCloud& kr5_model() {
  static const PointCloud m = model_cloud(fixtures::kr5(), JointState{{0.3, -0.4, 0.5, 0.0, 0.6, 0.0}}, 4000, 5);
  return m;
}

}  // namespace

TEST(KdTree, NearestMatchesBruteForce) {
  std::mt19937_64 rng(51);
  const auto pts = random_points(2000, rng);
  const KdTree tree(pts);
  for (const auto& q : random_points(500, rng, 1.5)) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if ((pts[i] - q).squaredNorm() < (pts[best] - q).squaredNorm()) best = i;
    }
    const auto nn = tree.nearest(q);
    EXPECT_EQ(nn.squared_distance, (pts[best] - q).squaredNorm());
  }
}

TEST(KdTree, MaxDistanceAndRadiusSearch) {
  std::mt19937_64 rng(52);
  const auto pts = random_points(1000, rng);
  const KdTree tree(pts);
  std::vector<std::size_t> found;
  for (const auto& q : random_points(100, rng)) {
    const auto nn = tree.nearest(q, 0.01);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) best = std::min(best, (p - q).norm());
    if (best <= 0.01) {
      EXPECT_NEAR(std::sqrt(nn.squared_distance), best, 1e-15);
    } else {
      EXPECT_TRUE(std::isinf(nn.squared_distance));
    }
    tree.radius_search(q, 0.2, found);
    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if ((pts[i] - q).norm() <= 0.2) expected.push_back(i);
    }
    std::sort(found.begin(), found.end());
    EXPECT_EQ(found, expected);
  }
  EXPECT_TRUE(KdTree(std::vector<Vec3>{}).empty());
}

TEST(SampleMesh, UnitSquareMean) {
  const auto cloud = sample_mesh(unit_square(), 10000, 3);
  Vec3 mean = Vec3::Zero();
  for (const auto& p : cloud.points) mean += p;
  mean /= 10000.0;
  EXPECT_NEAR(mean.x(), 0.5, 0.02);
  EXPECT_NEAR(mean.y(), 0.5, 0.02);
  EXPECT_EQ(mean.z(), 0.0);
}

TEST(SampleMesh, SingleTriangleSampleInside) {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {2, 0, 0}, {0, 1, 0}};
  m.triangles = {{0, 1, 2}};
  const auto a = sample_mesh(m, 1, 99), b = sample_mesh(m, 1, 99);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a.points[0], b.points[0]);
  const Vec3 p = a.points[0];
  EXPECT_GE(p.x(), 0);
  EXPECT_GE(p.y(), 0);
  EXPECT_LE(p.x() / 2 + p.y(), 1.0 + 1e-15);
}

TEST(SampleMesh, AreaWeighting) {
  // Two disjoint triangles, one with three times the area of the other.
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {5, 0, 0}, {8, 0, 0}, {5, 1, 0}};
  m.triangles = {{0, 1, 2}, {3, 4, 5}};
  const auto cloud = sample_mesh(m, 20000, 4);
  const auto big = std::count_if(cloud.points.begin(), cloud.points.end(), [](const Vec3& p) { return p.x() >= 5; });
  EXPECT_NEAR(static_cast<double>(big) / 20000.0, 0.75, 0.015);
}

TEST(SampleMesh, SmallPresetAndErrors) {
  EXPECT_EQ(sample_mesh(unit_square(), kSmallCloud, 1).size(), 16000u);
  EXPECT_EQ(kBigCloud.samples, 256000u);
  EXPECT_THROW(sample_mesh(TriangleMesh{}, 10, 1), InputError);
  EXPECT_THROW(sample_mesh(unit_square(), 0, 1), InputError);
}

TEST(CropScene, Examples) {
  std::mt19937_64 rng(53);
  PointCloud cloud{random_points(3000, rng, 3.0)};
  SeedPose seed;
  seed.pose.translation = Vec3(0.5, 0, 0);
  const auto cropped = crop_scene(cloud, seed);
  std::vector<Vec3> expected;
  for (const auto& p : cloud.points) {
    if ((p - seed.pose.translation).norm() <= 2.5) expected.push_back(p);
  }
  EXPECT_EQ(cropped.points, expected);
  seed.crop_radius = 100;
  EXPECT_EQ(crop_scene(cloud, seed).points, cloud.points);
  seed.pose.translation = Vec3(50, 0, 0);
  seed.crop_radius = 1;
  EXPECT_THROW(crop_scene(cloud, seed), InputError);
}

TEST(MlsSmooth, PlaneIsAFixedPoint) {
  std::mt19937_64 rng(54);
  std::uniform_real_distribution<double> u(0, 1);
  PointCloud plane;
  const Vec3 n = Vec3(1, 2, 3).normalized();
  const Vec3 e1 = n.unitOrthogonal(), e2 = n.cross(e1);
  for (int i = 0; i < 2000; ++i) plane.points.push_back(Vec3(0.1, 0.2, 0.3) + u(rng) * e1 + u(rng) * e2);
  const auto out = mls_smooth(plane, 0.1);
  for (std::size_t i = 0; i < plane.size(); ++i) EXPECT_LT((out.points[i] - plane.points[i]).norm(), 1e-9);
}

TEST(MlsSmooth, NoisyPlaneResidualHalves) {
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> noise(0, 0.005);
  PointCloud cloud;
  for (int i = 0; i < 5000; ++i) cloud.points.emplace_back(u(rng), u(rng), noise(rng));
  auto off_plane = [](const PointCloud& c) {
    double s = 0;
    for (const auto& p : c.points) s += p.z() * p.z();
    return std::sqrt(s / static_cast<double>(c.size()));
  };
  const auto out = mls_smooth(cloud, 0.05);
  EXPECT_LE(off_plane(out), off_plane(cloud) / 2);
}

TEST(MlsSmooth, IsolatedPointPassesThrough) {
  PointCloud c{{{0, 0, 0}, {10, 0, 0}, {0, 10, 0}}};
  EXPECT_EQ(mls_smooth(c, 0.5).points, c.points);
  EXPECT_THROW(mls_smooth(c, 0.0), ValidationError);
}

TEST(RmsClosestPoint, Examples) {
  std::mt19937_64 rng(56);
  PointCloud a{random_points(300, rng)};
  EXPECT_EQ(rms_closest_point(a, a), 0.0);
  PointCloud spread{{{0, 0, 0}, {10, 0, 0}, {0, 10, 0}}};
  EXPECT_NEAR(rms_closest_point(spread, transformed(spread, RigidTransform{Quaternion::identity(), Vec3(0.3, 0, 0)})),
              0.3, 1e-12);
  for (int i = 0; i < 10; ++i) {
    PointCloud x{random_points(200, rng)}, y{random_points(150, rng)};
    EXPECT_NEAR(rms_closest_point(x, y), brute_rms(x.points, y.points), 1e-12);
  }
  EXPECT_THROW(rms_closest_point(PointCloud{}, a), InputError);
}

TEST(BestFitTransform, RecoversRotationWithoutReflection) {
  std::mt19937_64 rng(57);
  for (int i = 0; i < 100; ++i) {
    const auto src = random_points(50, rng);
    const RigidTransform t{Quaternion::from_axis_angle(fixtures::random_unit(rng), 2.0 * i / 100 - 1),
                           Vec3(0.1 * i, -0.2, 0.3)};
    std::vector<Vec3> dst;
    for (const auto& p : src) dst.push_back(t.apply(p));
    const auto est = best_fit_transform(src, dst);
    EXPECT_LT((est.matrix() - t.matrix()).norm(), 1e-9);
  }
  // Mirror-image correspondences must still produce a proper rotation.
  const auto src = random_points(30, rng);
  std::vector<Vec3> dst;
  for (const auto& p : src) dst.emplace_back(-p.x(), p.y(), p.z());
  const Mat3 r = best_fit_transform(src, dst).rotation.matrix();
  EXPECT_LT((r.transpose() * r - Mat3::Identity()).norm(), 1e-9);
  EXPECT_NEAR(r.determinant(), 1.0, 1e-9);
}

TEST(Icp, ExactCopyFromIdentity) {
  const auto& m = kr5_model();
  const auto r = icp_register(m, m, SeedPose{}, IcpConfig{});
  EXPECT_TRUE(r.converged);
  EXPECT_LT(r.pose.translation.norm(), 1e-6);
  EXPECT_LT(rotation_angle_between(r.pose.rotation, Quaternion::identity()), 1e-6);
  EXPECT_LE(r.rms, 1e-6);
  EXPECT_EQ(r.inlier_fraction, 1.0);
}

TEST(Icp, RecoversKnownTransform) {
  const auto& m = kr5_model();
  const RigidTransform truth{Quaternion::from_axis_angle(Vec3::UnitZ(), 0.7), Vec3(1.5, -0.4, 0.0)};
  const PointCloud scene = transformed(m, truth);
  std::mt19937_64 rng(58);
  for (int i = 0; i < 5; ++i) {
    const RigidTransform wiggle{Quaternion::from_axis_angle(fixtures::random_unit(rng), 10.0 * M_PI / 180),
                                0.1 * fixtures::random_unit(rng)};
    const auto r = icp_register(m, scene, SeedPose{wiggle * truth, 2.5}, IcpConfig{});
    ASSERT_TRUE(r.converged);
    EXPECT_LT((r.pose.translation - truth.translation).norm(), 1e-3);
    EXPECT_LT(rotation_angle_between(r.pose.rotation, truth.rotation) * 180 / M_PI, 0.5);
    const Mat3 rot = r.pose.rotation.matrix();
    EXPECT_LT((rot.transpose() * rot - Mat3::Identity()).norm(), 1e-9);
    EXPECT_NEAR(rot.determinant(), 1.0, 1e-9);
    for (const auto& h : r.history) EXPECT_LE(h.rms_after, h.rms_before + 1e-12);
    EXPECT_LE(r.iterations, 100);
  }
}

TEST(Icp, FarClutterIsRejected) {
  const auto& m = kr5_model();
  const RigidTransform truth{Quaternion::from_axis_angle(Vec3::UnitZ(), -0.4), Vec3(0.2, 0.3, 0.0)};
  PointCloud scene = transformed(m, truth);
  // 30% clutter on a shell well beyond the rejection distance of the robot.
  std::mt19937_64 rng(59);
  const std::size_t extra = scene.size() * 3 / 7;
  for (std::size_t i = 0; i < extra; ++i) {
    scene.points.push_back(truth.translation + Vec3(0, 0, 0.6) + 2.0 * fixtures::random_unit(rng));
  }
  const RigidTransform seed =
      RigidTransform{Quaternion::from_axis_angle(Vec3(1, 1, 0).normalized(), 0.17), Vec3(0.05, -0.08, 0.02)} * truth;
  const auto r = icp_register(m, scene, SeedPose{seed, 2.5}, IcpConfig{});
  ASSERT_TRUE(r.converged);
  EXPECT_LT((r.pose.translation - truth.translation).norm(), 1e-3);
  EXPECT_LT(rotation_angle_between(r.pose.rotation, truth.rotation) * 180 / M_PI, 0.5);
}

TEST(Icp, NoCorrespondencesIsDiverged) {
  const auto& m = kr5_model();
  const PointCloud far = transformed(m, RigidTransform{Quaternion::identity(), Vec3(50, 0, 0)});
  const auto r = icp_register(m, far, SeedPose{}, IcpConfig{});
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.pose.translation, Vec3::Zero());
}

TEST(Icp, Deterministic) {
  const auto scene_spec = [] {
    SceneSpec s;
    s.state = JointState{{0.3, -0.4, 0.5, 0.0, 0.6, 0.0}};
    s.robot_samples = 4000;
    s.noise_sigma = 0.003;
    return s;
  }();
  const auto scene = synthetic_scene(fixtures::kr5(), scene_spec);
  const auto model = model_cloud(fixtures::kr5(), scene_spec.state, 3000, 8);
  SeedPose seed{RigidTransform{Quaternion::from_axis_angle(Vec3::UnitZ(), 0.1), Vec3(0.05, 0.02, 0)}, 2.5};
  const auto a = register_model(model, scene, seed, IcpConfig{});
  const auto b = register_model(model, scene, seed, IcpConfig{});
  EXPECT_EQ(a.pose.matrix(), b.pose.matrix());
  EXPECT_EQ(a.rms, b.rms);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(model_cloud(fixtures::kr5(), scene_spec.state, 3000, 8).points, model.points);
}

TEST(Sweep, PerturbationCounts) {
  SweepOptions rot;
  rot.translation = false;
  const auto r = sweep_perturbations(rot);
  ASSERT_EQ(r.size(), 20u);
  EXPECT_EQ(r[1].yaw_deg, 18.0);
  SweepOptions tr;
  tr.rotation = false;
  const auto t = sweep_perturbations(tr);
  ASSERT_EQ(t.size(), 1331u);
  EXPECT_NEAR(t.front().offset.x(), -0.5, 1e-12);
  EXPECT_NEAR(t.back().offset.z(), 0.5, 1e-12);
}

TEST(Sweep, SummaryStats) {
  const auto s = summarize({1, 2, 3, 4});
  EXPECT_EQ(s.mean, 2.5);
  EXPECT_EQ(s.min, 1);
  EXPECT_EQ(s.max, 4);
  EXPECT_NEAR(s.sigma, std::sqrt(1.25), 1e-15);
  EXPECT_EQ(s.count, 4u);
}

TEST(Sweep, PerfectSceneStaysInBasin) {
  // Clean copy of the model: runs within the basin converge near the floor.
  const auto& m = kr5_model();
  SweepOptions opt;
  opt.translation = false;
  opt.threads = 1;
  IcpConfig cfg;
  const auto report = robustness_sweep(m, m, SeedPose{}, cfg, opt);
  ASSERT_EQ(report.entries.size(), 20u);
  // The floor is set by MLS rounding the box edges of the scene copy.
  const double floor = report.entries.front().rms;
  EXPECT_LT(floor, 0.01);
  for (const auto& e : report.entries) {
    if (e.yaw_deg > 18.0 && e.yaw_deg < 342.0) continue;
    EXPECT_TRUE(e.converged) << e.yaw_deg;
    EXPECT_LE(e.rms, 10 * floor) << e.yaw_deg;
  }
  EXPECT_GT(report.seed.mean, report.icp_all.mean);
}
