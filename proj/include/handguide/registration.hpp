#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "handguide/chain.hpp"
#include "handguide/errors.hpp"
#include "handguide/kdtree.hpp"
#include "handguide/kinematics.hpp"
#include "handguide/mesh.hpp"

namespace handguide {

struct SeedPose {
  RigidTransform pose;  // rough robot base pose in the scene frame
  double crop_radius = 2.5;
};

struct IcpConfig {
  int max_iterations = 100;
  double max_correspondence_distance = 0.25;  // m
  double convergence_delta = 1e-5;            // m, change of RMS between iterations
  double mls_radius = 0.05;                   // m
  double min_inlier_fraction = 0.5;

  void validate() const {
    if (max_iterations <= 0 || !(max_correspondence_distance > 0.0) || !(convergence_delta > 0.0) ||
        !(mls_radius > 0.0)) {
      throw ValidationError("icp configuration values must be positive");
    }
  }
};

struct IcpIteration {
  double rms_before = 0.0;  // on this iteration's correspondences, before the update
  double rms_after = 0.0;   // same correspondences, after the update
  std::size_t correspondences = 0;
};

struct RegistrationResult {
  RigidTransform pose;
  double rms = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  double inlier_fraction = 0.0;
  std::vector<IcpIteration> history;
};

/// Scene-mesh sampling presets: spatial-mesh density and samples per mesh.
struct CloudPreset {
  const char* name;
  double triangles_per_cubic_meter;
  std::size_t samples;
};

inline constexpr CloudPreset kSmallCloud{"small", 1000.0, 16000};
inline constexpr CloudPreset kBigCloud{"big", 1240000.0, 256000};

// --- sampling ----------------------------------------------------------------

/// Area-weighted uniform surface samples, deterministic for a given seed.
inline PointCloud sample_mesh(const TriangleMesh& mesh, std::size_t samples, std::uint64_t rng_seed) {
  if (mesh.empty()) throw InputError("cannot sample an empty mesh");
  if (samples == 0) throw InputError("sample count must be positive");
  mesh.validate();

  std::vector<double> cumulative;
  cumulative.reserve(mesh.triangles.size());
  double total = 0.0;
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[t[0]];
    total += 0.5 * (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a).norm();
    cumulative.push_back(total);
  }
  if (!(total > 0.0)) throw InputError("cannot sample a mesh with zero surface area");

  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PointCloud out;
  out.points.reserve(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const double pick = unit(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const auto& t = mesh.triangles[static_cast<std::size_t>(it - cumulative.begin())];
    const double r1 = std::sqrt(unit(rng));
    const double r2 = unit(rng);
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    out.points.push_back((1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c);
  }
  return out;
}

inline PointCloud sample_mesh(const TriangleMesh& mesh, const CloudPreset& preset, std::uint64_t rng_seed) {
  return sample_mesh(mesh, preset.samples, rng_seed);
}

/// All link collision meshes posed by forward kinematics, merged.
inline TriangleMesh posed_collision_mesh(const KinematicChain& chain, const JointState& state) {
  const LinkPoses poses = forward_kinematics(chain, state);
  TriangleMesh merged;
  for (std::size_t i = 0; i < chain.link_count(); ++i) {
    const auto& mesh = chain.links[i].collision_mesh;
    if (!mesh) continue;
    const auto base = static_cast<std::uint32_t>(merged.vertices.size());
    for (const auto& v : mesh->vertices) merged.vertices.push_back(poses.links[i].apply(v));
    for (const auto& t : mesh->triangles) merged.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
  }
  return merged;
}

/// Model cloud in the robot base frame at a known joint state.
inline PointCloud model_cloud(const KinematicChain& chain, const JointState& state, std::size_t samples,
                              std::uint64_t rng_seed) {
  const TriangleMesh merged = posed_collision_mesh(chain, state);
  if (merged.empty()) throw InputError("chain has no collision meshes to build a model cloud from");
  return sample_mesh(merged, samples, rng_seed);
}

// --- scene preprocessing -----------------------------------------------------

inline PointCloud crop_scene(const PointCloud& cloud, const SeedPose& seed) {
  if (!(seed.crop_radius > 0.0)) throw ValidationError("crop radius must be positive");
  const double r2 = seed.crop_radius * seed.crop_radius;
  PointCloud out;
  for (const auto& p : cloud.points) {
    if ((p - seed.pose.translation).squaredNorm() <= r2) out.points.push_back(p);
  }
  if (out.empty()) throw InputError("no scene points within the crop radius of the seed");
  return out;
}

/// First-order moving least squares: each point is projected onto the
/// least-squares plane of its radius neighbourhood.
inline PointCloud mls_smooth(const PointCloud& cloud, double radius) {
  if (!(radius > 0.0)) throw ValidationError("mls radius must be positive");
  const KdTree index(cloud.points);
  PointCloud out;
  out.points.reserve(cloud.size());
  std::vector<std::size_t> neighbors;
  for (const auto& p : cloud.points) {
    index.radius_search(p, radius, neighbors);
    if (neighbors.size() < 3) {
      out.points.push_back(p);
      continue;
    }
    Vec3 mean = Vec3::Zero();
    for (auto i : neighbors) mean += cloud.points[i];
    mean /= static_cast<double>(neighbors.size());
    Mat3 cov = Mat3::Zero();
    for (auto i : neighbors) {
      const Vec3 d = cloud.points[i] - mean;
      cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 normal = eig.eigenvectors().col(0);
    out.points.push_back(p - (p - mean).dot(normal) * normal);
  }
  return out;
}

// --- metrics -----------------------------------------------------------------

inline double rms_closest_point(const PointCloud& a, const KdTree& b_index) {
  if (a.empty() || b_index.empty()) throw InputError("rms of an empty cloud");
  double sum = 0.0;
  for (const auto& p : a.points) sum += b_index.nearest(p).squared_distance;
  return std::sqrt(sum / static_cast<double>(a.size()));
}

/// sqrt(mean over a of the squared distance to the nearest point of b).
inline double rms_closest_point(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw InputError("rms of an empty cloud");
  return rms_closest_point(a, KdTree(b.points));
}

// --- ICP ---------------------------------------------------------------------

/// Least-squares rigid transform mapping `src` onto `dst` (no reflections).
inline RigidTransform best_fit_transform(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  const auto n = static_cast<double>(src.size());
  Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= n;
  cd /= n;
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) h += (src[i] - cs) * (dst[i] - cd).transpose();
  const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Mat3 fix = Mat3::Identity();
  fix(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Mat3 r = v * fix * u.transpose();
  return RigidTransform::from_matrix(r, cd - r * cs);
}

/// Point-to-point ICP from `initial`. `scene_index` is reused across calls.
inline RegistrationResult icp_register(const PointCloud& model, const KdTree& scene_index,
                                       const RigidTransform& initial, const IcpConfig& cfg) {
  if (model.empty() || scene_index.empty()) throw InputError("icp needs non-empty model and scene clouds");
  cfg.validate();

  RegistrationResult result;
  result.pose = initial;
  std::vector<Vec3> src, dst;
  src.reserve(model.size());
  dst.reserve(model.size());
  double previous = std::numeric_limits<double>::infinity();
  bool settled = false;

  auto gather = [&](const RigidTransform& pose) {
    src.clear();
    dst.clear();
    for (const auto& m : model.points) {
      const Vec3 p = pose.apply(m);
      const auto nn = scene_index.nearest(p, cfg.max_correspondence_distance);
      if (nn.squared_distance == std::numeric_limits<double>::infinity()) continue;
      src.push_back(p);
      dst.push_back(scene_index.points()[nn.index]);
    }
  };

  for (int it = 0; it < cfg.max_iterations; ++it) {
    gather(result.pose);
    if (src.size() < 3) {
      if (it == 0) {
        result.pose = initial;
        result.converged = false;
        return result;
      }
      break;
    }
    const RigidTransform delta = best_fit_transform(src, dst);
    IcpIteration step;
    step.correspondences = src.size();
    double before = 0.0, after = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      before += (src[i] - dst[i]).squaredNorm();
      after += (delta.apply(src[i]) - dst[i]).squaredNorm();
    }
    step.rms_before = std::sqrt(before / static_cast<double>(src.size()));
    step.rms_after = std::sqrt(after / static_cast<double>(src.size()));
    result.history.push_back(step);
    result.pose = delta * result.pose;
    result.iterations = it + 1;
    if (std::abs(previous - step.rms_after) < cfg.convergence_delta) {
      settled = true;
      break;
    }
    previous = step.rms_after;
  }

  gather(result.pose);
  result.inlier_fraction = static_cast<double>(src.size()) / static_cast<double>(model.size());
  if (!src.empty()) {
    double sum = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) sum += (src[i] - dst[i]).squaredNorm();
    result.rms = std::sqrt(sum / static_cast<double>(src.size()));
  }
  result.converged = settled && result.inlier_fraction >= cfg.min_inlier_fraction;
  return result;
}

inline RegistrationResult icp_register(const PointCloud& model, const PointCloud& scene, const SeedPose& seed,
                                       const IcpConfig& cfg) {
  if (model.empty() || scene.empty()) throw InputError("icp needs non-empty model and scene clouds");
  return icp_register(model, KdTree(scene.points), seed.pose, cfg);
}

/// Scene preprocessing followed by ICP: crop around the seed, MLS, register.
inline RegistrationResult register_model(const PointCloud& model, const PointCloud& scene, const SeedPose& seed,
                                         const IcpConfig& cfg) {
  const PointCloud smoothed = mls_smooth(crop_scene(scene, seed), cfg.mls_radius);
  return icp_register(model, smoothed, seed, cfg);
}

// --- robustness sweep --------------------------------------------------------

struct SweepOptions {
  bool rotation = true;
  bool translation = true;
  double yaw_step_deg = 18.0;
  double translation_half_extent = 0.5;  // grid spans [-0.5, 0.5] m per axis
  double translation_step = 0.1;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct SweepEntry {
  std::string kind;  // "rotation" or "translation"
  Vec3 offset = Vec3::Zero();
  double yaw_deg = 0.0;
  double seed_rms = 0.0;
  double rms = 0.0;  // closest-point RMS of the registered model against the scene
  int iterations = 0;
  bool converged = false;
  RigidTransform pose;
};

struct SweepStats {
  double mean = 0.0, min = 0.0, max = 0.0, sigma = 0.0;
  std::size_t count = 0;
};

struct SweepReport {
  std::vector<SweepEntry> entries;
  SweepStats seed;             // raw perturbed seeds
  SweepStats icp_all;          // converged runs
  SweepStats icp_rotation;
  SweepStats icp_translation;
};

inline SweepStats summarize(const std::vector<double>& values) {
  SweepStats s;
  s.count = values.size();
  if (values.empty()) return s;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.sigma = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

/// Yaw steps about the seed's own z axis, then the inclusive translation grid.
inline std::vector<SweepEntry> sweep_perturbations(const SweepOptions& opt) {
  std::vector<SweepEntry> out;
  if (opt.rotation) {
    const int steps = static_cast<int>(std::lround(360.0 / opt.yaw_step_deg));
    for (int k = 0; k < steps; ++k) {
      SweepEntry e;
      e.kind = "rotation";
      e.yaw_deg = k * opt.yaw_step_deg;
      out.push_back(e);
    }
  }
  if (opt.translation) {
    const int half = static_cast<int>(std::lround(opt.translation_half_extent / opt.translation_step));
    for (int ix = -half; ix <= half; ++ix) {
      for (int iy = -half; iy <= half; ++iy) {
        for (int iz = -half; iz <= half; ++iz) {
          SweepEntry e;
          e.kind = "translation";
          e.offset = Vec3(ix, iy, iz) * opt.translation_step;
          out.push_back(e);
        }
      }
    }
  }
  return out;
}

inline RigidTransform perturbed_seed(const RigidTransform& seed, const SweepEntry& e) {
  const double yaw = e.yaw_deg * M_PI / 180.0;
  RigidTransform p = seed * RigidTransform{Quaternion::from_axis_angle(Vec3::UnitZ(), yaw), Vec3::Zero()};
  p.translation += e.offset;
  return p;
}

/// One ICP run per perturbed seed against a scene cropped and smoothed once
/// around the unperturbed seed. Entry order is fixed by the perturbation list.
inline SweepReport robustness_sweep(const PointCloud& model, const PointCloud& scene, const SeedPose& seed,
                                    const IcpConfig& cfg, const SweepOptions& opt = {}) {
  const PointCloud prepared = mls_smooth(crop_scene(scene, seed), cfg.mls_radius);
  const KdTree index(prepared.points);
  SweepReport report;
  report.entries = sweep_perturbations(opt);

  auto run = [&](std::size_t i) {
    SweepEntry& e = report.entries[i];
    const RigidTransform start = perturbed_seed(seed.pose, e);
    e.seed_rms = rms_closest_point(transformed(model, start), index);
    const RegistrationResult r = icp_register(model, index, start, cfg);
    e.pose = r.pose;
    e.iterations = r.iterations;
    e.converged = r.converged;
    e.rms = rms_closest_point(transformed(model, r.pose), index);
  };

  unsigned threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, report.entries.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < report.entries.size(); ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < report.entries.size(); i += threads) run(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  std::vector<double> seeds, all, rot, trans;
  for (const auto& e : report.entries) {
    seeds.push_back(e.seed_rms);
    if (!e.converged) continue;
    all.push_back(e.rms);
    (e.kind == "rotation" ? rot : trans).push_back(e.rms);
  }
  report.seed = summarize(seeds);
  report.icp_all = summarize(all);
  report.icp_rotation = summarize(rot);
  report.icp_translation = summarize(trans);
  return report;
}

}  // namespace handguide
