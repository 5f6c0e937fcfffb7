#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "handguide/errors.hpp"
#include "handguide/geometry.hpp"

namespace handguide {

/// Half-space normal . x <= offset.
struct Plane {
  Vec3 normal;
  double offset = 0.0;

  double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
};

/// Convex hull stored as its vertices plus outward face planes.
class ConvexHull {
 public:
  ConvexHull() = default;

  /// Incremental hull. Flat, collinear or single-point inputs are thickened
  /// by `thickness` on each side of the degenerate directions so the result
  /// is always a solid.
  static ConvexHull build(std::span<const Vec3> points, double thickness = 1e-6) {
    if (points.empty()) throw InputError("convex hull of an empty point set");
    for (const auto& p : points) {
      if (!is_finite(p)) throw InputError("convex hull input contains a non-finite point");
    }
    std::vector<Vec3> pts(points.begin(), points.end());

    double extent = 0.0;
    for (const auto& p : pts) extent = std::max(extent, (p - pts.front()).norm());
    const double eps = 1e-12 * std::max(1.0, extent);

    // Initial simplex.
    std::size_t i0 = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if (pts[i].x() < pts[i0].x()) i0 = i;
    }
    std::size_t i1 = farthest(pts, [&](const Vec3& p) { return (p - pts[i0]).norm(); });
    const double d01 = (pts[i1] - pts[i0]).norm();
    if (d01 <= eps) {
      return build(thicken(pts, {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()}, thickness), thickness);
    }
    const Vec3 line = (pts[i1] - pts[i0]) / d01;
    std::size_t i2 = farthest(pts, [&](const Vec3& p) { return line.cross(p - pts[i0]).norm(); });
    if (line.cross(pts[i2] - pts[i0]).norm() <= eps) {
      const auto [u, w] = orthonormal_pair(line);
      return build(thicken(pts, {u, w}, thickness), thickness);
    }
    const Vec3 n = (pts[i1] - pts[i0]).cross(pts[i2] - pts[i0]).normalized();
    std::size_t i3 = farthest(pts, [&](const Vec3& p) { return std::abs(n.dot(p - pts[i0])); });
    if (std::abs(n.dot(pts[i3] - pts[i0])) <= eps) {
      return build(thicken(pts, {n}, thickness), thickness);
    }

    ConvexHull hull;
    const Vec3 inside = 0.25 * (pts[i0] + pts[i1] + pts[i2] + pts[i3]);
    std::vector<Face> faces;
    auto add_face = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c) {
      Face f{{a, b, c}, {}};
      f.plane = make_plane(pts[a], pts[b], pts[c]);
      if (f.plane.signed_distance(inside) > 0.0) {
        std::swap(f.v[1], f.v[2]);
        f.plane = make_plane(pts[f.v[0]], pts[f.v[1]], pts[f.v[2]]);
      }
      faces.push_back(f);
    };
    const auto a = static_cast<std::uint32_t>(i0), b = static_cast<std::uint32_t>(i1),
               c = static_cast<std::uint32_t>(i2), d = static_cast<std::uint32_t>(i3);
    add_face(a, b, c);
    add_face(a, b, d);
    add_face(a, c, d);
    add_face(b, c, d);

    for (std::size_t pi = 0; pi < pts.size(); ++pi) {
      if (pi == i0 || pi == i1 || pi == i2 || pi == i3) continue;
      const Vec3& p = pts[pi];
      std::vector<bool> visible(faces.size(), false);
      bool any = false;
      for (std::size_t f = 0; f < faces.size(); ++f) {
        if (faces[f].plane.signed_distance(p) > eps) {
          visible[f] = true;
          any = true;
        }
      }
      if (!any) continue;

      std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
      for (std::size_t f = 0; f < faces.size(); ++f) {
        if (!visible[f]) continue;
        for (int k = 0; k < 3; ++k) edges.emplace(faces[f].v[k], faces[f].v[(k + 1) % 3]);
      }
      std::vector<Face> kept;
      kept.reserve(faces.size());
      for (std::size_t f = 0; f < faces.size(); ++f) {
        if (!visible[f]) kept.push_back(faces[f]);
      }
      const auto idx = static_cast<std::uint32_t>(pi);
      for (const auto& [ea, eb] : edges) {
        if (edges.count({eb, ea})) continue;  // interior edge of the visible region
        Face f{{ea, eb, idx}, make_plane(pts[ea], pts[eb], p)};
        kept.push_back(f);
      }
      faces = std::move(kept);
    }

    std::set<std::uint32_t> used;
    for (const auto& f : faces) {
      hull.planes_.push_back(f.plane);
      used.insert(f.v.begin(), f.v.end());
    }
    for (auto i : used) hull.vertices_.push_back(pts[i]);
    hull.update_centroid();
    return hull;
  }

  bool contains(const Vec3& p, double tolerance = 1e-9) const {
    if (planes_.empty()) return false;
    return std::all_of(planes_.begin(), planes_.end(),
                       [&](const Plane& pl) { return pl.signed_distance(p) <= tolerance; });
  }

  /// Copy scaled by `factor` about the vertex centroid.
  ConvexHull scaled(double factor) const {
    ConvexHull out = *this;
    for (auto& v : out.vertices_) v = centroid_ + factor * (v - centroid_);
    for (auto& pl : out.planes_) {
      const double at_centroid = pl.normal.dot(centroid_);
      pl.offset = at_centroid + factor * (pl.offset - at_centroid);
    }
    return out;
  }

  ConvexHull transformed(const RigidTransform& pose) const {
    ConvexHull out = *this;
    for (auto& v : out.vertices_) v = pose.apply(v);
    for (auto& pl : out.planes_) {
      const Vec3 n = pose.rotation.rotate(pl.normal);
      pl.offset += n.dot(pose.translation);
      pl.normal = n;
    }
    out.centroid_ = pose.apply(centroid_);
    return out;
  }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Plane>& planes() const { return planes_; }
  const Vec3& centroid() const { return centroid_; }
  bool empty() const { return planes_.empty(); }

 private:
  struct Face {
    std::array<std::uint32_t, 3> v;
    Plane plane;
  };

  template <typename F>
  static std::size_t farthest(const std::vector<Vec3>& pts, F&& metric) {
    std::size_t best = 0;
    double best_value = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double m = metric(pts[i]);
      if (m > best_value) {
        best_value = m;
        best = i;
      }
    }
    return best;
  }

  static Plane make_plane(const Vec3& a, const Vec3& b, const Vec3& c) {
    Vec3 n = (b - a).cross(c - a);
    const double len = n.norm();
    if (len > 0.0) n /= len;
    return {n, n.dot(a)};
  }

  static std::pair<Vec3, Vec3> orthonormal_pair(const Vec3& dir) {
    const Vec3 helper = std::abs(dir.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 u = dir.cross(helper).normalized();
    return {u, dir.cross(u).normalized()};
  }

  static std::vector<Vec3> thicken(const std::vector<Vec3>& pts, const std::vector<Vec3>& dirs, double t) {
    std::vector<Vec3> out;
    out.reserve(pts.size() * 2 * dirs.size());
    for (const auto& p : pts) {
      for (const auto& d : dirs) {
        out.push_back(p + t * d);
        out.push_back(p - t * d);
      }
    }
    if (dirs.size() == 2) {
      // keep a square cross-section for collinear inputs
      for (const auto& p : pts) {
        out.push_back(p + t * (dirs[0] + dirs[1]));
        out.push_back(p - t * (dirs[0] + dirs[1]));
      }
    }
    return out;
  }

  void update_centroid() {
    centroid_ = Vec3::Zero();
    for (const auto& v : vertices_) centroid_ += v;
    if (!vertices_.empty()) centroid_ /= static_cast<double>(vertices_.size());
  }

  std::vector<Vec3> vertices_;
  std::vector<Plane> planes_;
  Vec3 centroid_ = Vec3::Zero();
};

}  // namespace handguide
