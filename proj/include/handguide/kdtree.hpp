#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "handguide/geometry.hpp"

namespace handguide {

/// Static 3-d tree over a point set. Points are copied; indices returned by
/// queries refer to the input order.
class KdTree {
 public:
  struct Neighbor {
    std::size_t index = 0;
    double squared_distance = std::numeric_limits<double>::infinity();
  };

  KdTree() = default;

  explicit KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::uint32_t{0});
    nodes_.reserve(points_.size() / kLeafSize * 2 + 1);
    if (!points_.empty()) build(0, static_cast<std::uint32_t>(points_.size()));
    packed_.reserve(points_.size());
    for (auto i : order_) packed_.push_back(points_[i]);
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const std::vector<Vec3>& points() const { return points_; }

  /// Nearest point within `max_distance` (infinite by default).
  Neighbor nearest(const Vec3& q, double max_distance = std::numeric_limits<double>::infinity()) const {
    Neighbor best;
    best.squared_distance = max_distance == std::numeric_limits<double>::infinity()
                                ? max_distance
                                : max_distance * max_distance;
    bool found = false;
    if (!nodes_.empty()) search_nearest(0, q, best, found);
    if (!found) best.squared_distance = std::numeric_limits<double>::infinity();
    return best;
  }

  /// Indices of all points with |p - q| <= radius, unordered.
  void radius_search(const Vec3& q, double radius, std::vector<std::size_t>& out) const {
    out.clear();
    if (!nodes_.empty()) search_radius(0, q, radius * radius, out);
  }

 private:
  static constexpr std::uint32_t kLeafSize = 12;

  struct Node {
    std::uint32_t begin = 0, end = 0;  // range in order_
    std::uint32_t left = 0, right = 0;  // children; 0 means leaf (root is never a child)
    int axis = 0;
    double split = 0.0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end, 0, 0, 0, 0.0});
    if (end - begin <= kLeafSize) return id;

    Vec3 lo = points_[order_[begin]], hi = lo;
    for (std::uint32_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
    const double split = points_[order_[mid]][axis];
    const std::uint32_t left = build(begin, mid);
    const std::uint32_t right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void search_nearest(std::uint32_t id, const Vec3& q, Neighbor& best, bool& found) const {
    const Node& n = nodes_[id];
    if (n.left == 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const double d = (packed_[i] - q).squaredNorm();
        if (d < best.squared_distance || (d == best.squared_distance && found && order_[i] < best.index) ||
            (d <= best.squared_distance && !found)) {
          best.squared_distance = d;
          best.index = order_[i];
          found = true;
        }
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const std::uint32_t near = diff < 0.0 ? n.left : n.right;
    const std::uint32_t far = diff < 0.0 ? n.right : n.left;
    search_nearest(near, q, best, found);
    if (diff * diff <= best.squared_distance) search_nearest(far, q, best, found);
  }

  void search_radius(std::uint32_t id, const Vec3& q, double r2, std::vector<std::size_t>& out) const {
    const Node& n = nodes_[id];
    if (n.left == 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        if ((packed_[i] - q).squaredNorm() <= r2) out.push_back(order_[i]);
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const std::uint32_t near = diff < 0.0 ? n.left : n.right;
    const std::uint32_t far = diff < 0.0 ? n.right : n.left;
    search_radius(near, q, r2, out);
    if (diff * diff <= r2) search_radius(far, q, r2, out);
  }

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Vec3> packed_;  // points_ in tree order, for cache-friendly leaf scans
  std::vector<Node> nodes_;
};

}  // namespace handguide
