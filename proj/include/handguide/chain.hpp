#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "handguide/errors.hpp"
#include "handguide/geometry.hpp"
#include "handguide/mesh.hpp"

namespace handguide {

struct JointLimits {
  double lower = -M_PI;
  double upper = M_PI;

  bool contains(double angle) const { return angle >= lower && angle <= upper; }
};

struct Joint {
  std::string name;
  std::string parent_link;
  std::string child_link;
  RigidTransform origin;  // parent link frame -> joint frame at zero angle
  Vec3 axis = Vec3::UnitZ();
  JointLimits limits;
  double max_velocity = 1.0;
  double max_acceleration = 1.0;
};

struct Link {
  std::string name;
  std::optional<TriangleMesh> visual_mesh;
  std::optional<TriangleMesh> collision_mesh;
};

/// Serial chain. links[0] is the base; joints[i] connects links[i] to
/// links[i + 1].
struct KinematicChain {
  std::string name;
  std::vector<Link> links;
  std::vector<Joint> joints;
  RigidTransform end_effector_offset;  // last link frame -> tool frame

  std::size_t joint_count() const { return joints.size(); }
  std::size_t link_count() const { return links.size(); }

  /// Index of the joint that moves `link`, or nullopt for the base.
  static std::optional<std::size_t> parent_joint(std::size_t link) {
    if (link == 0) return std::nullopt;
    return link - 1;
  }
};

struct JointState {
  std::vector<double> angles;
  double timestamp = 0.0;

  std::size_t size() const { return angles.size(); }
};

inline constexpr double kAxisUnitTolerance = 1e-9;

inline bool within_limits(const KinematicChain& chain, const JointState& state) {
  if (state.size() != chain.joint_count()) return false;
  for (std::size_t j = 0; j < state.size(); ++j) {
    if (!std::isfinite(state.angles[j]) || !chain.joints[j].limits.contains(state.angles[j])) return false;
  }
  return true;
}

/// Zero where allowed, otherwise the middle of the joint range.
inline JointState home_state(const KinematicChain& chain) {
  JointState s;
  for (const auto& j : chain.joints) {
    s.angles.push_back(j.limits.contains(0.0) ? 0.0 : 0.5 * (j.limits.lower + j.limits.upper));
  }
  return s;
}

namespace detail {

using nlohmann::json;

inline const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
  return obj.at(key);
}

inline double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError(where + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ValidationError(where + ": value is not finite");
  return d;
}

inline Vec3 vec3(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) throw ParseError(where + ": expected an array of 3 numbers");
  return {number(v[0], where + "[0]"), number(v[1], where + "[1]"), number(v[2], where + "[2]")};
}

inline std::string text(const json& v, const std::string& where) {
  if (!v.is_string()) throw ParseError(where + ": expected a string");
  return v.get<std::string>();
}

inline RigidTransform origin(const json& obj, const std::string& where) {
  Vec3 xyz = Vec3::Zero(), rpy = Vec3::Zero();
  if (obj.contains("xyz")) xyz = vec3(obj.at("xyz"), where + ".xyz");
  if (obj.contains("rpy")) rpy = vec3(obj.at("rpy"), where + ".rpy");
  return RigidTransform::from_xyz_rpy(xyz, rpy);
}

}  // namespace detail

/// Parses a chain description document. Mesh paths are resolved against
/// `mesh_root`. Joints come back ordered base to tip regardless of their
/// order in the document.
inline KinematicChain parse_chain(std::string_view document, const std::filesystem::path& mesh_root = {}) {
  using detail::json;
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("chain document: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("chain document: top level must be an object");

  KinematicChain chain;
  chain.name = doc.contains("name") ? detail::text(doc["name"], "name") : std::string{};

  const auto& links = detail::require(doc, "links", "chain");
  const auto& joints = detail::require(doc, "joints", "chain");
  if (!links.is_array() || links.empty()) throw ParseError("links: expected a non-empty array");
  if (!joints.is_array()) throw ParseError("joints: expected an array");

  std::map<std::string, Link> link_by_name;
  std::vector<std::string> link_order;
  for (std::size_t i = 0; i < links.size(); ++i) {
    const std::string where = "links[" + std::to_string(i) + "]";
    Link link;
    link.name = detail::text(detail::require(links[i], "name", where), where + ".name");
    auto load = [&](const char* key) -> std::optional<TriangleMesh> {
      if (!links[i].contains(key) || links[i][key].is_null()) return std::nullopt;
      const auto rel = detail::text(links[i][key], where + "." + key);
      try {
        return load_mesh(mesh_root / rel);
      } catch (const std::exception& e) {
        throw ParseError(where + "." + key + ": " + e.what());
      }
    };
    link.visual_mesh = load("visual_mesh");
    link.collision_mesh = load("collision_mesh");
    if (!link_by_name.emplace(link.name, link).second) throw ValidationError("duplicate link name '" + link.name + "'");
    link_order.push_back(link.name);
  }

  std::vector<Joint> parsed;
  std::set<std::string> joint_names;
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const std::string where = "joints[" + std::to_string(i) + "]";
    const auto& jj = joints[i];
    Joint j;
    j.name = detail::text(detail::require(jj, "name", where), where + ".name");
    if (jj.contains("type") && detail::text(jj["type"], where + ".type") != "revolute") {
      throw ValidationError(where + ": only revolute joints are supported (got '" + jj["type"].get<std::string>() + "')");
    }
    j.parent_link = detail::text(detail::require(jj, "parent", where), where + ".parent");
    j.child_link = detail::text(detail::require(jj, "child", where), where + ".child");
    if (jj.contains("origin")) j.origin = detail::origin(jj["origin"], where + ".origin");
    j.axis = detail::vec3(detail::require(jj, "axis", where), where + ".axis");
    if (std::abs(j.axis.norm() - 1.0) > kAxisUnitTolerance) {
      throw ValidationError(where + ".axis: non-unit axis (norm " + std::to_string(j.axis.norm()) + ")");
    }
    const auto& lim = detail::require(jj, "limits", where);
    j.limits.lower = detail::number(detail::require(lim, "lower", where + ".limits"), where + ".limits.lower");
    j.limits.upper = detail::number(detail::require(lim, "upper", where + ".limits"), where + ".limits.upper");
    if (j.limits.lower > j.limits.upper) throw ValidationError(where + ".limits: lower > upper");
    j.max_velocity = detail::number(detail::require(jj, "max_velocity", where), where + ".max_velocity");
    j.max_acceleration = detail::number(detail::require(jj, "max_acceleration", where), where + ".max_acceleration");
    if (j.max_velocity <= 0.0) throw ValidationError(where + ".max_velocity: must be positive");
    if (j.max_acceleration <= 0.0) throw ValidationError(where + ".max_acceleration: must be positive");
    if (!joint_names.insert(j.name).second) throw ValidationError("duplicate joint name '" + j.name + "'");
    if (!link_by_name.count(j.parent_link)) throw ValidationError(where + ": unknown parent link '" + j.parent_link + "'");
    if (!link_by_name.count(j.child_link)) throw ValidationError(where + ": unknown child link '" + j.child_link + "'");
    parsed.push_back(std::move(j));
  }

  // Serial structure: one joint out of and into each link at most.
  std::map<std::string, std::size_t> joint_from_parent, joint_to_child;
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    if (!joint_from_parent.emplace(parsed[i].parent_link, i).second) {
      throw ValidationError("broken chain: link '" + parsed[i].parent_link + "' has more than one child joint");
    }
    if (!joint_to_child.emplace(parsed[i].child_link, i).second) {
      throw ValidationError("broken chain: link '" + parsed[i].child_link + "' has more than one parent joint");
    }
  }
  std::vector<std::string> bases;
  for (const auto& name : link_order) {
    if (!joint_to_child.count(name)) bases.push_back(name);
  }
  if (bases.size() != 1) {
    throw ValidationError("broken chain: expected exactly one base link, found " + std::to_string(bases.size()));
  }

  std::string current = bases.front();
  chain.links.push_back(link_by_name.at(current));
  while (joint_from_parent.count(current)) {
    const Joint& j = parsed[joint_from_parent.at(current)];
    chain.joints.push_back(j);
    current = j.child_link;
    chain.links.push_back(link_by_name.at(current));
    if (chain.links.size() > link_order.size()) throw ValidationError("broken chain: cycle detected");
  }
  if (chain.links.size() != link_order.size()) throw ValidationError("broken chain: links are not connected in one serial chain");

  if (doc.contains("end_effector")) {
    const auto& ee = doc["end_effector"];
    if (ee.contains("origin")) chain.end_effector_offset = detail::origin(ee["origin"], "end_effector.origin");
  }
  return chain;
}

inline KinematicChain load_chain(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open chain file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_chain(buffer.str(), path.parent_path());
}

}  // namespace handguide
