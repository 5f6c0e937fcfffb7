#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "handguide/controller.hpp"
#include "handguide/errors.hpp"
#include "handguide/guidance.hpp"

namespace handguide {

// Line-delimited JSON interchange:
//   hand samples      {"t": s, "pos": [x, y, z], "grasp": bool}
//   joint trajectory  {"t": s, "angles": [..]}

namespace detail {

inline std::vector<nlohmann::json> read_json_lines(std::istream& in, const std::string& what) {
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(what + " line " + std::to_string(number) + ": " + e.what());
    }
    if (!out.back().is_object()) throw ParseError(what + " line " + std::to_string(number) + ": expected an object");
  }
  return out;
}

inline double json_number(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || !obj.at(key).is_number()) throw ParseError(where + ": '" + key + "' must be a number");
  return obj.at(key).get<double>();
}

inline Vec3 json_vec3(const nlohmann::json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() || !v[2].is_number()) {
    throw ParseError(where + ": expected an array of 3 numbers");
  }
  const Vec3 out(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
  if (!is_finite(out)) throw ParseError(where + ": values must be finite");
  return out;
}

inline std::vector<double> json_numbers(const nlohmann::json& v, const std::string& where) {
  if (!v.is_array()) throw ParseError(where + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ParseError(where + ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace detail

inline nlohmann::json to_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

inline HandSample hand_sample_from_json(const nlohmann::json& j, const std::string& where = "hand sample") {
  HandSample s;
  s.timestamp = detail::json_number(j, "t", where);
  if (!j.contains("pos")) throw ParseError(where + ": missing 'pos'");
  s.position = detail::json_vec3(j.at("pos"), where + ".pos");
  if (j.contains("grasp")) {
    if (!j.at("grasp").is_boolean()) throw ParseError(where + ": 'grasp' must be a boolean");
    s.grasping = j.at("grasp").get<bool>();
  }
  return s;
}

inline nlohmann::json to_json(const HandSample& s) {
  return {{"t", s.timestamp}, {"pos", to_json(s.position)}, {"grasp", s.grasping}};
}

inline JointState joint_state_from_json(const nlohmann::json& j, const std::string& where = "joint state") {
  JointState s;
  s.timestamp = detail::json_number(j, "t", where);
  if (!j.contains("angles")) throw ParseError(where + ": missing 'angles'");
  s.angles = detail::json_numbers(j.at("angles"), where + ".angles");
  return s;
}

inline nlohmann::json to_json(const JointState& s) { return {{"t", s.timestamp}, {"angles", s.angles}}; }

/// Reads a hand stream; timestamps must increase strictly.
inline std::vector<HandSample> read_hand_samples(std::istream& in) {
  std::vector<HandSample> out;
  const auto rows = detail::read_json_lines(in, "hand stream");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.push_back(hand_sample_from_json(rows[i], "hand stream row " + std::to_string(i + 1)));
    if (out.size() > 1 && !(out.back().timestamp > out[out.size() - 2].timestamp)) {
      throw ParseError("hand stream row " + std::to_string(i + 1) + ": timestamps must increase");
    }
  }
  return out;
}

inline void write_hand_samples(std::ostream& out, const std::vector<HandSample>& samples) {
  for (const auto& s : samples) out << to_json(s).dump() << '\n';
}

inline Trajectory read_trajectory(std::istream& in) {
  Trajectory traj;
  const auto rows = detail::read_json_lines(in, "trajectory");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    JointState s = joint_state_from_json(rows[i], "trajectory row " + std::to_string(i + 1));
    try {
      traj = record(std::move(traj), s.timestamp, s);
    } catch (const InputError& e) {
      throw ParseError("trajectory row " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return traj;
}

inline void write_trajectory(std::ostream& out, const Trajectory& traj) {
  for (const auto& s : traj.samples) out << to_json(s).dump() << '\n';
}

template <typename T, typename Reader>
T read_file(const std::filesystem::path& path, Reader reader) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return reader(in);
}

inline std::vector<HandSample> load_hand_samples(const std::filesystem::path& path) {
  return read_file<std::vector<HandSample>>(path, [](std::istream& in) { return read_hand_samples(in); });
}

inline Trajectory load_trajectory(const std::filesystem::path& path) {
  return read_file<Trajectory>(path, [](std::istream& in) { return read_trajectory(in); });
}

}  // namespace handguide
