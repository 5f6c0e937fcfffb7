#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <string>

#include "handguide/chain.hpp"

namespace fixtures {

inline std::string data(const std::string& name) { return std::string(HANDGUIDE_DATA_DIR) + "/" + name; }

inline const handguide::KinematicChain& planar1() {
  static const auto c = handguide::load_chain(data("planar1.json"));
  return c;
}
inline const handguide::KinematicChain& planar2() {
  static const auto c = handguide::load_chain(data("planar2.json"));
  return c;
}
inline const handguide::KinematicChain& kr5() {
  static const auto c = handguide::load_chain(data("kr5_like.json"));
  return c;
}

inline handguide::Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  handguide::Vec3 v;
  do {
    v = handguide::Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-3);
  return v.normalized();
}

/// Uniform state strictly inside the limits, narrowed by `margin` on each side.
inline handguide::JointState random_state(const handguide::KinematicChain& chain, std::mt19937_64& rng,
                                          double margin = 0.0) {
  handguide::JointState s;
  for (const auto& j : chain.joints) {
    std::uniform_real_distribution<double> u(j.limits.lower + margin, j.limits.upper - margin);
    s.angles.push_back(u(rng));
  }
  return s;
}

}  // namespace fixtures
