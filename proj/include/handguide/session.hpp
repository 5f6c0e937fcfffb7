#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "handguide/chain.hpp"
#include "handguide/controller.hpp"
#include "handguide/guidance.hpp"
#include "handguide/registration.hpp"
#include "handguide/streams.hpp"

namespace handguide {

/// Hand stream -> joint command, one sample at a time. Holds h_{t-1}, the
/// commanded state and the link locked by the current grasp.
class GuidanceStream {
 public:
  struct Step {
    std::optional<std::size_t> highlight;  // link under (or held by) the hand
    std::optional<GuidanceUpdate> update;  // present when the grasp moved the chain
    JointState command;
  };

  GuidanceStream(std::shared_ptr<const KinematicChain> chain, GuidanceConfig cfg, JointState start)
      : chain_(std::move(chain)), cfg_(cfg), command_(std::move(start)) {
    cfg_.validate();
    check_state_size(*chain_, command_);
    hulls_ = local_link_hulls(*chain_);
  }

  /// `hand.position` must already be in the robot base frame. Samples whose
  /// timestamp does not increase throw InputError and change nothing.
  Step step(const HandSample& hand) {
    if (previous_ && !(hand.timestamp > previous_->timestamp)) {
      throw InputError("stale hand sample at t=" + std::to_string(hand.timestamp));
    }
    const ActiveZone zone = build_active_zone(*chain_, command_, cfg_.active_zone_scale, hulls_);
    const auto hovered = active_link(zone, hand.position);

    Step out;
    if (hand.grasping) {
      if (previous_ && previous_->grasping && locked_) {
        GuidanceUpdate u = propagate_hand_motion(*chain_, command_, *locked_, previous_->position, hand.position, cfg_);
        command_ = u.new_state;
        out.update = std::move(u);
      } else if (!(previous_ && previous_->grasping)) {
        locked_ = hovered;
      }
      out.highlight = locked_ ? locked_ : hovered;
    } else {
      locked_.reset();
      out.highlight = hovered;
    }
    command_.timestamp = hand.timestamp;
    previous_ = hand;
    out.command = command_;
    return out;
  }

  const JointState& command() const { return command_; }
  void set_command(JointState s) { command_ = std::move(s); }
  const GuidanceConfig& config() const { return cfg_; }
  void set_config(const GuidanceConfig& cfg) {
    cfg.validate();
    cfg_ = cfg;
  }
  /// Forgets h_{t-1} and the grasp, e.g. after a mode switch.
  void reset_hand() {
    previous_.reset();
    locked_.reset();
  }
  std::optional<double> last_timestamp() const {
    return previous_ ? std::optional<double>(previous_->timestamp) : std::nullopt;
  }

 private:
  std::shared_ptr<const KinematicChain> chain_;
  GuidanceConfig cfg_;
  JointState command_;
  std::vector<std::optional<ConvexHull>> hulls_;
  std::optional<HandSample> previous_;
  std::optional<std::size_t> locked_;
};

enum class Mode { idle, link_guidance, ee_drag, replay };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::idle: return "idle";
    case Mode::link_guidance: return "link_guidance";
    case Mode::ee_drag: return "ee_drag";
    case Mode::replay: return "replay";
  }
  return "idle";
}

struct SessionOptions {
  double clock_rate = 100.0;  // Hz
  /// When set, timestamped inbound messages advance the clock to their time
  /// before being handled, so a session is a pure function of its input.
  bool message_clock = true;
  GuidanceConfig guidance;
  IcpConfig icp;
  std::size_t model_samples = kSmallCloud.samples;
  std::uint64_t rng_seed = 1;
};

inline nlohmann::json pose_to_json(const RigidTransform& p) {
  const Quaternion q = p.rotation.canonical();
  return {{"pos", to_json(p.translation)}, {"quat", {q.w, q.x, q.y, q.z}}};
}

inline RigidTransform pose_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  if (!j.contains("pos")) throw ParseError(where + ": missing 'pos'");
  RigidTransform p;
  p.translation = detail::json_vec3(j.at("pos"), where + ".pos");
  if (j.contains("quat")) {
    const auto q = detail::json_numbers(j.at("quat"), where + ".quat");
    if (q.size() != 4) throw ParseError(where + ".quat: expected [w, x, y, z]");
    const Quaternion raw{q[0], q[1], q[2], q[3]};
    if (!(raw.norm() > 1e-9) || !std::isfinite(raw.norm())) throw ParseError(where + ".quat: degenerate quaternion");
    p.rotation = raw.normalized();
  }
  return p;
}

/// One guidance session. All state changes go through `handle`, which
/// validates each message before touching anything and answers with
/// outbound messages; errors become {"type":"error"} replies.
class Session {
 public:
  using json = nlohmann::json;

  explicit Session(SessionOptions options = {}) : options_(options) {
    if (!(options_.clock_rate > 0.0)) throw ValidationError("clock rate must be positive");
    options_.guidance.validate();
    options_.icp.validate();
  }

  // --- wire entry points -----------------------------------------------------

  std::vector<json> handle_line(std::string_view line) {
    json msg;
    try {
      msg = json::parse(line);
    } catch (const json::parse_error& e) {
      return {error(std::string("malformed message: ") + e.what())};
    }
    return handle(msg);
  }

  std::vector<json> handle(const json& msg) {
    try {
      if (!msg.is_object() || !msg.contains("type") || !msg.at("type").is_string()) {
        throw ParseError("message needs a string 'type'");
      }
      const auto type = msg.at("type").get<std::string>();
      if (type == "load_chain") return on_load_chain(msg);
      if (type == "hand") return on_hand(msg);
      if (type == "drag_ee") return on_drag(msg);
      if (type == "register") return on_register(msg);
      if (type == "set_config") return on_set_config(msg);
      if (type == "set_transform") return on_set_transform(msg);
      if (type == "mode") return on_mode(msg);
      if (type == "record") return on_record(msg);
      if (type == "replay") return on_replay(msg);
      if (type == "tick") return on_tick(msg);
      throw ParseError("unknown message type '" + type + "'");
    } catch (const std::exception& e) {
      return {error(e.what())};
    }
  }

  // --- typed API -------------------------------------------------------------

  void load_chain(std::shared_ptr<const KinematicChain> chain) {
    JointState home = home_state(*chain);
    home.timestamp = 0.0;
    chain_ = std::move(chain);
    controller_ = make_controller(*chain_, home);
    guidance_.emplace(chain_, options_.guidance, home);
    mode_ = Mode::idle;
    tick_index_ = 0;
    recording_.reset();
    replay_.reset();
    robot_in_world_ = RigidTransform::identity();
    highlight_.reset();
  }

  /// Runs the guidance step for one sample (scene frame) and retargets the
  /// controller. Requires link_guidance mode.
  std::vector<json> handle_hand_sample(const HandSample& sample) {
    require_chain();
    if (mode_ != Mode::link_guidance) throw InputError("hand samples need link_guidance mode");
    std::vector<json> out;
    if (options_.message_clock) out = advance_clock(sample.timestamp);
    HandSample local = sample;
    local.position = robot_in_world_.inverse().apply(sample.position);
    GuidanceStream::Step step;
    try {
      step = guidance_->step(local);
    } catch (const InputError& e) {
      out.push_back(error(e.what()));
      return out;
    }
    if (step.highlight != highlight_) {
      highlight_ = step.highlight;
      out.push_back(highlight_message());
    }
    if (step.update) {
      controller_ = set_target(std::move(*controller_), step.command);
      out.push_back(target_message(step.command, step.update->touched_joints, step.update->residual));
    }
    return out;
  }

  /// Crop, smooth and register the model at the current joint state; on
  /// success the result becomes the robot pose used for hand samples.
  json handle_registration_request(const PointCloud& scene, const SeedPose& seed) {
    require_chain();
    const PointCloud model = model_cloud(*chain_, controller_->current, options_.model_samples, options_.rng_seed);
    const RegistrationResult r = register_model(model, scene, seed, options_.icp);
    if (r.converged) robot_in_world_ = r.pose;
    json msg = {{"type", "registration"},
                {"pose", pose_to_json(r.pose)},
                {"rms", std::isfinite(r.rms) ? json(r.rms) : json(nullptr)},
                {"converged", r.converged},
                {"iterations", r.iterations},
                {"inlier_fraction", r.inlier_fraction}};
    return msg;
  }

  /// Ticks the controller at the clock rate for every tick time <= t and
  /// returns one state broadcast per tick.
  std::vector<json> advance_clock(double t) {
    std::vector<json> out;
    if (!chain_) return out;
    const double dt = 1.0 / options_.clock_rate;
    while (static_cast<double>(tick_index_ + 1) * dt <= t + 1e-9) {
      ++tick_index_;
      const double now = static_cast<double>(tick_index_) * dt;
      if (mode_ == Mode::replay) feed_replay(now, out);
      controller_ = tick(std::move(*controller_), dt);
      controller_->time = now;
      controller_->current.timestamp = now;
      if (!within_limits(*chain_, controller_->current)) {
        throw std::logic_error("controller left the joint limits");
      }
      if (recording_) *recording_ = record(std::move(*recording_), now, controller_->current);
      out.push_back({{"type", "state"}, {"t", now}, {"angles", controller_->current.angles}});
    }
    return out;
  }

  double clock_time() const { return static_cast<double>(tick_index_) / options_.clock_rate; }
  Mode mode() const { return mode_; }
  bool has_chain() const { return static_cast<bool>(chain_); }
  const KinematicChain& chain() const { return *chain_; }
  const ControllerState& controller() const { return *controller_; }
  const JointState& command() const { return guidance_->command(); }
  const RigidTransform& robot_in_world() const { return robot_in_world_; }
  bool recording() const { return recording_.has_value(); }
  const std::optional<Trajectory>& recorded() const { return recording_; }
  const SessionOptions& options() const { return options_; }

 private:
  static json error(const std::string& msg) { return {{"type", "error"}, {"msg", msg}}; }

  json highlight_message() const {
    return {{"type", "highlight"}, {"link", highlight_ ? json(*highlight_) : json(nullptr)}};
  }

  static json target_message(const JointState& cmd, const std::vector<std::size_t>& touched, const Vec3& residual) {
    return {{"type", "target"}, {"t", cmd.timestamp}, {"angles", cmd.angles},
            {"touched", touched},  {"residual", to_json(residual)}};
  }

  void require_chain() const {
    if (!chain_) throw InputError("no chain loaded");
  }

  static bool boolean(const json& msg, const char* key) {
    if (!msg.contains(key) || !msg.at(key).is_boolean()) throw ParseError(std::string("'") + key + "' must be a boolean");
    return msg.at(key).get<bool>();
  }

  static std::string string_field(const json& msg, const char* key) {
    if (!msg.contains(key) || !msg.at(key).is_string()) throw ParseError(std::string("'") + key + "' must be a string");
    return msg.at(key).get<std::string>();
  }

  std::vector<json> on_load_chain(const json& msg) {
    const auto path = string_field(msg, "path");
    load_chain(std::make_shared<const KinematicChain>(handguide::load_chain(path)));
    return {{{"type", "chain"}, {"name", chain_->name}, {"joints", chain_->joint_count()}},
            {{"type", "state"}, {"t", clock_time()}, {"angles", controller_->current.angles}}};
  }

  std::vector<json> on_hand(const json& msg) {
    const HandSample s = hand_sample_from_json(msg, "hand");
    return handle_hand_sample(s);
  }

  std::vector<json> on_drag(const json& msg) {
    require_chain();
    if (mode_ != Mode::ee_drag) throw InputError("drag_ee needs ee_drag mode");
    if (!msg.contains("pose")) throw ParseError("drag_ee: missing 'pose'");
    const RigidTransform target = robot_in_world_.inverse() * pose_from_json(msg.at("pose"), "drag_ee.pose");
    std::vector<json> out;
    if (options_.message_clock && msg.contains("t")) {
      out = advance_clock(detail::json_number(msg, "t", "drag_ee"));
    }
    const GuidanceUpdate u = drag_end_effector(*chain_, guidance_->command(), target);
    if (u.target_reached) {
      guidance_->set_command(u.new_state);
      controller_ = set_target(std::move(*controller_), u.new_state);
    }
    json reply = target_message(u.new_state, u.touched_joints, u.residual);
    reply["reached"] = u.target_reached;
    out.push_back(reply);
    return out;
  }

  std::vector<json> on_register(const json& msg) {
    require_chain();
    PointCloud scene;
    if (msg.contains("scene_path")) {
      scene = load_cloud(string_field(msg, "scene_path"));
    } else if (msg.contains("inline")) {
      const auto& pts = msg.at("inline");
      if (!pts.is_array()) throw ParseError("register.inline: expected an array of points");
      for (std::size_t i = 0; i < pts.size(); ++i) {
        scene.points.push_back(detail::json_vec3(pts[i], "register.inline[" + std::to_string(i) + "]"));
      }
    } else {
      throw ParseError("register: needs 'scene_path' or 'inline'");
    }
    if (!msg.contains("seed") || !msg.at("seed").is_object()) throw ParseError("register: missing 'seed'");
    const auto& s = msg.at("seed");
    SeedPose seed;
    if (!s.contains("pos")) throw ParseError("register.seed: missing 'pos'");
    seed.pose.translation = detail::json_vec3(s.at("pos"), "register.seed.pos");
    const double yaw = s.contains("yaw") ? detail::json_number(s, "yaw", "register.seed") : 0.0;
    seed.pose.rotation = Quaternion::from_axis_angle(Vec3::UnitZ(), yaw);
    if (s.contains("crop_radius")) seed.crop_radius = detail::json_number(s, "crop_radius", "register.seed");
    if (!(seed.crop_radius > 0.0)) throw ParseError("register.seed.crop_radius must be positive");
    return {handle_registration_request(scene, seed)};
  }

  std::vector<json> on_set_config(const json& msg) {
    GuidanceConfig cfg = guidance_ ? guidance_->config() : options_.guidance;
    if (msg.contains("k")) cfg.motion_scale = detail::json_number(msg, "k", "set_config");
    if (msg.contains("zone_scale")) cfg.active_zone_scale = detail::json_number(msg, "zone_scale", "set_config");
    cfg.validate();
    options_.guidance = cfg;
    if (guidance_) guidance_->set_config(cfg);
    return {{{"type", "config"}, {"k", cfg.motion_scale}, {"zone_scale", cfg.active_zone_scale}}};
  }

  std::vector<json> on_set_transform(const json& msg) {
    if (!msg.contains("pose")) throw ParseError("set_transform: missing 'pose'");
    robot_in_world_ = pose_from_json(msg.at("pose"), "set_transform.pose");
    return {{{"type", "transform"}, {"pose", pose_to_json(robot_in_world_)}}};
  }

  std::vector<json> on_mode(const json& msg) {
    const auto value = string_field(msg, "value");
    Mode next;
    if (value == "idle") next = Mode::idle;
    else if (value == "link_guidance") next = Mode::link_guidance;
    else if (value == "ee_drag") next = Mode::ee_drag;
    else if (value == "replay") throw InputError("replay mode is entered with a 'replay' message");
    else throw ParseError("unknown mode '" + value + "'");
    if (next != Mode::idle) require_chain();
    enter(next);
    return {mode_message()};
  }

  std::vector<json> on_record(const json& msg) {
    require_chain();
    const bool on = boolean(msg, "on");
    std::vector<json> out;
    if (on) {
      recording_.emplace();
    } else if (recording_) {
      if (msg.contains("path")) {
        std::ofstream file(string_field(msg, "path"));
        if (!file) throw InputError("cannot write recording");
        write_trajectory(file, *recording_);
      }
      out.push_back({{"type", "recorded"}, {"samples", recording_->size()}});
      recording_.reset();
    }
    out.push_back({{"type", "recording"}, {"on", recording_.has_value()}});
    return out;
  }

  std::vector<json> on_replay(const json& msg) {
    require_chain();
    Trajectory traj = load_trajectory(string_field(msg, "path"));
    if (traj.empty()) throw InputError("replay trajectory is empty");
    for (const auto& s : traj.samples) {
      if (!within_limits(*chain_, s)) throw ValidationError("replay trajectory leaves the joint limits");
    }
    enter(Mode::replay);
    replay_.emplace(ReplayState{std::move(traj), clock_time(), 0});
    return {mode_message()};
  }

  std::vector<json> on_tick(const json& msg) {
    return advance_clock(detail::json_number(msg, "t", "tick"));
  }

  json mode_message() const { return {{"type", "mode"}, {"value", to_string(mode_)}}; }

  void enter(Mode next) {
    mode_ = next;
    replay_.reset();
    if (guidance_) {
      guidance_->reset_hand();
      guidance_->set_command(controller_->target);
    }
    if (highlight_) highlight_.reset();
  }

  struct ReplayState {
    Trajectory trajectory;
    double start = 0.0;
    std::size_t next = 0;
  };

  void feed_replay(double now, std::vector<json>& out) {
    auto& r = *replay_;
    const double t0 = r.trajectory.samples.front().timestamp;
    while (r.next < r.trajectory.size() && r.trajectory.samples[r.next].timestamp - t0 <= now - r.start + 1e-9) {
      controller_ = set_target(std::move(*controller_), r.trajectory.samples[r.next]);
      ++r.next;
    }
    if (r.next == r.trajectory.size() && controller_->at_rest()) {
      guidance_->set_command(controller_->current);
      mode_ = Mode::idle;
      replay_.reset();
      out.push_back(mode_message());
    }
  }

  SessionOptions options_;
  std::shared_ptr<const KinematicChain> chain_;
  std::optional<ControllerState> controller_;
  std::optional<GuidanceStream> guidance_;
  Mode mode_ = Mode::idle;
  std::uint64_t tick_index_ = 0;
  std::optional<Trajectory> recording_;
  std::optional<ReplayState> replay_;
  RigidTransform robot_in_world_;
  std::optional<std::size_t> highlight_;
};

}  // namespace handguide
