// handguide command line: batch guidance, registration, sweeps, replay and
// the live session service.

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "handguide/offline.hpp"
#include "handguide/registration.hpp"
#include "handguide/report.hpp"
#include "handguide/server.hpp"
#include "handguide/session.hpp"
#include "handguide/streams.hpp"
#include "handguide/synthetic.hpp"

namespace hg = handguide;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw hg::InputError("cannot write " + path);
  return out;
}

hg::JointState state_or_home(const hg::KinematicChain& chain, const std::vector<double>& angles) {
  if (angles.empty()) return hg::home_state(chain);
  hg::JointState s{angles, 0.0};
  if (!hg::within_limits(chain, s)) throw hg::ValidationError("--angles must have one in-limit value per joint");
  return s;
}

hg::SeedPose make_seed(const std::vector<double>& pos, double yaw_deg, double crop_radius) {
  hg::SeedPose seed;
  seed.pose.translation = hg::Vec3(pos[0], pos[1], pos[2]);
  seed.pose.rotation = hg::Quaternion::from_axis_angle(hg::Vec3::UnitZ(), yaw_deg * M_PI / 180.0);
  seed.crop_radius = crop_radius;
  return seed;
}

hg::SessionServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->request_stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sensorless hand guidance and robot referencing"};
  app.require_subcommand(1);

  std::string chain_path;
  std::string out_path;
  double k = 1.0;
  double zone_scale = 1.5;
  double rate = 100.0;
  std::uint64_t rng_seed = 1;

  // guide
  auto* guide = app.add_subcommand("guide", "hand trajectory -> joint command trajectory");
  std::string hands_path, trace_path;
  double settle = 2.0;
  guide->add_option("--chain", chain_path, "chain description (JSON)")->required()->check(CLI::ExistingFile);
  guide->add_option("--hands", hands_path, "hand samples, one JSON object per line")->required()->check(CLI::ExistingFile);
  guide->add_option("--out", out_path, "joint trajectory output (JSON lines)")->required();
  guide->add_option("--k", k, "motion scaling factor")->check(CLI::PositiveNumber);
  guide->add_option("--zone-scale", zone_scale, "active zone inflation")->check(CLI::Range(1.0, 100.0));
  guide->add_option("--rate", rate, "controller clock rate, Hz")->check(CLI::PositiveNumber);
  guide->add_option("--trace", trace_path, "command-vs-state CSV");
  guide->add_option("--settle", settle, "seconds of clock after the last sample")->check(CLI::NonNegativeNumber);

  // register / sweep share inputs
  std::string scene_path, csv_path, kind = "both";
  std::vector<double> seed_pos{0.0, 0.0, 0.0}, angles;
  double seed_yaw_deg = 0.0, crop_radius = 2.5;
  std::size_t samples = hg::kSmallCloud.samples;
  hg::IcpConfig icp;
  auto add_registration_options = [&](CLI::App* sub) {
    sub->add_option("--chain", chain_path, "chain description (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--scene", scene_path, "scene cloud (PLY)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed-pos", seed_pos, "seed position x y z, m")->expected(3);
    sub->add_option("--seed-yaw-deg", seed_yaw_deg, "seed yaw, degrees");
    sub->add_option("--crop-radius", crop_radius, "scene crop radius, m")->check(CLI::PositiveNumber);
    sub->add_option("--angles", angles, "known joint state, rad (default: home)");
    sub->add_option("--samples", samples, "model cloud size")->check(CLI::PositiveNumber);
    sub->add_option("--seed", rng_seed, "sampling RNG seed");
    sub->add_option("--max-iterations", icp.max_iterations)->check(CLI::PositiveNumber);
    sub->add_option("--max-distance", icp.max_correspondence_distance, "correspondence rejection, m")
        ->check(CLI::PositiveNumber);
    sub->add_option("--mls-radius", icp.mls_radius, "m")->check(CLI::PositiveNumber);
  };
  auto* reg = app.add_subcommand("register", "register the robot model to a scene cloud");
  add_registration_options(reg);
  reg->add_option("--out", out_path, "result JSON")->required();
  reg->add_option("--csv", csv_path, "per-iteration CSV");

  auto* sweep = app.add_subcommand("sweep", "seed perturbation robustness sweep");
  add_registration_options(sweep);
  sweep->add_option("--out", out_path, "report CSV")->required();
  sweep->add_option("--kind", kind, "rotation, translation or both")
      ->check(CLI::IsMember({"rotation", "translation", "both"}));

  // replay
  auto* rep = app.add_subcommand("replay", "drive the controller with a recorded trajectory");
  std::string traj_path;
  rep->add_option("--chain", chain_path, "chain description (JSON)")->required()->check(CLI::ExistingFile);
  rep->add_option("--trajectory", traj_path, "joint trajectory (JSON lines)")->required()->check(CLI::ExistingFile);
  rep->add_option("--rate", rate, "replay rate, Hz")->check(CLI::PositiveNumber);
  rep->add_option("--out", out_path, "controller trace CSV")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "live session service (line-delimited JSON over TCP)");
  std::string host = "127.0.0.1";
  std::uint16_t port = 7878;
  bool wall_clock = false;
  serve->add_option("--chain", chain_path, "chain loaded into each new session");
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--rate", rate, "controller clock rate, Hz")->check(CLI::PositiveNumber);
  serve->add_option("--k", k, "motion scaling factor")->check(CLI::PositiveNumber);
  serve->add_option("--zone-scale", zone_scale, "active zone inflation")->check(CLI::Range(1.0, 100.0));
  serve->add_option("--seed", rng_seed, "sampling RNG seed");
  serve->add_flag("--wall-clock", wall_clock, "tick the controller in real time");

  // synthetic scene
  auto* synth = app.add_subcommand("synth-scene", "write a synthetic referencing scene");
  std::vector<double> robot_pos{0.0, 0.0, 0.0};
  double robot_yaw_deg = 0.0, noise = 0.002;
  std::size_t clutter = 0;
  synth->add_option("--chain", chain_path)->required()->check(CLI::ExistingFile);
  synth->add_option("--angles", angles, "joint state, rad (default: home)");
  synth->add_option("--robot-pos", robot_pos, "robot base position, m")->expected(3);
  synth->add_option("--robot-yaw-deg", robot_yaw_deg);
  synth->add_option("--noise", noise, "Gaussian noise sigma, m")->check(CLI::NonNegativeNumber);
  synth->add_option("--clutter", clutter, "uniform clutter points");
  synth->add_option("--samples", samples, "robot surface samples")->check(CLI::PositiveNumber);
  synth->add_option("--seed", rng_seed);
  synth->add_option("--out", out_path, "scene PLY")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*guide) {
      auto chain = std::make_shared<const hg::KinematicChain>(hg::load_chain(chain_path));
      hg::SessionOptions opt;
      opt.clock_rate = rate;
      opt.guidance.motion_scale = k;
      opt.guidance.active_zone_scale = zone_scale;
      const auto run = hg::run_guide(chain, hg::load_hand_samples(hands_path), opt, settle);
      for (const auto& w : run.warnings) std::cerr << "warning: " << w << '\n';
      auto out = open_out(out_path);
      for (const auto& c : run.commands) out << hg::to_json(c).dump() << '\n';
      if (!trace_path.empty()) {
        auto trace = open_out(trace_path);
        hg::write_trace_csv(trace, run.trace);
      }
      std::cout << run.commands.size() << " commands, " << run.trace.size() << " controller ticks\n";
      return 0;
    }

    if (*reg || *sweep) {
      const auto chain = hg::load_chain(chain_path);
      const auto state = state_or_home(chain, angles);
      const auto model = hg::model_cloud(chain, state, samples, rng_seed);
      const auto scene = hg::load_cloud(scene_path);
      const auto seed = make_seed(seed_pos, seed_yaw_deg, crop_radius);
      if (*reg) {
        const auto r = hg::register_model(model, scene, seed, icp);
        nlohmann::json result = {{"pose", hg::pose_to_json(r.pose)},
                                 {"rms", std::isfinite(r.rms) ? nlohmann::json(r.rms) : nlohmann::json(nullptr)},
                                 {"iterations", r.iterations},
                                 {"converged", r.converged},
                                 {"inlier_fraction", r.inlier_fraction}};
        open_out(out_path) << result.dump(2) << '\n';
        if (!csv_path.empty()) {
          auto csv = open_out(csv_path);
          csv << "iteration,rms_before,rms_after,correspondences\n" << std::setprecision(12);
          for (std::size_t i = 0; i < r.history.size(); ++i) {
            const auto& h = r.history[i];
            csv << i + 1 << ',' << h.rms_before << ',' << h.rms_after << ',' << h.correspondences << '\n';
          }
        }
        std::cout << result.dump() << '\n';
        return r.converged ? 0 : 3;
      }
      hg::SweepOptions so;
      so.rotation = kind != "translation";
      so.translation = kind != "rotation";
      const auto report = hg::robustness_sweep(model, scene, seed, icp, so);
      auto out = open_out(out_path);
      hg::write_sweep_csv(out, report, so);
      std::cout << report.entries.size() << " runs, " << report.icp_all.count << " converged, mean icp rms "
                << report.icp_all.mean << " m, mean seed rms " << report.seed.mean << " m\n";
      return 0;
    }

    if (*rep) {
      const auto chain = hg::load_chain(chain_path);
      const auto traj = hg::load_trajectory(traj_path);
      if (traj.empty()) throw hg::InputError("trajectory is empty");
      for (const auto& s : traj.samples) {
        if (!hg::within_limits(chain, s)) throw hg::ValidationError("trajectory leaves the joint limits");
      }
      auto start = traj.samples.front();
      start.timestamp = 0.0;
      const auto states = hg::replay(traj, hg::make_controller(chain, start), rate);
      std::vector<hg::TraceRow> rows;
      for (std::size_t i = 0; i < states.size(); ++i) {
        const auto& target = traj.samples[std::min(i, traj.size() - 1)];
        rows.push_back({states[i].timestamp, target.angles, states[i].angles});
      }
      auto out = open_out(out_path);
      hg::write_trace_csv(out, rows);
      std::cout << rows.size() << " ticks\n";
      return 0;
    }

    if (*serve) {
      hg::SessionServer::Options so;
      so.host = host;
      so.port = port;
      so.wall_clock = wall_clock;
      so.initial_chain = chain_path;
      so.session.clock_rate = rate;
      so.session.guidance.motion_scale = k;
      so.session.guidance.active_zone_scale = zone_scale;
      so.session.rng_seed = rng_seed;
      hg::SessionServer server(so);
      const auto bound = server.listen();
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "listening on " << host << ':' << bound << (wall_clock ? " (wall clock)" : " (message clock)")
                << std::endl;
      server.serve();
      server.stop();
      return 0;
    }

    if (*synth) {
      const auto chain = hg::load_chain(chain_path);
      hg::SceneSpec spec;
      spec.state = state_or_home(chain, angles);
      spec.robot_pose.translation = hg::Vec3(robot_pos[0], robot_pos[1], robot_pos[2]);
      spec.robot_pose.rotation = hg::Quaternion::from_axis_angle(hg::Vec3::UnitZ(), robot_yaw_deg * M_PI / 180.0);
      spec.robot_samples = samples;
      spec.noise_sigma = noise;
      spec.clutter_points = clutter;
      spec.rng_seed = rng_seed;
      hg::save_cloud(out_path, hg::synthetic_scene(chain, spec));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
