#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "handguide/streams.hpp"

using namespace handguide;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("handguide_cli_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

int run(const std::string& args) {
  const std::string cmd = std::string(HANDGUIDE_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Cli, GuideArcMatchesOracle) {
  const auto hands_path = scratch("arc.jsonl");
  {
    std::vector<HandSample> hands;
    for (int k = 0; k <= 30; ++k) {
      const double a = 0.01 * k;
      hands.push_back({Vec3(0.8 * std::cos(a), 0.8 * std::sin(a), 0), (k + 1) / 30.0, true});
    }
    std::ofstream out(hands_path);
    write_hand_samples(out, hands);
  }
  const auto out = scratch("arc_cmd.jsonl"), trace = scratch("arc_trace.csv");
  ASSERT_EQ(run("guide --chain " + fixtures::data("planar1.json") + " --hands " + hands_path.string() + " --out " +
                out.string() + " --trace " + trace.string()),
            0);
  const auto cmds = load_trajectory(out);
  ASSERT_EQ(cmds.size(), 30u);
  for (std::size_t k = 0; k < cmds.size(); ++k) EXPECT_NEAR(cmds.samples[k].angles[0], 0.01 * (k + 1), 1e-9);
  const auto rows = lines(trace);
  ASSERT_GT(rows.size(), 2u);
  EXPECT_EQ(rows.front(), "t,cmd_1,state_1");

  // K scales the same stream linearly
  ASSERT_EQ(run("guide --k 2 --chain " + fixtures::data("planar1.json") + " --hands " + hands_path.string() +
                " --out " + out.string()),
            0);
  EXPECT_NEAR(load_trajectory(out).samples.back().angles[0], 0.6, 1e-9);
}

TEST(Cli, RegisterIsDeterministic) {
  const auto scene = scratch("scene.ply");
  ASSERT_EQ(run("synth-scene --chain " + fixtures::data("planar2.json") + " --samples 3000 --noise 0.001 --out " +
                scene.string()),
            0);
  const auto a = scratch("reg_a.json"), b = scratch("reg_b.json"), csv = scratch("reg.csv");
  const std::string common = "register --chain " + fixtures::data("planar2.json") + " --scene " + scene.string() +
                             " --samples 1000 --seed-pos 0.03 -0.02 0 --seed-yaw-deg 4";
  ASSERT_EQ(run(common + " --out " + a.string() + " --csv " + csv.string()), 0);
  ASSERT_EQ(run(common + " --out " + b.string()), 0);
  EXPECT_EQ(slurp(a), slurp(b));
  const auto result = nlohmann::json::parse(slurp(a));
  EXPECT_TRUE(result["converged"].get<bool>());
  EXPECT_LT(result["rms"].get<double>(), 0.01);
  EXPECT_EQ(lines(csv).front(), "iteration,rms_before,rms_after,correspondences");
}

TEST(Cli, RotationSweepHasTwentyRows) {
  const auto scene = scratch("sweep_scene.ply");
  ASSERT_EQ(run("synth-scene --chain " + fixtures::data("planar2.json") + " --samples 2000 --out " + scene.string()),
            0);
  const auto out = scratch("sweep.csv");
  ASSERT_EQ(run("sweep --kind rotation --chain " + fixtures::data("planar2.json") + " --scene " + scene.string() +
                " --samples 500 --out " + out.string()),
            0);
  int rotation_rows = 0;
  for (const auto& l : lines(out)) rotation_rows += l.rfind("rotation,", 0) == 0;
  EXPECT_EQ(rotation_rows, 20);
}

TEST(Cli, ReplayWritesTrace) {
  const auto traj = scratch("traj.jsonl");
  {
    Trajectory t;
    for (int k = 0; k < 20; ++k) t.samples.push_back({{0.01 * k}, k / 10.0});
    std::ofstream out(traj);
    write_trajectory(out, t);
  }
  const auto out = scratch("replay.csv");
  ASSERT_EQ(run("replay --chain " + fixtures::data("planar1.json") + " --trajectory " + traj.string() +
                " --rate 10 --out " + out.string()),
            0);
  const auto rows = lines(out);
  ASSERT_GE(rows.size(), 21u);
  EXPECT_EQ(rows.front(), "t,cmd_1,state_1");
}

TEST(Cli, BadInputExitsNonZero) {
  const auto bad = scratch("bad.jsonl");
  std::ofstream(bad) << "{\"t\": 0.0, \"pos\": [1, 2]}\n";
  EXPECT_EQ(run("guide --chain " + fixtures::data("planar1.json") + " --hands " + bad.string() + " --out " +
                scratch("x.jsonl").string()),
            2);
  EXPECT_NE(run("guide --chain /nonexistent.json --hands " + bad.string() + " --out x"), 0);
  EXPECT_NE(run("frobnicate"), 0);
  EXPECT_NE(run(""), 0);
}
