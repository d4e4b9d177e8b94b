#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "test_support.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int status = -1;
  std::string output;  // stdout and stderr interleaved
};

CliRun run_cli(const std::string& args) {
  const std::string command = std::string(MODELSEG_CLI_PATH) + " " + args + " 2>&1";
  CliRun run;
  FILE* pipe = popen(command.c_str(), "r");
  if (pipe == nullptr) return run;
  std::array<char, 4096> buffer;
  std::size_t n;
  while ((n = fread(buffer.data(), 1, buffer.size(), pipe)) > 0) run.output.append(buffer.data(), n);
  const int raw = pclose(pipe);
  run.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return run;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// A small synthetic scene written once by `modelseg synth`.
const fs::path& scene_dir() {
  static const fs::path dir = [] {
    const fs::path d = modelseg::testing::scratch_dir("cli_scene");
    const CliRun run = run_cli("synth --width 96 --height 96 --seed 3 --out-dir " + d.string());
    EXPECT_EQ(run.status, 0) << run.output;
    return d;
  }();
  return dir;
}

}  // namespace

TEST(Cli, MissingSubcommandIsAUsageError) { EXPECT_EQ(run_cli("").status, 2); }

TEST(Cli, UnknownFlagAndBadNormAreUsageErrors) {
  EXPECT_EQ(run_cli("render --bogus 1").status, 2);
  EXPECT_EQ(run_cli("pipeline --synthetic --k 3").status, 2);
}

TEST(Cli, PhotoModePipelineWithoutRoughPoseIsAUsageError) {
  const auto& d = scene_dir();
  const CliRun run = run_cli("pipeline --photo " + (d / "photo.png").string() + " --mesh " +
                           (d / "toy_car.obj").string());
  EXPECT_EQ(run.status, 2) << run.output;
  EXPECT_NE(run.output.find("--rough-pose"), std::string::npos) << run.output;
}

TEST(Cli, UnknownPartFailsAndListsTheAvailableParts) {
  const auto out = modelseg::testing::scratch_dir("cli_unknown_part");
  const CliRun run = run_cli("pipeline --synthetic --width 64 --height 64 --parts spoiler --out-dir " +
                           out.string());
  EXPECT_EQ(run.status, 1) << run.output;
  EXPECT_NE(run.output.find("spoiler"), std::string::npos) << run.output;
  EXPECT_NE(run.output.find("available: "), std::string::npos) << run.output;
  EXPECT_NE(run.output.find("body"), std::string::npos) << run.output;
}

TEST(Cli, SynthWritesSceneAndGroundTruth) {
  const auto& d = scene_dir();
  for (const char* name :
       {"photo.png", "pose.json", "rough_pose.json", "toy_car.obj", "toy_car.datum.json"}) {
    EXPECT_TRUE(fs::exists(d / name)) << name;
  }
  EXPECT_TRUE(fs::exists(d / "truth" / "body.png"));
  const auto pose = nlohmann::json::parse(slurp(d / "pose.json"));
  EXPECT_TRUE(pose.contains("mu"));
  EXPECT_TRUE(pose.contains("f"));
}

TEST(Cli, RenderWritesBuffers) {
  const auto& d = scene_dir();
  const auto out = modelseg::testing::scratch_dir("cli_render");
  const CliRun run = run_cli("render --mesh " + (d / "toy_car.obj").string() + " --pose " +
                           (d / "pose.json").string() +
                           " --width 96 --height 96 --out-dir " + out.string());
  ASSERT_EQ(run.status, 0) << run.output;
  for (const char* name : {"normals.png", "part_id.png", "silhouette.png", "normals.raw"}) {
    EXPECT_TRUE(fs::exists(out / name)) << name;
  }
}

TEST(Cli, EvaluateTruthAgainstItselfIsOne) {
  const auto& d = scene_dir();
  const std::string truth = (d / "truth" / "body.png").string();
  const CliRun run = run_cli("evaluate --result " + truth + " --truth " + truth);
  ASSERT_EQ(run.status, 0) << run.output;
  EXPECT_EQ(nlohmann::json::parse(run.output)["accuracy"], 1.0);
  EXPECT_EQ(run_cli("evaluate --result " + truth).status, 2);
}

TEST(Cli, SegmentAtTheTruePoseWritesMetrics) {
  const auto& d = scene_dir();
  const auto out = modelseg::testing::scratch_dir("cli_segment");
  const CliRun run = run_cli("segment --mesh " + (d / "toy_car.obj").string() + " --photo " +
                           (d / "photo.png").string() + " --pose " +
                           (d / "pose.json").string() + " --parts body,cabin --out-dir " +
                           out.string());
  ASSERT_EQ(run.status, 0) << run.output;
  const auto metrics = nlohmann::json::parse(slurp(out / "metrics.json"));
  EXPECT_EQ(metrics["schema"], 1);
  ASSERT_EQ(metrics["parts"].size(), 2u);
  EXPECT_EQ(metrics["parts"][0]["name"], "body");
  EXPECT_TRUE(fs::exists(out / "masks" / "cabin.png"));
  EXPECT_TRUE(fs::exists(out / "overlays" / "cabin.png"));
  EXPECT_TRUE(fs::exists(out / "contours" / "cabin.json"));
}

TEST(Cli, RegisterRefinesTheRoughPose) {
  const auto& d = scene_dir();
  const auto out = modelseg::testing::scratch_dir("cli_register");
  const CliRun run = run_cli("register --mesh " + (d / "toy_car.obj").string() + " --photo " +
                           (d / "photo.png").string() + " --rough-pose " +
                           (d / "rough_pose.json").string() + " --out-dir " + out.string());
  ASSERT_EQ(run.status, 0) << run.output;
  EXPECT_TRUE(fs::exists(out / "pose.json"));
  EXPECT_FALSE(slurp(out / "trace.jsonl").empty());
  EXPECT_NE(run.output.find("loss "), std::string::npos);
}

TEST(Cli, SweepWritesOneCsvPerLevel) {
  const auto out = modelseg::testing::scratch_dir("cli_sweep");
  const CliRun run = run_cli(
      "sweep --synthetic --width 96 --height 96 --param delta_x --range 10 --samples 5 "
      "--levels 1,0 --out-dir " +
      out.string());
  ASSERT_EQ(run.status, 0) << run.output;
  const std::string csv = slurp(out / "sweep_delta_x_n0.csv");
  EXPECT_EQ(csv.rfind("param,offset_pct,loss_k1,loss_k2\n", 0), 0u) << csv;
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
  EXPECT_TRUE(fs::exists(out / "sweep_delta_x_n1.csv"));
}
