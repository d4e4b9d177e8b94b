#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>
#include <json.hpp>

#include "modelseg/errors.hpp"
#include "modelseg/imgproc.hpp"
#include "modelseg/pipeline.hpp"
#include "modelseg/raster.hpp"
#include "modelseg/scene.hpp"
#include "test_support.hpp"

using namespace modelseg;
using modelseg::testing::filled_rect;
namespace fs = std::filesystem;

namespace {

CarModelDatum unit_datum() {
  CarModelDatum datum;
  datum.rear_wheel_center = {0, 0, 0};
  datum.front_wheel_center = {1, 0, 0};
  datum.rear_axle_dir = {0, 0, -1};
  return datum;
}

// Pose under which model (x, y) lands on pixel (32 x, 32 y), nearly
// orthographic, given unit_datum.
FullPose square_pose() {
  FullPose pose;
  pose.rough.mu = {0, 0};
  pose.rough.delta = {32, 0};
  pose.rough.psi = {0, 0};
  pose.f = 1e9;
  return pose;
}

SceneSpec flat_spec(TriangleMesh mesh) {
  SceneSpec spec;
  mesh.datum = unit_datum();
  spec.mesh = std::move(mesh);
  spec.pose = square_pose();
  spec.background = Background::kConstant;
  spec.background_top = 0.1;
  spec.noise_sigma = 0.0;
  return spec;
}

std::array<std::uint8_t, 3> pixel(const Rgb8Image& img, int u, int v) {
  const std::size_t i = (static_cast<std::size_t>(v) * img.width + u) * 3;
  return {img.pixels[i], img.pixels[i + 1], img.pixels[i + 2]};
}

std::array<std::uint8_t, 3> rgb(const std::uint8_t (&c)[3]) { return {c[0], c[1], c[2]}; }

// The standard scene at 256 px without noise and its rendered normals.
struct SmallScene {
  SceneSpec spec;
  SyntheticPhoto shot;
  ImageGrid normals;
};

const SmallScene& small_scene() {
  static const SmallScene s = [] {
    SmallScene out;
    out.spec = standard_scene(256, 256);
    out.spec.noise_sigma = 0.0;
    out.shot = synth_photo(out.spec, 256, 256);
    out.normals = render_normals(out.spec.mesh, out.spec.pose, 256, 256).normal;
    return out;
  }();
  return s;
}

}  // namespace

TEST(Accuracy, IdentityEmptyAndDisjointAreExact) {
  const auto u = filled_rect(20, 10, 2, 2, 8, 8);
  EXPECT_EQ(accuracy(u, u), 1.0);
  EXPECT_EQ(accuracy(BinaryGrid(20, 10), u), 0.0);
  EXPECT_EQ(accuracy(filled_rect(20, 10, 10, 2, 16, 8), u), -1.0);
}

TEST(Accuracy, RejectsEmptyTruthAndShapeMismatch) {
  EXPECT_THROW(accuracy(BinaryGrid(5, 5), BinaryGrid(5, 5)), ArgumentError);
  EXPECT_THROW(accuracy(BinaryGrid(5, 5), BinaryGrid(5, 4, true)), ArgumentError);
}

TEST(Accuracy, EachWrongPixelCostsOneOverTruthArea) {
  std::mt19937_64 rng(5);
  const auto truth = filled_rect(16, 16, 4, 4, 12, 12);  // 64 pixels
  BinaryGrid result = truth;
  double last = 1.0;
  std::uniform_int_distribution<int> pick(0, 15);
  for (int flips = 1; flips <= 40; ++flips) {
    int u, v;
    do {
      u = pick(rng);
      v = pick(rng);
    } while (result.at(u, v) != truth.at(u, v));
    result.set(u, v, !result.at(u, v));
    const double a = accuracy(result, truth);
    EXPECT_DOUBLE_EQ(a, 1.0 - flips / 64.0);
    EXPECT_LT(a, last);
    last = a;
  }
}

TEST(DefaultErodeRadius, ThreePixelsPerEightHundredOfDiagonal) {
  EXPECT_DOUBLE_EQ(default_erode_radius(480, 640), 3.0);
  EXPECT_NEAR(default_erode_radius(512, 512), 3.0 * std::sqrt(2.0) * 512 / 800, 1e-12);
}

TEST(SynthPhoto, EmptyViewIsTheBackground) {
  SceneSpec spec = flat_spec(modelseg::testing::facing_quad(0, 0, 1, 1, 0, "plate"));
  spec.pose.rough.mu = {-500, -500};
  const auto shot = synth_photo(spec, 16, 8);
  ASSERT_EQ(shot.photo.channels(), 3);
  for (double x : shot.photo.data()) EXPECT_EQ(x, 0.1);
  EXPECT_FALSE(shot.ground_truth.contains("plate") && shot.ground_truth.at("plate").any());
}

TEST(SynthPhoto, FacingSquareUnderViewAxisLightIsItsAlbedo) {
  SceneSpec spec = flat_spec(modelseg::testing::facing_quad(0, 0, 1, 1, 0, "plate"));
  spec.light = {0, 0, 2};
  spec.albedo = {0.9, 0.5, 0.2};
  const auto shot = synth_photo(spec, 64, 40);
  for (int v = 0; v < 40; ++v) {
    for (int u = 0; u < 64; ++u) {
      const bool in = u < 32 && v < 32;
      for (int c = 0; c < 3; ++c) {
        EXPECT_NEAR(shot.photo.at(u, v, c), in ? spec.albedo[c] : 0.1, 1e-12);
      }
    }
  }
  EXPECT_EQ(shot.ground_truth.at("plate"), filled_rect(64, 40, 0, 0, 32, 32));
}

TEST(SynthPhoto, TiltedFaceFollowsLambert) {
  TriangleMesh mesh;
  mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0.5}, {0, 1, 0.5}};
  mesh.triangles = {{0, 1, 2}, {0, 2, 3}};
  mesh = compute_face_normals(std::move(mesh));
  mesh.parts["slope"] = {0, 1};
  SceneSpec spec = flat_spec(mesh);
  spec.albedo = {0.8, 0.6, 0.4};
  // Cross product of the two edges at vertex 0: (0, -0.5, 1).
  const Eigen::Vector3d n = Eigen::Vector3d(0, -0.5, 1).normalized();
  ASSERT_NEAR((mesh.face_normals[0] - n).norm(), 0.0, 1e-12);
  const double shade = std::max(0.0, n.dot(spec.light.normalized()));
  const auto shot = synth_photo(spec, 40, 40);
  for (int c = 0; c < 3; ++c) {
    EXPECT_NEAR(shot.photo.at(16, 16, c), shade * spec.albedo[c], 1e-12);
  }
}

TEST(SynthPhoto, NoiseIsSeeded) {
  SceneSpec spec = flat_spec(modelseg::testing::facing_quad(0, 0, 1, 1, 0, "plate"));
  spec.noise_sigma = 0.05;
  spec.seed = 3;
  const auto a = synth_photo(spec, 32, 32).photo;
  EXPECT_EQ(a, synth_photo(spec, 32, 32).photo);
  spec.seed = 4;
  EXPECT_NE(a, synth_photo(spec, 32, 32).photo);
  for (double x : a.data()) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
}

TEST(SegmentParts, PerfectPoseFindsEveryVisiblePart) {
  // The full-size scene. At 256 px the body's front leaks across the weak
  // panel and cabin edges.
  const SceneSpec spec = standard_scene(512, 512);
  const auto shot = synth_photo(spec, 512, 512);
  const auto result = segment_parts(shot.photo, spec.mesh, spec.pose, {}, {}, shot.ground_truth);
  ASSERT_EQ(result.parts.size(), part_names(spec.mesh).size());
  int segmented = 0;
  for (const auto& part : result.parts) {
    if (part.skipped) continue;
    ++segmented;
    ASSERT_TRUE(part.accuracy.has_value()) << part.name;
    EXPECT_GE(*part.accuracy, 0.95) << part.name;
    EXPECT_FALSE(part.contours.empty()) << part.name;
    EXPECT_LE(part.evolution.max_step, SegmentationParams{}.rho / 2) << part.name;
  }
  EXPECT_GE(segmented, 4);
}

TEST(SegmentParts, InitialRegionIsAStrictSubsetOfTheProjection) {
  const auto& s = small_scene();
  const auto result = segment_parts(s.shot.photo, s.spec.mesh, s.spec.pose, {"body"});
  ASSERT_EQ(result.parts.size(), 1u);
  const auto& body = result.parts[0];
  ASSERT_FALSE(body.skipped);
  EXPECT_TRUE(body.outline.subset_of(body.region));
  EXPECT_TRUE(body.init_region.subset_of(body.region));
  EXPECT_LT(body.init_region.count(), body.region.count());
  EXPECT_TRUE(body.init_region.any());
  EXPECT_FALSE(body.accuracy.has_value());
}

TEST(SegmentParts, SerialAndParallelAgree) {
  const auto& s = small_scene();
  SegmentationParams serial;
  serial.parallel = false;
  const auto a = segment_parts(s.shot.photo, s.spec.mesh, s.spec.pose, {}, serial);
  const auto b = segment_parts(s.shot.photo, s.spec.mesh, s.spec.pose, {});
  ASSERT_EQ(a.parts.size(), b.parts.size());
  for (std::size_t i = 0; i < a.parts.size(); ++i) {
    EXPECT_EQ(a.parts[i].name, b.parts[i].name);
    EXPECT_EQ(a.parts[i].final_mask, b.parts[i].final_mask);
  }
}

TEST(SegmentParts, SkipsHiddenPartsAndOverErodedParts) {
  // "cover" sits in front of "hidden" and conceals it entirely.
  TriangleMesh mesh = modelseg::testing::facing_quad(0, 0, 1, 1, 0.5, "cover");
  append_mesh(mesh, modelseg::testing::facing_quad(0.25, 0.25, 0.75, 0.75, 0.0, "hidden"));
  SceneSpec spec = flat_spec(mesh);
  const auto shot = synth_photo(spec, 48, 48);
  const auto result = segment_parts(shot.photo, spec.mesh, spec.pose, {"hidden", "cover"});
  ASSERT_EQ(result.parts.size(), 2u);
  EXPECT_EQ(result.parts[0].name, "hidden");
  EXPECT_TRUE(result.parts[0].skipped);
  EXPECT_EQ(result.parts[0].reason, "empty projection");
  EXPECT_FALSE(result.parts[0].final_mask.any());
  EXPECT_FALSE(result.parts[1].skipped);

  SegmentationParams params;
  params.erode_radius = 100.0;
  const auto eroded = segment_parts(shot.photo, spec.mesh, spec.pose, {"cover"}, params);
  EXPECT_TRUE(eroded.parts[0].skipped);
  EXPECT_EQ(eroded.parts[0].reason, "erosion emptied region");
}

TEST(SegmentParts, UnknownPartIsALookupError) {
  const auto& s = small_scene();
  EXPECT_THROW(segment_parts(s.shot.photo, s.spec.mesh, s.spec.pose, {"spoiler"}),
               LookupError);
  SegmentationParams params;
  params.erode_radius = -1.0;
  EXPECT_THROW(segment_parts(s.shot.photo, s.spec.mesh, s.spec.pose, {}, params),
               ArgumentError);
}

TEST(Overlay, DrawsOutlineThenInitThenResult) {
  PartSegmentation part;
  part.outline = boundary_pixels(filled_rect(20, 20, 2, 2, 18, 18));
  part.init_region = filled_rect(20, 20, 6, 6, 14, 14);
  part.final_mask = filled_rect(20, 20, 2, 6, 18, 14);
  ImageGrid photo(20, 20, 3, 0.5);
  const auto img = make_overlay(photo, part);
  EXPECT_EQ(pixel(img, 10, 2), rgb(kOutlineColor));       // outline only
  EXPECT_EQ(pixel(img, 10, 6), rgb(kResultColor));        // init and result share a row
  EXPECT_EQ(pixel(img, 6, 10), rgb(kInitColor));          // init boundary, result interior
  EXPECT_EQ(pixel(img, 2, 10), rgb(kResultColor));        // result over outline
  EXPECT_EQ(pixel(img, 10, 10), (std::array<std::uint8_t, 3>{128, 128, 128}));
}

TEST(PerturbPose, MovesByExactMagnitudes) {
  const FullPose truth = standard_scene(512, 512).pose;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const FullPose p = perturb_pose(truth, {}, 512, seed);
    EXPECT_NEAR((p.rough.mu - truth.rough.mu).norm(), 0.05 * 512, 1e-9);
    EXPECT_NEAR((p.rough.delta - truth.rough.delta).norm(), 0.05 * 512, 1e-9);
    EXPECT_NEAR((p.rough.psi - truth.rough.psi).norm(), 0.05, 1e-12);
    EXPECT_NEAR(std::abs(p.f / truth.f - 1.0), 0.10, 1e-12);
    const FullPose again = perturb_pose(truth, {}, 512, seed);
    EXPECT_EQ(pose_vector(p), pose_vector(again));
  }
  EXPECT_NE(pose_vector(perturb_pose(truth, {}, 512, 1)),
            pose_vector(perturb_pose(truth, {}, 512, 2)));
}

TEST(ReprojectionError, ZeroForSamePoseAndShiftUnderOrthography) {
  TriangleMesh mesh = modelseg::testing::facing_quad(0, 0, 1, 1, 0, "plate");
  mesh.datum = unit_datum();
  const FullPose a = square_pose();
  EXPECT_EQ(reprojection_error(mesh, a, a, 64, 64), 0.0);
  FullPose b = a;
  b.rough.mu += Eigen::Vector2d(3, 4);
  EXPECT_NEAR(reprojection_error(mesh, a, b, 64, 64), 5.0, 1e-6);
  EXPECT_THROW(reprojection_error(TriangleMesh{}, a, b, 64, 64), ArgumentError);
}

TEST(MetricsJson, SchemaOne) {
  SegmentationResult seg;
  PartSegmentation done;
  done.name = "door";
  done.accuracy = 0.97;
  PartSegmentation skipped;
  skipped.name = "window";
  skipped.skipped = true;
  skipped.reason = "empty projection";
  seg.parts = {done, skipped};
  const auto j = nlohmann::json::parse(metrics_json(square_pose(), 0.25, seg));
  EXPECT_EQ(j["schema"], 1);
  EXPECT_EQ(j["loss_final"], 0.25);
  EXPECT_EQ(j["pose"]["delta"][0], 32.0);
  EXPECT_EQ(j["pose"]["f"], 1e9);
  ASSERT_EQ(j["parts"].size(), 2u);
  EXPECT_EQ(j["parts"][0]["name"], "door");
  EXPECT_EQ(j["parts"][0]["accuracy"], 0.97);
  EXPECT_EQ(j["parts"][0]["skipped"], false);
  EXPECT_TRUE(j["parts"][0]["reason"].is_null());
  EXPECT_TRUE(j["parts"][1]["accuracy"].is_null());
  EXPECT_EQ(j["parts"][1]["reason"], "empty projection");
}

TEST(RunPipeline, SyntheticRunWritesArtifactsAndIsDeterministic) {
  const auto dir = modelseg::testing::scratch_dir("pipeline_run");
  PipelineConfig config;
  config.out_dir = dir / "a";
  config.width = 128;
  config.height = 128;
  config.seed = 7;
  const auto first = run_pipeline(config);
  for (const char* name : {"pose.json", "metrics.json", "trace.jsonl", "photo.png"}) {
    EXPECT_TRUE(fs::exists(config.out_dir / name)) << name;
  }
  for (const auto& part : part_names(standard_scene().mesh)) {
    EXPECT_TRUE(fs::exists(config.out_dir / "masks" / (part + ".png"))) << part;
    EXPECT_TRUE(fs::exists(config.out_dir / "contours" / (part + ".json"))) << part;
    EXPECT_TRUE(fs::exists(config.out_dir / "overlays" / (part + ".png"))) << part;
  }
  ASSERT_TRUE(first.true_pose.has_value());
  ASSERT_TRUE(first.reprojection_error.has_value());
  EXPECT_LE(first.registration.final_loss, first.registration.initial_loss);

  config.out_dir = dir / "b";
  const auto second = run_pipeline(config);
  EXPECT_EQ(first.metrics_json, second.metrics_json);
}

TEST(RunPipeline, ErrorsNameTheirStage) {
  PipelineConfig config;
  config.out_dir = modelseg::testing::scratch_dir("pipeline_err");
  config.width = 64;
  config.height = 64;
  config.parts = {"spoiler"};
  try {
    run_pipeline(config);
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "load");
    EXPECT_NE(std::string(e.what()).find("available: "), std::string::npos);
  }
  PipelineConfig photo_mode;
  photo_mode.out_dir = config.out_dir;
  photo_mode.photo_path = config.out_dir / "missing.png";
  EXPECT_THROW(run_pipeline(photo_mode), StageError);
}

TEST(Sweep, NormalsPhotoHasItsOnlyZeroAtTheTruePose) {
  const auto& s = small_scene();
  for (const char* param : {"mu_x", "delta_y", "psi_x", "f"}) {
    const auto sweep = sweep_landscape(s.normals, s.spec.mesh, s.spec.pose, param, 5.0, 11);
    ASSERT_EQ(sweep.offsets_pct.size(), 11u);
    EXPECT_DOUBLE_EQ(sweep.offsets_pct.front(), -5.0);
    EXPECT_DOUBLE_EQ(sweep.offsets_pct[5], 0.0);
    for (std::size_t k = 0; k < 2; ++k) {
      const auto& values = sweep.loss[0][k];
      EXPECT_NEAR(values[5], 0.0, 1e-9) << param;
      for (std::size_t i = 0; i < values.size(); ++i) {
        if (i != 5) {
          EXPECT_GT(values[i], values[5]) << param << " offset " << i;
        }
      }
    }
  }
}

TEST(Sweep, InvalidPosesScoreOne) {
  const auto& s = small_scene();
  const auto sweep = sweep_landscape(s.normals, s.spec.mesh, s.spec.pose, "psi_x", 300.0, 3,
                                     {1}, {0, 1});
  EXPECT_EQ(sweep.loss[0][0][0], 1.0);
  EXPECT_EQ(sweep.loss[1][0][2], 1.0);
  EXPECT_LT(sweep.loss[0][0][1], 1.0);
}

TEST(Sweep, RejectsBadArguments) {
  const auto& s = small_scene();
  EXPECT_THROW(sweep_landscape(s.normals, s.spec.mesh, s.spec.pose, "roll"), LookupError);
  EXPECT_THROW(sweep_landscape(s.normals, s.spec.mesh, s.spec.pose, "mu_x", 20.0, 1),
               ArgumentError);
  EXPECT_THROW(sweep_landscape(s.normals, s.spec.mesh, s.spec.pose, "mu_x", 0.0),
               ArgumentError);
}

TEST(SweepCsv, HeaderAndOneRowPerOffset) {
  Sweep sweep;
  sweep.param = "mu_x";
  sweep.offsets_pct = {-1.0, 0.0, 1.0};
  sweep.levels = {0, 2};
  sweep.norms = {1, 2};
  sweep.loss = {{{0.5, 0.0, 0.25}, {0.6, 0.0, 0.3}}, {{0.1, 0.0, 0.1}, {0.2, 0.0, 0.2}}};
  EXPECT_EQ(sweep_csv(sweep, 0),
            "param,offset_pct,loss_k1,loss_k2\n"
            "mu_x,-1,0.5,0.6\n"
            "mu_x,0,0,0\n"
            "mu_x,1,0.25,0.3\n");
  EXPECT_EQ(sweep_csv(sweep, 2),
            "param,offset_pct,loss_k1,loss_k2\n"
            "mu_x,-1,0.1,0.2\n"
            "mu_x,0,0,0\n"
            "mu_x,1,0.1,0.2\n");
  EXPECT_THROW(sweep_csv(sweep, 1), ArgumentError);
}

TEST(CountStrictLocalMinima, InteriorStrictOnly) {
  EXPECT_EQ(count_strict_local_minima({}), 0);
  EXPECT_EQ(count_strict_local_minima({1.0, 0.0}), 0);
  EXPECT_EQ(count_strict_local_minima({0.0, 1.0, 2.0}), 0);  // endpoint minimum
  EXPECT_EQ(count_strict_local_minima({2.0, 1.0, 2.0}), 1);
  EXPECT_EQ(count_strict_local_minima({2.0, 1.0, 1.0, 2.0}), 0);  // flat bottom
  EXPECT_EQ(count_strict_local_minima({3, 1, 2, 0, 4, 2, 5}), 3);
}
