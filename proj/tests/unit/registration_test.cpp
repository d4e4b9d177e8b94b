#include <cmath>
#include <future>
#include <random>

#include <gtest/gtest.h>
#include <json.hpp>

#include "modelseg/errors.hpp"
#include "modelseg/imgproc.hpp"
#include "modelseg/pipeline.hpp"
#include "modelseg/raster.hpp"
#include "modelseg/registration.hpp"
#include "modelseg/scene.hpp"
#include "test_support.hpp"

using namespace modelseg;

namespace {

constexpr int kSize = 256;

struct Scene {
  SceneSpec spec;
  ImageGrid shaded;
  ImageGrid normals;
};

const Scene& scene() {
  static const Scene s = [] {
    Scene out;
    out.spec = standard_scene(kSize, kSize);
    out.spec.noise_sigma = 0.01;
    out.shaded = synth_photo(out.spec, kSize, kSize).photo;
    out.normals = render_normals(out.spec.mesh, out.spec.pose, kSize, kSize).normal;
    return out;
  }();
  return s;
}

FullPose shifted(FullPose pose, double du, double dv) {
  pose.rough.mu += Eigen::Vector2d(du, dv);
  return pose;
}

// A camera-facing unit square with a datum, mapped by the pose
// (mu = 0, delta = (32, 0), psi = 0, f = 1e9) onto pixels [0, 32) x [0, 32).
TriangleMesh datum_square() {
  TriangleMesh mesh = modelseg::testing::facing_quad(0, 0, 1, 1, 0, "plate");
  CarModelDatum datum;
  datum.rear_wheel_center = {0, 0, 0};
  datum.front_wheel_center = {1, 0, 0};
  datum.rear_axle_dir = {0, 0, -1};
  mesh.datum = datum;
  return mesh;
}

RoughPose square_pose() {
  RoughPose r;
  r.mu = {0, 0};
  r.delta = {32, 0};
  r.psi = {0, 0};
  return r;
}

}  // namespace

TEST(GradientLoss, IdenticalIsZero) {
  std::mt19937_64 rng(1);
  const auto a = modelseg::testing::random_image(9, 9, 1, rng);
  EXPECT_NEAR(gradient_loss(a, a), 0.0, 1e-15);
}

TEST(GradientLoss, AntiCorrelatedIsZero) {
  std::mt19937_64 rng(2);
  const auto a = modelseg::testing::random_image(9, 9, 1, rng);
  ImageGrid b = a;
  for (auto& x : b.data()) x = 3.0 - x;
  EXPECT_NEAR(gradient_loss(a, b), 0.0, 1e-15);
}

TEST(GradientLoss, ConstantOperandIsOne) {
  std::mt19937_64 rng(3);
  const auto a = modelseg::testing::random_image(9, 9, 1, rng);
  EXPECT_EQ(gradient_loss(ImageGrid(9, 9, 1, 0.0), a), 1.0);
  EXPECT_EQ(gradient_loss(a, ImageGrid(9, 9, 1, 2.0)), 1.0);
}

TEST(GradientLoss, ShapeMismatchIsArgumentError) {
  EXPECT_THROW(gradient_loss(ImageGrid(4, 4), ImageGrid(4, 5)), ArgumentError);
}

TEST(GradientLoss, StaysInUnitInterval) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const double l = gradient_loss(modelseg::testing::random_image(6, 6, 1, rng),
                                   modelseg::testing::random_image(6, 6, 1, rng));
    EXPECT_GE(l, 0.0);
    EXPECT_LE(l, 1.0);
  }
}

TEST(EvaluatePoseLoss, NormalBufferAsPhotoGivesZero) {
  const auto& s = scene();
  EXPECT_NEAR(evaluate_pose_loss(s.spec.mesh, s.spec.pose, s.normals, 0, LossConfig{}), 0.0,
              1e-12);
  LossConfig k2;
  k2.k = 2;
  EXPECT_NEAR(evaluate_pose_loss(s.spec.mesh, s.spec.pose, s.normals, 0, k2), 0.0, 1e-12);
}

TEST(EvaluatePoseLoss, TruePoseBeatsTenPixelShiftOnShadedPhoto) {
  const auto& s = scene();
  const LossConfig cfg;
  for (int level : {0, 1, 2}) {
    const double at_truth = evaluate_pose_loss(s.spec.mesh, s.spec.pose, s.shaded, level, cfg);
    for (auto [du, dv] : {std::pair{10.0, 0.0}, {0.0, 10.0}, {-10.0, 0.0}}) {
      const double off =
          evaluate_pose_loss(s.spec.mesh, shifted(s.spec.pose, du, dv), s.shaded, level, cfg);
      EXPECT_LT(at_truth, off) << "level " << level;
    }
  }
}

TEST(EvaluatePoseLoss, ModelOutsideFrameIsOne) {
  const auto& s = scene();
  const auto away = shifted(s.spec.pose, 5000, 0);
  EXPECT_EQ(evaluate_pose_loss(s.spec.mesh, away, s.shaded, 0, LossConfig{}), 1.0);
}

TEST(EvaluatePoseLoss, SymmetricForOppositeTranslations) {
  const auto& s = scene();
  const PoseLoss loss(s.spec.mesh, s.shaded, LossConfig{});
  for (double d : {2.0, 4.0, 8.0}) {
    for (int axis = 0; axis < 2; ++axis) {
      const double du = axis == 0 ? d : 0.0;
      const double dv = axis == 1 ? d : 0.0;
      const double plus = loss(shifted(s.spec.pose, du, dv), 0);
      const double minus = loss(shifted(s.spec.pose, -du, -dv), 0);
      EXPECT_LE(std::abs(plus - minus), 0.05 * std::max(plus, minus))
          << "shift " << d << " axis " << axis;
    }
  }
}

TEST(PoseLoss, CachesPhotoGradientsPerLevel) {
  const auto& s = scene();
  const PoseLoss loss(s.spec.mesh, s.shaded, LossConfig{});
  EXPECT_EQ(loss.photo_gradient(0), gradient_magnitude(s.shaded, 1));
  EXPECT_EQ(loss.photo_gradient(2), gradient_magnitude(gaussian_pyramid_level(s.shaded, 2), 1));
  EXPECT_EQ(loss.photo_gradient(2).width(), kSize / 4);
  EXPECT_THROW(loss.photo_gradient(3), ArgumentError);
  EXPECT_THROW(loss(s.spec.pose, 5), ArgumentError);
}

TEST(PoseLoss, ConcurrentCallsMatchSequential) {
  const auto& s = scene();
  const PoseLoss loss(s.spec.mesh, s.shaded, LossConfig{});
  std::vector<FullPose> poses;
  for (int i = 0; i < 8; ++i) poses.push_back(shifted(s.spec.pose, i - 4.0, 0.5 * i));
  std::vector<double> expected;
  for (const auto& p : poses) expected.push_back(loss(p, 0));
  std::vector<std::future<double>> futures;
  for (const auto& p : poses) {
    futures.push_back(std::async(std::launch::async, [&loss, p] { return loss(p, 0); }));
  }
  for (std::size_t i = 0; i < poses.size(); ++i) EXPECT_EQ(futures[i].get(), expected[i]);
}

TEST(LossConfig, ValidationRules) {
  LossConfig c;
  EXPECT_NO_THROW(c.validate());
  c.k = 3;
  EXPECT_THROW(c.validate(), ArgumentError);
  c = LossConfig{};
  c.smoothing_levels = {2, 2, 0};
  EXPECT_THROW(c.validate(), ArgumentError);
  c.smoothing_levels = {2, 1};
  EXPECT_THROW(c.validate(), ArgumentError);
  c.smoothing_levels = {};
  EXPECT_THROW(c.validate(), ArgumentError);
  c.smoothing_levels = {0};
  EXPECT_NO_THROW(c.validate());
}

TEST(Defaults, InitialFAndSimplexSteps) {
  EXPECT_EQ(default_initial_f(640, 480), 2560.0);
  const auto c = default_simplex_config(500, 400, 2000.0);
  EXPECT_EQ(c.initial_step,
            (std::vector<double>{10, 10, 10, 10, 0.05, 0.05, 200}));
  EXPECT_EQ(c.restarts, 2);
  EXPECT_EQ(c.max_evaluations, 1400);
  EXPECT_EQ(c.tolerance, 1e-6);
  EXPECT_NEAR(default_mask_margin(300, 400), 50.0, 1e-12);
}

TEST(BackgroundMask, HugeMarginLeavesPhotoUnchanged) {
  const auto& s = scene();
  const auto m = background_mask(s.shaded, s.spec.pose.rough, s.spec.mesh, 1e4, s.spec.pose.f);
  EXPECT_EQ(m.photo, s.shaded);
  EXPECT_TRUE(m.warning.empty());
}

TEST(BackgroundMask, ZeroMarginZeroesEverythingOffTheModel) {
  const TriangleMesh mesh = datum_square();
  const ImageGrid photo(64, 32, 3, 0.6);
  const auto m = background_mask(photo, square_pose(), mesh, 0.0, 1e9);
  EXPECT_EQ(m.mask, modelseg::testing::filled_rect(64, 32, 0, 0, 32, 32));
  for (int v = 0; v < 32; ++v) {
    for (int u = 0; u < 64; ++u) {
      for (int c = 0; c < 3; ++c) EXPECT_EQ(m.photo.at(u, v, c), u < 32 ? 0.6 : 0.0);
    }
  }
}

TEST(BackgroundMask, EmptyRenderLeavesPhotoAndWarns) {
  const TriangleMesh mesh = datum_square();
  RoughPose away = square_pose();
  away.mu = {-500, -500};
  const ImageGrid photo(64, 32, 3, 0.6);
  const auto m = background_mask(photo, away, mesh, 5.0, 1e9);
  EXPECT_EQ(m.photo, photo);
  EXPECT_FALSE(m.warning.empty());
  EXPECT_EQ(m.warning.rfind("WARN ", 0), 0u);
}

TEST(CoarseToFine, StartingAtTruthStaysThere) {
  const auto& s = scene();
  const auto simplex = default_simplex_config(kSize, kSize, s.spec.pose.f);
  const auto r = coarse_to_fine_register(s.spec.mesh, s.shaded, s.spec.pose.rough,
                                         LossConfig{}, simplex, s.spec.pose.f);
  EXPECT_LE(r.final_loss, r.initial_loss);
  EXPECT_EQ(r.initial_loss, evaluate_pose_loss(s.spec.mesh, s.spec.pose, s.shaded, 0, {}));
  EXPECT_LE(reprojection_error(s.spec.mesh, r.pose, s.spec.pose, kSize, kSize), 0.5);
  ASSERT_EQ(r.levels.size(), 3u);
  EXPECT_EQ(r.levels[0].level, 2);
  EXPECT_EQ(r.levels[2].level, 0);
  for (const auto& w : r.warnings) EXPECT_EQ(w.find("degenerate_start"), std::string::npos);
}

TEST(CoarseToFine, OffImageStartIsReturnedUnchanged) {
  const auto& s = scene();
  RoughPose away = s.spec.pose.rough;
  away.mu += Eigen::Vector2d(4000, 0);
  int traced = 0;
  const auto r = coarse_to_fine_register(
      s.spec.mesh, s.shaded, away, LossConfig{},
      default_simplex_config(kSize, kSize, s.spec.pose.f), s.spec.pose.f,
      [&](const TraceEvent&) { ++traced; });
  EXPECT_EQ(r.pose.rough.mu, away.mu);
  EXPECT_EQ(r.pose.f, s.spec.pose.f);
  EXPECT_EQ(r.final_loss, 1.0);
  EXPECT_EQ(traced, 0);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("degenerate_start"), std::string::npos);
}

TEST(CoarseToFine, DefaultFIsFourTimesLargerSide) {
  const auto& s = scene();
  RoughPose away = s.spec.pose.rough;
  away.mu += Eigen::Vector2d(4000, 0);
  const auto r = coarse_to_fine_register(s.spec.mesh, s.shaded, away, LossConfig{},
                                         default_simplex_config(kSize, kSize, 1024));
  EXPECT_EQ(r.pose.f, 4.0 * kSize);
}

TEST(CoarseToFine, RecoversShiftedStartAndTracesMonotonically) {
  const auto& s = scene();
  RoughPose start = s.spec.pose.rough;
  start.mu += Eigen::Vector2d(0.05 * kSize, 0);
  std::vector<TraceEvent> events;
  const auto r = coarse_to_fine_register(
      s.spec.mesh, s.shaded, start, LossConfig{},
      default_simplex_config(kSize, kSize, s.spec.pose.f), s.spec.pose.f,
      [&](const TraceEvent& e) { events.push_back(e); });
  EXPECT_LE(reprojection_error(s.spec.mesh, r.pose, s.spec.pose, kSize, kSize), 2.0);
  ASSERT_FALSE(events.empty());
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].level != events[i - 1].level) {
      EXPECT_LT(events[i].level, events[i - 1].level);
      continue;
    }
    EXPECT_LT(events[i].loss, events[i - 1].loss);
    EXPECT_GT(events[i].eval_count, events[i - 1].eval_count);
  }
  EXPECT_EQ(events.back().loss, r.final_loss);
}

TEST(CoarseToFine, AlternativeCoarseStepsNeverHurt) {
  const auto& s = scene();
  RoughPose start = s.spec.pose.rough;
  start.mu += Eigen::Vector2d(6, -4);
  LossConfig coarse_only;
  coarse_only.smoothing_levels = {2, 0};
  auto single = default_simplex_config(kSize, kSize, s.spec.pose.f);
  single.coarse_alternative_steps.clear();
  const auto both = default_simplex_config(kSize, kSize, s.spec.pose.f);
  const auto a = coarse_to_fine_register(s.spec.mesh, s.shaded, start, coarse_only, single,
                                         s.spec.pose.f);
  const auto b = coarse_to_fine_register(s.spec.mesh, s.shaded, start, coarse_only, both,
                                         s.spec.pose.f);
  EXPECT_LE(b.levels[0].loss, a.levels[0].loss);
  EXPECT_GT(b.levels[0].evaluations, a.levels[0].evaluations);
}

TEST(TraceJson, OneLineWithAllFields) {
  TraceEvent e;
  e.level = 1;
  e.eval_count = 42;
  e.loss = 0.25;
  e.pose = scene().spec.pose;
  const std::string line = trace_json_line(e);
  ASSERT_EQ(line.back(), '\n');
  EXPECT_EQ(line.find('\n'), line.size() - 1);
  const auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j["level"], 1);
  EXPECT_EQ(j["eval_count"], 42);
  EXPECT_EQ(j["loss"], 0.25);
  EXPECT_EQ(j["pose"]["f"], e.pose.f);
  EXPECT_EQ(j["pose"]["mu"].size(), 2u);
}
