#pragma once

#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "modelseg/image.hpp"
#include "modelseg/mesh.hpp"
#include "modelseg/pose.hpp"
#include "modelseg/raster.hpp"
#include "modelseg/simplex.hpp"

namespace modelseg {

struct LossConfig {
  // Norm of the gradient magnitude, 1 or 2.
  int k = 1;
  // Pyramid levels visited by coarse_to_fine_register, strictly decreasing
  // and ending at 0.
  std::vector<int> smoothing_levels{2, 1, 0};
  std::set<std::string> excluded_parts;
  RenderOptions render;

  void validate() const;
};

// Default perspective distance for a photo of this size: 4 * max(w, h).
double default_initial_f(int width, int height);

// Simplex steps scaled to the pose units: 2% of the width for mu and delta,
// 0.05 for psi, 10% of f0 for f.
SimplexConfig default_simplex_config(int width, int height, double f0);

// L = 1 - pearson(gn, gi)^2, clamped to [0, 1]; 1 when either operand is
// constant. Throws ArgumentError on shape mismatch.
double gradient_loss(const ImageGrid& gn, const ImageGrid& gi);

// Render-and-compare loss at one pyramid level. The photo-side gradient
// images are computed once per level and cached.
class PoseLoss {
 public:
  PoseLoss(const TriangleMesh& mesh, ImageGrid photo, LossConfig config);

  // Throws DomainError for invalid poses.
  double operator()(const FullPose& pose, int level) const;

  const ImageGrid& photo_gradient(int level) const;
  ImageGrid normal_gradient(const FullPose& pose, int level) const;
  const ImageGrid& photo() const { return photo_; }
  const LossConfig& config() const { return config_; }

 private:
  // Buffers reused across evaluations; the mutex serialises concurrent calls.
  struct Scratch {
    Framebuffer fb;
    ImageGrid level[2];
    ImageGrid reduce;
    ImageGrid gradient;
  };
  void normal_gradient_into(const FullPose& pose, int level, Scratch& scratch) const;

  const TriangleMesh& mesh_;
  ImageGrid photo_;
  LossConfig config_;
  std::vector<ImageGrid> photo_gradients_;  // indexed by level
  mutable std::mutex mutex_;
  mutable Scratch scratch_;
};

// One-shot convenience form of PoseLoss.
double evaluate_pose_loss(const TriangleMesh& mesh, const FullPose& pose,
                          const ImageGrid& photo, int level,
                          const LossConfig& config);

struct MaskedPhoto {
  ImageGrid photo;
  BinaryGrid mask;
  // Empty unless the render was empty and the photo was left untouched.
  std::string warning;
};

// Background suppression from the rough pose: zeroes every pixel farther than
// `margin` pixels from the model silhouette rendered at (rough, f).
MaskedPhoto background_mask(const ImageGrid& photo, const RoughPose& rough,
                            const TriangleMesh& mesh, double margin,
                            std::optional<double> f = std::nullopt,
                            const std::set<std::string>& excluded_parts = {});

// 10% of the image diagonal.
double default_mask_margin(int width, int height);

struct TraceEvent {
  int level = 0;
  int eval_count = 0;
  double loss = 0.0;
  FullPose pose;
};
using TraceSink = std::function<void(const TraceEvent&)>;

// One JSON line {level, eval_count, loss, pose}, newline-terminated.
std::string trace_json_line(const TraceEvent& event);

struct LevelOutcome {
  int level = 0;
  double loss = 0.0;
  int evaluations = 0;
  FullPose pose;
};

struct RegistrationResult {
  FullPose pose;
  double initial_loss = 1.0;  // level 0, at the starting pose
  double final_loss = 1.0;    // level 0, at the returned pose
  std::vector<LevelOutcome> levels;
  std::vector<std::string> warnings;
};

// Runs nelder_mead over the 7 pose parameters once per smoothing level, each
// level seeded by the previous optimum. Out-of-disc psi, f <= 0 and
// infeasible poses evaluate to +infinity. `initial_f` defaults to
// default_initial_f of the photo. If the starting pose has loss 1 (nothing
// visible) it is returned unchanged with a warning.
RegistrationResult coarse_to_fine_register(const TriangleMesh& mesh,
                                           const ImageGrid& photo,
                                           const RoughPose& rough,
                                           const LossConfig& config,
                                           const SimplexConfig& simplex,
                                           std::optional<double> initial_f = std::nullopt,
                                           const TraceSink& trace = {});

}  // namespace modelseg
