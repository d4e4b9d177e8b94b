#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "modelseg/image.hpp"
#include "modelseg/image_io.hpp"
#include "modelseg/levelset.hpp"
#include "modelseg/mesh.hpp"
#include "modelseg/pose.hpp"
#include "modelseg/registration.hpp"
#include "modelseg/scene.hpp"

namespace modelseg {

// a = 1 - sum |U_R - U_G| / sum U_G. Throws ArgumentError on shape mismatch
// or an empty ground truth.
double accuracy(const BinaryGrid& result, const BinaryGrid& ground_truth);

struct SegmentationParams {
  // Erosion radius in pixels; default 3 * diagonal / 800.
  std::optional<double> erode_radius;
  double rho = 2.0;
  double sigma = kDefaultEdgeSigma;
  double p = kDefaultEdgeExponent;
  // Photo luminance in [0,1] is multiplied by this before the edge map is
  // built. g depends on the absolute gradient, so this sets the contrast at
  // which edges stop the front.
  double intensity_scale = 48.0;
  EvolutionConfig evolution;
  // Each part evolves inside the bounding box of its projection grown by
  // this many pixels.
  int roi_margin = 32;
  std::set<std::string> excluded_parts;
  RenderOptions render;
  // Segment parts on concurrent tasks.
  bool parallel = true;
};

double default_erode_radius(int width, int height);

struct PartSegmentation {
  std::string name;
  bool skipped = false;
  std::string reason;        // "empty projection" or "erosion emptied region"
  BinaryGrid outline;        // o_p
  BinaryGrid region;         // the region o_p encloses
  BinaryGrid init_region;    // eroded region, inside of phi_0
  BinaryGrid final_mask;     // zero-level mask of the evolved field
  std::vector<Polyline> contours;  // image coordinates
  std::optional<double> accuracy;
  EvolutionReport evolution;
};

struct SegmentationResult {
  std::vector<PartSegmentation> parts;
};

// Algorithm: render at `pose`, then per part erode the projected region,
// initialise phi and evolve it on the photo's edge map. Parts are segmented
// in the order given (all parts when empty). Throws LookupError for an
// unknown part. Ground truth, when given, fills in the accuracies.
SegmentationResult segment_parts(
    const ImageGrid& photo, const TriangleMesh& mesh, const FullPose& pose,
    const std::vector<std::string>& parts, const SegmentationParams& params = {},
    const std::map<std::string, BinaryGrid>& ground_truth = {});

inline constexpr std::uint8_t kOutlineColor[3] = {0, 255, 0};
inline constexpr std::uint8_t kInitColor[3] = {255, 0, 0};
inline constexpr std::uint8_t kResultColor[3] = {255, 255, 0};

// Photo with the part's projected outline in green, the boundary of the
// initial region in red and the boundary of the result in yellow (drawn in
// that order, so later curves win where they overlap).
Rgb8Image make_overlay(const ImageGrid& photo, const PartSegmentation& part);
Rgb8Image to_rgb8(const ImageGrid& image);

// Perturbation of a ground-truth pose. mu and delta move by exactly
// frac * width in a random direction, psi by exactly psi_offset in a random
// direction, f by f_frac * f with a random sign.
struct Perturbation {
  double mu_frac = 0.05;
  double delta_frac = 0.05;
  double psi_offset = 0.05;
  double f_frac = 0.10;
};
FullPose perturb_pose(const FullPose& pose, const Perturbation& perturbation,
                      int width, std::uint64_t seed);

// Mean image distance between the projections of every mesh vertex under
// two poses (principal point at the image centre).
double reprojection_error(const TriangleMesh& mesh, const FullPose& a,
                          const FullPose& b, int width, int height);

struct PipelineConfig {
  std::filesystem::path out_dir;
  // Photo mode inputs.
  std::optional<std::filesystem::path> photo_path;
  std::optional<std::filesystem::path> mesh_path;
  std::optional<std::filesystem::path> rough_pose_path;
  std::optional<std::filesystem::path> mask_path;
  // Synthetic mode: used when photo_path is unset. The scene defaults to
  // standard_scene; mesh_path and true_pose_path override its model and pose.
  std::optional<std::filesystem::path> true_pose_path;
  int width = 512;
  int height = 512;
  std::uint64_t seed = 0;
  Perturbation perturbation;
  double noise_sigma = 0.01;

  std::vector<std::string> parts;  // empty: every part
  LossConfig loss;
  std::optional<SimplexConfig> simplex;
  std::optional<double> mask_margin;
  SegmentationParams segmentation;
  bool write_trace = true;
  bool write_artifacts = true;
};

struct PipelineOutcome {
  FullPose rough;
  RegistrationResult registration;
  SegmentationResult segmentation;
  std::optional<FullPose> true_pose;
  std::optional<double> reprojection_error;
  std::vector<std::string> warnings;
  std::string metrics_json;
};

// Metrics JSON (schema 1): pose, loss_final and per-part accuracy/skip state.
std::string metrics_json(const FullPose& pose, double loss_final,
                         const SegmentationResult& segmentation);

// Runs background masking, registration and segmentation, writing
// pose.json, metrics.json, trace.jsonl, masks/, contours/ and overlays/
// under out_dir. Errors carry a "[stage]" prefix in their message.
PipelineOutcome run_pipeline(const PipelineConfig& config);

// Loss along one pose component around `pose`. Offsets are percentages of
// the image width for mu and delta, of 1 for psi and of pose.f for f.
struct Sweep {
  std::string param;
  std::vector<double> offsets_pct;
  std::vector<int> levels;
  std::vector<int> norms;
  // loss[level index][norm index][offset index]; invalid poses score 1.
  std::vector<std::vector<std::vector<double>>> loss;
};
Sweep sweep_landscape(const ImageGrid& photo, const TriangleMesh& mesh,
                      const FullPose& pose, const std::string& param,
                      double range_pct = 20.0, int samples = 41,
                      const std::vector<int>& norms = {1, 2},
                      const std::vector<int>& levels = {0},
                      const std::set<std::string>& excluded_parts = {});

// CSV "param,offset_pct,loss_k1,loss_k2" for one level of a sweep.
std::string sweep_csv(const Sweep& sweep, int level);

// Number of interior samples strictly below both neighbours.
int count_strict_local_minima(const std::vector<double>& values);

}  // namespace modelseg
