// Command-line front end: render | register | segment | pipeline | sweep |
// synth | evaluate. Exit codes: 0 success, 1 stage failure, 2 usage error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "modelseg/errors.hpp"
#include "modelseg/image_io.hpp"
#include "modelseg/imgproc.hpp"
#include "modelseg/mesh.hpp"
#include "modelseg/pipeline.hpp"
#include "modelseg/pose.hpp"
#include "modelseg/raster.hpp"
#include "modelseg/registration.hpp"
#include "modelseg/scene.hpp"

namespace fs = std::filesystem;
using namespace modelseg;

namespace {

constexpr int kStageFailure = 1;
constexpr int kUsageError = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string mesh;
  std::string photo;
  std::string rough_pose;
  std::string pose;
  std::string out_dir = ".";
  std::string mask;
  std::vector<std::string> parts;
  std::vector<std::string> exclude_parts;
  int k = 1;
  std::vector<int> levels{2, 1, 0};
  std::optional<double> erode_radius;
  double nu = modelseg::EvolutionConfig{}.nu;
  double rho = 2.0;
  std::uint64_t seed = 0;
  int width = 512;
  int height = 512;
  double noise = 0.01;
  bool synthetic = false;
  bool literal = false;
  std::string param = "mu_x";
  double range = 20.0;
  int samples = 41;
  std::string result;
  std::string truth;
};

std::set<std::string> as_set(const std::vector<std::string>& v) {
  return {v.begin(), v.end()};
}

void need(const std::string& value, const char* flag, const char* command) {
  if (value.empty()) {
    throw UsageError(std::string(command) + ": " + flag + " is required");
  }
}

LossConfig loss_config(const Options& o) {
  LossConfig cfg;
  cfg.k = o.k;
  cfg.smoothing_levels = o.levels;
  cfg.excluded_parts = as_set(o.exclude_parts);
  return cfg;
}

SegmentationParams segmentation_params(const Options& o) {
  SegmentationParams params;
  params.erode_radius = o.erode_radius;
  params.rho = o.rho;
  params.evolution.nu = o.nu;
  if (o.literal) params.evolution.regularization = 0.0;
  params.excluded_parts = as_set(o.exclude_parts);
  return params;
}

FullPose load_full_pose(const std::string& path, int width, int height) {
  const PoseFile file = load_pose_file(path);
  return FullPose{file.rough, file.f.value_or(default_initial_f(width, height))};
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << w << "\n";
}

void run_render(const Options& o) {
  need(o.mesh, "--mesh", "render");
  need(o.pose, "--pose", "render");
  const TriangleMesh mesh = load_mesh(o.mesh);
  print_warnings(mesh.warnings);
  const FullPose pose = load_full_pose(o.pose, o.width, o.height);
  const Framebuffer fb =
      render_normals(mesh, pose, o.width, o.height, as_set(o.exclude_parts));
  const fs::path out(o.out_dir);
  fs::create_directories(out);
  write_png(out / "normals.png", encode_normals(fb.normal));
  write_label_png(out / "part_id.png", fb.part_id);
  write_mask_png(out / "silhouette.png", silhouette(fb));
  write_raw_grid(out / "normals.raw", fb.normal);
}

void run_register(const Options& o) {
  need(o.mesh, "--mesh", "register");
  need(o.photo, "--photo", "register");
  need(o.rough_pose, "--rough-pose", "register");
  const TriangleMesh mesh = load_mesh(o.mesh);
  const ImageGrid photo = read_png(o.photo);
  const FullPose rough = load_full_pose(o.rough_pose, photo.width(), photo.height());
  ImageGrid masked;
  if (!o.mask.empty()) {
    masked = apply_mask(photo, read_mask_png(o.mask));
  } else {
    MaskedPhoto m = background_mask(photo, rough.rough, mesh,
                                    default_mask_margin(photo.width(), photo.height()),
                                    rough.f, as_set(o.exclude_parts));
    if (!m.warning.empty()) std::cerr << m.warning << "\n";
    masked = std::move(m.photo);
  }
  std::string trace;
  const RegistrationResult result = coarse_to_fine_register(
      mesh, masked, rough.rough, loss_config(o),
      default_simplex_config(photo.width(), photo.height(), rough.f), rough.f,
      [&](const TraceEvent& e) { trace += trace_json_line(e); });
  print_warnings(result.warnings);
  const fs::path out(o.out_dir);
  fs::create_directories(out);
  write_file_atomic(out / "pose.json", pose_to_json(result.pose));
  write_file_atomic(out / "trace.jsonl", trace);
  std::cout << "loss " << result.initial_loss << " -> " << result.final_loss << "\n";
}

void run_segment(const Options& o) {
  need(o.mesh, "--mesh", "segment");
  need(o.photo, "--photo", "segment");
  need(o.pose, "--pose", "segment");
  const TriangleMesh mesh = load_mesh(o.mesh);
  const ImageGrid photo = read_png(o.photo);
  const FullPose pose = load_full_pose(o.pose, photo.width(), photo.height());
  const SegmentationResult seg =
      segment_parts(photo, mesh, pose, o.parts, segmentation_params(o));
  const fs::path out(o.out_dir);
  fs::create_directories(out / "masks");
  fs::create_directories(out / "contours");
  fs::create_directories(out / "overlays");
  for (const auto& part : seg.parts) {
    write_mask_png(out / "masks" / (part.name + ".png"), part.final_mask);
    write_file_atomic(out / "contours" / (part.name + ".json"),
                      contours_to_json(part.name, part.contours));
    write_png(out / "overlays" / (part.name + ".png"), make_overlay(photo, part));
    if (part.skipped) std::cerr << "skipped " << part.name << ": " << part.reason << "\n";
  }
  // Without a registration run the reported loss is the loss at the given pose.
  LossConfig cfg = loss_config(o);
  const double loss = evaluate_pose_loss(mesh, pose, photo, 0, cfg);
  write_file_atomic(out / "metrics.json", metrics_json(pose, loss, seg));
}

void run_pipeline_command(const Options& o) {
  PipelineConfig cfg;
  if (!o.synthetic) {
    need(o.photo, "--photo (or --synthetic)", "pipeline");
    need(o.mesh, "--mesh", "pipeline");
    need(o.rough_pose, "--rough-pose", "pipeline");
    cfg.photo_path = o.photo;
    cfg.rough_pose_path = o.rough_pose;
  } else if (!o.photo.empty()) {
    throw UsageError("pipeline: --photo and --synthetic are mutually exclusive");
  }
  if (!o.mesh.empty()) cfg.mesh_path = o.mesh;
  if (!o.pose.empty()) cfg.true_pose_path = o.pose;
  if (!o.mask.empty()) cfg.mask_path = o.mask;
  cfg.out_dir = o.out_dir;
  cfg.width = o.width;
  cfg.height = o.height;
  cfg.seed = o.seed;
  cfg.noise_sigma = o.noise;
  cfg.parts = o.parts;
  cfg.loss = loss_config(o);
  cfg.segmentation = segmentation_params(o);
  const PipelineOutcome outcome = run_pipeline(cfg);
  print_warnings(outcome.warnings);
  std::cout << outcome.metrics_json;
  if (outcome.reprojection_error) {
    std::cerr << "reprojection error " << *outcome.reprojection_error << " px\n";
  }
}

void run_sweep(const Options& o) {
  TriangleMesh mesh;
  ImageGrid photo;
  FullPose pose;
  if (o.synthetic) {
    SceneSpec spec = standard_scene(o.width, o.height);
    spec.noise_sigma = o.noise;
    spec.seed = o.seed;
    const SyntheticPhoto synthetic = synth_photo(spec, o.width, o.height);
    photo = synthetic.photo;
    pose = spec.pose;
    mesh = std::move(spec.mesh);
  } else {
    need(o.mesh, "--mesh (or --synthetic)", "sweep");
    need(o.photo, "--photo", "sweep");
    need(o.pose, "--pose", "sweep");
    mesh = load_mesh(o.mesh);
    photo = read_png(o.photo);
    pose = load_full_pose(o.pose, photo.width(), photo.height());
  }
  if (!o.mask.empty()) {
    photo = apply_mask(photo, read_mask_png(o.mask));
  } else {
    photo = background_mask(photo, pose.rough, mesh,
                            default_mask_margin(photo.width(), photo.height()), pose.f,
                            as_set(o.exclude_parts))
                .photo;
  }
  const Sweep sweep = sweep_landscape(photo, mesh, pose, o.param, o.range, o.samples,
                                      {1, 2}, o.levels, as_set(o.exclude_parts));
  const fs::path out(o.out_dir);
  fs::create_directories(out);
  for (int level : sweep.levels) {
    const fs::path file = out / ("sweep_" + o.param + "_n" + std::to_string(level) + ".csv");
    write_file_atomic(file, sweep_csv(sweep, level));
    std::cout << file.string() << "\n";
  }
}

void run_synth(const Options& o) {
  SceneSpec spec = standard_scene(o.width, o.height);
  const fs::path out(o.out_dir);
  fs::create_directories(out / "truth");
  if (!o.mesh.empty()) {
    spec.mesh = load_mesh(o.mesh);
  } else {
    save_mesh(out / "toy_car.obj", spec.mesh);
  }
  if (!o.pose.empty()) spec.pose = load_full_pose(o.pose, o.width, o.height);
  spec.noise_sigma = o.noise;
  spec.seed = o.seed;
  const SyntheticPhoto synthetic = synth_photo(spec, o.width, o.height);
  write_png(out / "photo.png", synthetic.photo);
  write_file_atomic(out / "pose.json", pose_to_json(spec.pose));
  const FullPose rough = perturb_pose(spec.pose, Perturbation{}, o.width, o.seed);
  write_file_atomic(out / "rough_pose.json", pose_to_json(rough));
  for (const auto& [name, mask] : synthetic.ground_truth) {
    write_mask_png(out / "truth" / (name + ".png"), mask);
  }
}

void run_evaluate(const Options& o) {
  need(o.result, "--result", "evaluate");
  need(o.truth, "--truth", "evaluate");
  const double a = accuracy(read_mask_png(o.result), read_mask_png(o.truth));
  std::cout << "{\"accuracy\": " << a << "}\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-assisted registration and part segmentation"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--mesh", o.mesh, "OBJ model (datum read from <stem>.datum.json)");
    cmd->add_option("--out-dir", o.out_dir, "Output directory");
    cmd->add_option("--exclude-parts", o.exclude_parts, "Parts left out of renders")
        ->delimiter(',');
    cmd->add_option("--width", o.width, "Frame width for renders and synthetic scenes");
    cmd->add_option("--height", o.height, "Frame height for renders and synthetic scenes");
  };
  auto add_loss = [&](CLI::App* cmd) {
    cmd->add_option("--k", o.k, "Gradient norm")->check(CLI::IsMember({1, 2}));
    cmd->add_option("--levels", o.levels, "Smoothing levels, e.g. 2,1,0")->delimiter(',');
    cmd->add_option("--mask", o.mask, "Background mask PNG overriding the silhouette mask");
  };
  auto add_segment = [&](CLI::App* cmd) {
    cmd->add_option("--parts", o.parts, "Parts to segment, e.g. a,b,c")->delimiter(',');
    cmd->add_option("--erode-radius", o.erode_radius, "Erosion radius in pixels");
    cmd->add_option("--nu", o.nu, "Balloon coefficient (negative expands)");
    cmd->add_option("--rho", o.rho, "Level-set initialisation magnitude");
    cmd->add_flag("--literal", o.literal, "Disable the distance regulariser");
  };

  auto* render = app.add_subcommand("render", "Render normals, part ids and silhouette");
  add_common(render);
  render->add_option("--pose", o.pose, "Pose JSON");

  auto* reg = app.add_subcommand("register", "Refine a rough pose against a photo");
  add_common(reg);
  add_loss(reg);
  reg->add_option("--photo", o.photo, "Photo PNG");
  reg->add_option("--rough-pose", o.rough_pose, "Rough pose JSON");

  auto* seg = app.add_subcommand("segment", "Segment parts at a given pose");
  add_common(seg);
  add_segment(seg);
  seg->add_option("--photo", o.photo, "Photo PNG");
  seg->add_option("--pose", o.pose, "Pose JSON");
  seg->add_option("--k", o.k, "Gradient norm for the reported loss")
      ->check(CLI::IsMember({1, 2}));

  auto* pipe = app.add_subcommand("pipeline", "Mask, register and segment");
  add_common(pipe);
  add_loss(pipe);
  add_segment(pipe);
  pipe->add_option("--photo", o.photo, "Photo PNG (photo mode)");
  pipe->add_option("--rough-pose", o.rough_pose, "Rough pose JSON (photo mode)");
  pipe->add_flag("--synthetic", o.synthetic, "Run on the synthetic toy-car scene");
  pipe->add_option("--pose", o.pose, "True pose JSON for the synthetic scene");
  pipe->add_option("--seed", o.seed, "Seed for noise and rough-pose perturbation");
  pipe->add_option("--noise", o.noise, "Synthetic noise standard deviation");

  auto* sweep = app.add_subcommand("sweep", "Loss landscape along one pose component");
  add_common(sweep);
  add_loss(sweep);
  sweep->add_option("--photo", o.photo, "Photo PNG");
  sweep->add_option("--pose", o.pose, "Pose JSON at the sweep centre");
  sweep->add_flag("--synthetic", o.synthetic, "Sweep the synthetic toy-car scene");
  sweep->add_option("--param", o.param, "mu_x, mu_y, delta_x, delta_y, psi_x, psi_y or f");
  sweep->add_option("--range", o.range, "Half range in percent");
  sweep->add_option("--samples", o.samples, "Number of samples");
  sweep->add_option("--seed", o.seed, "Synthetic noise seed");
  sweep->add_option("--noise", o.noise, "Synthetic noise standard deviation");

  auto* synth = app.add_subcommand("synth", "Write a synthetic scene with ground truth");
  add_common(synth);
  synth->add_option("--pose", o.pose, "True pose JSON");
  synth->add_option("--seed", o.seed, "Noise seed");
  synth->add_option("--noise", o.noise, "Noise standard deviation");

  auto* eval = app.add_subcommand("evaluate", "Accuracy of a mask against ground truth");
  eval->add_option("--result", o.result, "Result mask PNG");
  eval->add_option("--truth", o.truth, "Ground-truth mask PNG");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*render) run_render(o);
    if (*reg) run_register(o);
    if (*seg) run_segment(o);
    if (*pipe) run_pipeline_command(o);
    if (*sweep) run_sweep(o);
    if (*synth) run_synth(o);
    if (*eval) run_evaluate(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kStageFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kStageFailure;
  }
  return 0;
}
