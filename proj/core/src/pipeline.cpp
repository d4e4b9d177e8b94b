#include "modelseg/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <future>
#include <numbers>
#include <random>

#include <json.hpp>

#include "modelseg/errors.hpp"
#include "modelseg/imgproc.hpp"
#include "modelseg/raster.hpp"

namespace modelseg {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

double accuracy(const BinaryGrid& result, const BinaryGrid& ground_truth) {
  if (!result.same_shape(ground_truth)) {
    throw ArgumentError("accuracy: shape mismatch");
  }
  const auto r = result.bits();
  const auto g = ground_truth.bits();
  std::size_t diff = 0;
  std::size_t truth = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    diff += r[i] != g[i];
    truth += g[i];
  }
  if (truth == 0) throw ArgumentError("accuracy: ground truth is empty");
  return 1.0 - static_cast<double>(diff) / static_cast<double>(truth);
}

double default_erode_radius(int width, int height) {
  return 3.0 * std::hypot(static_cast<double>(width), static_cast<double>(height)) /
         800.0;
}

namespace {

struct Box {
  int u0, v0, u1, v1;  // inclusive-exclusive
};

Box bounding_box(const BinaryGrid& mask, int margin) {
  Box box{mask.width(), mask.height(), 0, 0};
  for (int v = 0; v < mask.height(); ++v) {
    for (int u = 0; u < mask.width(); ++u) {
      if (!mask.at(u, v)) continue;
      box.u0 = std::min(box.u0, u);
      box.v0 = std::min(box.v0, v);
      box.u1 = std::max(box.u1, u + 1);
      box.v1 = std::max(box.v1, v + 1);
    }
  }
  box.u0 = std::max(0, box.u0 - margin);
  box.v0 = std::max(0, box.v0 - margin);
  box.u1 = std::min(mask.width(), box.u1 + margin);
  box.v1 = std::min(mask.height(), box.v1 + margin);
  return box;
}

BinaryGrid crop(const BinaryGrid& mask, const Box& b) {
  BinaryGrid out(b.u1 - b.u0, b.v1 - b.v0);
  for (int v = b.v0; v < b.v1; ++v) {
    for (int u = b.u0; u < b.u1; ++u) out.set(u - b.u0, v - b.v0, mask.at(u, v));
  }
  return out;
}

ImageGrid crop(const ImageGrid& image, const Box& b) {
  ImageGrid out(b.u1 - b.u0, b.v1 - b.v0, image.channels());
  for (int v = b.v0; v < b.v1; ++v) {
    for (int u = b.u0; u < b.u1; ++u) {
      for (int c = 0; c < image.channels(); ++c) {
        out.at(u - b.u0, v - b.v0, c) = image.at(u, v, c);
      }
    }
  }
  return out;
}

PartSegmentation segment_one(const Framebuffer& fb, const EdgeMap& edge,
                             const std::string& name, double radius,
                             const SegmentationParams& params,
                             const std::map<std::string, BinaryGrid>& ground_truth) {
  PartSegmentation part;
  part.name = name;
  part.outline = part_outline(fb, name);
  part.region = part_region(fb, name);
  part.init_region = BinaryGrid(fb.width, fb.height);
  part.final_mask = BinaryGrid(fb.width, fb.height);
  if (!part.outline.any()) {
    part.skipped = true;
    part.reason = "empty projection";
    return part;
  }
  part.init_region = erode(part.region, radius);
  if (!part.init_region.any()) {
    part.skipped = true;
    part.reason = "erosion emptied region";
    return part;
  }
  const Box box = bounding_box(part.region, params.roi_margin);
  EdgeMap local{crop(edge.g, box), edge.sigma, edge.p};
  const LevelSetField phi0 = init_phi(crop(part.init_region, box), params.rho);
  const LevelSetField phi =
      evolve(phi0, local, params.evolution, {}, &part.evolution);
  const BinaryGrid mask = zero_level_mask(phi);
  for (int v = 0; v < mask.height(); ++v) {
    for (int u = 0; u < mask.width(); ++u) {
      part.final_mask.set(u + box.u0, v + box.v0, mask.at(u, v));
    }
  }
  part.contours = zero_level_contours(phi);
  const Eigen::Vector2d shift(box.u0, box.v0);
  for (auto& line : part.contours) {
    for (auto& p : line) p += shift;
  }
  if (const auto it = ground_truth.find(name);
      it != ground_truth.end() && it->second.any()) {
    part.accuracy = accuracy(part.final_mask, it->second);
  }
  return part;
}

}  // namespace

SegmentationResult segment_parts(const ImageGrid& photo, const TriangleMesh& mesh,
                                 const FullPose& pose,
                                 const std::vector<std::string>& parts,
                                 const SegmentationParams& params,
                                 const std::map<std::string, BinaryGrid>& ground_truth) {
  if (photo.empty()) throw ArgumentError("segment_parts: photo is empty");
  const Framebuffer fb = render_normals(mesh, pose, photo.width(), photo.height(),
                                        params.excluded_parts, params.render);
  std::vector<std::string> names;
  if (parts.empty()) {
    for (const auto& name : fb.part_names) {
      if (!params.excluded_parts.count(name)) names.push_back(name);
    }
  } else {
    for (const auto& name : parts) fb.id_of(name);
    names = parts;
  }
  ImageGrid intensity = luminance(photo);
  for (double& x : intensity.data()) x *= params.intensity_scale;
  const EdgeMap edge = edge_function(intensity, params.sigma, params.p);
  const double radius =
      params.erode_radius.value_or(default_erode_radius(photo.width(), photo.height()));
  if (radius < 0.0) throw ArgumentError("segment_parts: erosion radius must be >= 0");

  SegmentationResult result;
  if (params.parallel && names.size() > 1) {
    std::vector<std::future<PartSegmentation>> tasks;
    for (const auto& name : names) {
      tasks.push_back(std::async(std::launch::async, [&, name] {
        return segment_one(fb, edge, name, radius, params, ground_truth);
      }));
    }
    for (auto& task : tasks) result.parts.push_back(task.get());
  } else {
    for (const auto& name : names) {
      result.parts.push_back(segment_one(fb, edge, name, radius, params, ground_truth));
    }
  }
  return result;
}

Rgb8Image to_rgb8(const ImageGrid& image) {
  Rgb8Image out(image.width(), image.height());
  for (int v = 0; v < image.height(); ++v) {
    for (int u = 0; u < image.width(); ++u) {
      std::uint8_t rgb[3];
      for (int c = 0; c < 3; ++c) {
        const int src = image.channels() >= 3 ? c : 0;
        rgb[c] = static_cast<std::uint8_t>(
            std::lround(255.0 * std::clamp(image.at(u, v, src), 0.0, 1.0)));
      }
      out.set(u, v, rgb[0], rgb[1], rgb[2]);
    }
  }
  return out;
}

Rgb8Image make_overlay(const ImageGrid& photo, const PartSegmentation& part) {
  Rgb8Image out = to_rgb8(photo);
  auto paint = [&](const BinaryGrid& mask, const std::uint8_t (&color)[3]) {
    if (!mask.any()) return;
    for (int v = 0; v < mask.height(); ++v) {
      for (int u = 0; u < mask.width(); ++u) {
        if (mask.at(u, v)) out.set(u, v, color[0], color[1], color[2]);
      }
    }
  };
  paint(part.outline, kOutlineColor);
  paint(boundary_pixels(part.init_region), kInitColor);
  paint(boundary_pixels(part.final_mask), kResultColor);
  return out;
}

FullPose perturb_pose(const FullPose& pose, const Perturbation& perturbation, int width,
                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  auto direction = [&] {
    const double a = angle(rng);
    return Eigen::Vector2d(std::cos(a), std::sin(a));
  };
  FullPose out = pose;
  const double px = static_cast<double>(width);
  out.rough.mu += perturbation.mu_frac * px * direction();
  out.rough.delta += perturbation.delta_frac * px * direction();
  out.rough.psi += perturbation.psi_offset * direction();
  const bool up = std::bernoulli_distribution(0.5)(rng);
  out.f *= up ? 1.0 + perturbation.f_frac : 1.0 - perturbation.f_frac;
  out.validate();
  return out;
}

double reprojection_error(const TriangleMesh& mesh, const FullPose& a, const FullPose& b,
                          int width, int height) {
  if (mesh.vertices.empty()) throw ArgumentError("reprojection_error: empty mesh");
  const CameraTransform ta = camera_for(mesh, a, width, height);
  const CameraTransform tb = camera_for(mesh, b, width, height);
  double total = 0.0;
  for (const auto& p : mesh.vertices) {
    const ImagePoint pa = project_point(ta, p);
    const ImagePoint pb = project_point(tb, p);
    total += std::hypot(pa.u - pb.u, pa.v - pb.v);
  }
  return total / static_cast<double>(mesh.vertices.size());
}

namespace {

ordered_json pose_json(const FullPose& pose) {
  ordered_json j;
  j["mu"] = {pose.rough.mu.x(), pose.rough.mu.y()};
  j["delta"] = {pose.rough.delta.x(), pose.rough.delta.y()};
  j["psi"] = {pose.rough.psi.x(), pose.rough.psi.y()};
  j["f"] = pose.f;
  return j;
}

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

std::string metrics_json(const FullPose& pose, double loss_final,
                         const SegmentationResult& segmentation) {
  ordered_json j;
  j["schema"] = 1;
  j["pose"] = pose_json(pose);
  j["loss_final"] = loss_final;
  j["parts"] = ordered_json::array();
  for (const auto& part : segmentation.parts) {
    ordered_json p;
    p["name"] = part.name;
    p["accuracy"] = part.accuracy ? ordered_json(*part.accuracy) : ordered_json(nullptr);
    p["skipped"] = part.skipped;
    p["reason"] = part.skipped ? ordered_json(part.reason) : ordered_json(nullptr);
    j["parts"].push_back(std::move(p));
  }
  return j.dump(2) + "\n";
}

PipelineOutcome run_pipeline(const PipelineConfig& config) {
  PipelineOutcome outcome;
  TriangleMesh mesh;
  ImageGrid photo;
  std::map<std::string, BinaryGrid> ground_truth;

  stage("load", [&] {
    if (config.photo_path) {
      if (!config.mesh_path) throw ArgumentError("photo mode needs a mesh");
      if (!config.rough_pose_path) throw ArgumentError("photo mode needs a rough pose");
      mesh = load_mesh(*config.mesh_path);
      photo = read_png(*config.photo_path);
      const PoseFile rough = load_pose_file(config.rough_pose_path->string());
      outcome.rough = FullPose{
          rough.rough, rough.f.value_or(default_initial_f(photo.width(), photo.height()))};
    } else {
      SceneSpec spec = standard_scene(config.width, config.height);
      if (config.mesh_path) spec.mesh = load_mesh(*config.mesh_path);
      if (config.true_pose_path) {
        const PoseFile truth = load_pose_file(config.true_pose_path->string());
        spec.pose = FullPose{truth.rough, truth.f.value_or(default_initial_f(
                                              config.width, config.height))};
      }
      spec.noise_sigma = config.noise_sigma;
      spec.seed = config.seed;
      SyntheticPhoto synthetic = synth_photo(spec, config.width, config.height);
      photo = std::move(synthetic.photo);
      ground_truth = std::move(synthetic.ground_truth);
      outcome.true_pose = spec.pose;
      outcome.rough =
          perturb_pose(spec.pose, config.perturbation, config.width, config.seed);
      mesh = std::move(spec.mesh);
    }
    if (!mesh.datum) throw ValidationError("mesh has no datum sidecar");
    const auto names = part_names(mesh);
    for (const auto& part : config.parts) {
      if (std::find(names.begin(), names.end(), part) == names.end()) {
        std::string known;
        for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
        throw LookupError("unknown part '" + part + "' (available: " + known + ")");
      }
    }
    for (const auto& w : mesh.warnings) outcome.warnings.push_back(w);
    if (outcome.rough.rough.near_degenerate()) {
      outcome.warnings.push_back("WARN near_degenerate_pose rough pose psi is near the rim");
    }
  });

  const ImageGrid masked = stage("mask", [&] {
    if (config.mask_path) {
      const BinaryGrid mask = read_mask_png(*config.mask_path);
      if (mask.width() != photo.width() || mask.height() != photo.height()) {
        throw ArgumentError("mask size does not match the photo");
      }
      return apply_mask(photo, mask);
    }
    MaskedPhoto m = background_mask(
        photo, outcome.rough.rough, mesh,
        config.mask_margin.value_or(default_mask_margin(photo.width(), photo.height())),
        outcome.rough.f, config.loss.excluded_parts);
    if (!m.warning.empty()) outcome.warnings.push_back(m.warning);
    return m.photo;
  });

  std::string trace;
  stage("register", [&] {
    const SimplexConfig simplex = config.simplex.value_or(
        default_simplex_config(photo.width(), photo.height(), outcome.rough.f));
    TraceSink sink;
    if (config.write_trace) {
      sink = [&](const TraceEvent& e) { trace += trace_json_line(e); };
    }
    outcome.registration = coarse_to_fine_register(mesh, masked, outcome.rough.rough,
                                                   config.loss, simplex,
                                                   outcome.rough.f, sink);
    for (const auto& w : outcome.registration.warnings) outcome.warnings.push_back(w);
    if (outcome.true_pose) {
      outcome.reprojection_error =
          reprojection_error(mesh, outcome.registration.pose, *outcome.true_pose,
                             photo.width(), photo.height());
    }
  });

  stage("segment", [&] {
    SegmentationParams params = config.segmentation;
    params.excluded_parts.insert(config.loss.excluded_parts.begin(),
                                 config.loss.excluded_parts.end());
    outcome.segmentation = segment_parts(photo, mesh, outcome.registration.pose,
                                         config.parts, params, ground_truth);
  });

  outcome.metrics_json = metrics_json(outcome.registration.pose,
                                      outcome.registration.final_loss,
                                      outcome.segmentation);

  if (!config.write_artifacts) return outcome;
  stage("write", [&] {
    const fs::path& out = config.out_dir;
    fs::create_directories(out / "masks");
    fs::create_directories(out / "contours");
    fs::create_directories(out / "overlays");
    write_file_atomic(out / "pose.json", pose_to_json(outcome.registration.pose));
    write_file_atomic(out / "rough_pose.json", pose_to_json(outcome.rough));
    write_file_atomic(out / "metrics.json", outcome.metrics_json);
    if (config.write_trace) write_file_atomic(out / "trace.jsonl", trace);
    if (!config.photo_path) write_png(out / "photo.png", photo);
    std::string warnings;
    for (const auto& w : outcome.warnings) warnings += w + "\n";
    write_file_atomic(out / "warnings.txt", warnings);
    for (const auto& part : outcome.segmentation.parts) {
      write_mask_png(out / "masks" / (part.name + ".png"), part.final_mask);
      write_file_atomic(out / "contours" / (part.name + ".json"),
                        contours_to_json(part.name, part.contours));
      write_png(out / "overlays" / (part.name + ".png"), make_overlay(photo, part));
    }
  });
  return outcome;
}

Sweep sweep_landscape(const ImageGrid& photo, const TriangleMesh& mesh,
                      const FullPose& pose, const std::string& param, double range_pct,
                      int samples, const std::vector<int>& norms,
                      const std::vector<int>& levels,
                      const std::set<std::string>& excluded_parts) {
  const int index = pose_component_index(param);
  if (samples < 2) throw ArgumentError("sweep: need at least 2 samples");
  if (!(range_pct > 0.0)) throw ArgumentError("sweep: range must be positive");
  if (norms.empty() || levels.empty()) {
    throw ArgumentError("sweep: need at least one norm and one level");
  }
  pose.validate();
  const double unit = index < 4 ? static_cast<double>(photo.width())
                                : (index < 6 ? 1.0 : pose.f);
  Sweep sweep;
  sweep.param = param;
  sweep.levels = levels;
  sweep.norms = norms;
  for (int i = 0; i < samples; ++i) {
    sweep.offsets_pct.push_back(-range_pct +
                                2.0 * range_pct * static_cast<double>(i) / (samples - 1));
  }
  const int max_level = *std::max_element(levels.begin(), levels.end());
  sweep.loss.assign(levels.size(), std::vector<std::vector<double>>(
                                       norms.size(), std::vector<double>(samples, 1.0)));
  for (std::size_t ki = 0; ki < norms.size(); ++ki) {
    LossConfig cfg;
    cfg.k = norms[ki];
    cfg.smoothing_levels = {max_level};
    cfg.excluded_parts = excluded_parts;
    const PoseLoss loss(mesh, photo, cfg);
    for (int i = 0; i < samples; ++i) {
      PoseVector v = pose_vector(pose);
      v[index] += sweep.offsets_pct[i] / 100.0 * unit;
      FullPose shifted;
      try {
        shifted = vector_pose(v);
      } catch (const DomainError&) {
        continue;
      }
      for (std::size_t li = 0; li < levels.size(); ++li) {
        try {
          sweep.loss[li][ki][i] = loss(shifted, levels[li]);
        } catch (const DomainError&) {
        }
      }
    }
  }
  return sweep;
}

namespace {

std::string number(double x) {
  char buffer[32];
  const auto r = std::to_chars(buffer, buffer + sizeof(buffer), x);
  return std::string(buffer, r.ptr);
}

}  // namespace

std::string sweep_csv(const Sweep& sweep, int level) {
  const auto it = std::find(sweep.levels.begin(), sweep.levels.end(), level);
  if (it == sweep.levels.end()) throw ArgumentError("sweep_csv: level not in sweep");
  const auto li = static_cast<std::size_t>(it - sweep.levels.begin());
  std::string out = "param,offset_pct";
  for (int k : sweep.norms) out += ",loss_k" + std::to_string(k);
  out += "\n";
  for (std::size_t i = 0; i < sweep.offsets_pct.size(); ++i) {
    out += sweep.param + "," + number(sweep.offsets_pct[i]);
    for (std::size_t ki = 0; ki < sweep.norms.size(); ++ki) {
      out += "," + number(sweep.loss[li][ki][i]);
    }
    out += "\n";
  }
  return out;
}

int count_strict_local_minima(const std::vector<double>& values) {
  int count = 0;
  for (std::size_t i = 1; i + 1 < values.size(); ++i) {
    if (values[i] < values[i - 1] && values[i] < values[i + 1]) ++count;
  }
  return count;
}

}  // namespace modelseg
