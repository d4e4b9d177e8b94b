#include "modelseg/registration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include <json.hpp>

#include "modelseg/errors.hpp"
#include "modelseg/imgproc.hpp"

namespace modelseg {

void LossConfig::validate() const {
  if (k != 1 && k != 2) throw ArgumentError("loss: k must be 1 or 2");
  if (smoothing_levels.empty()) {
    throw ArgumentError("loss: smoothing_levels must not be empty");
  }
  for (std::size_t i = 0; i < smoothing_levels.size(); ++i) {
    if (smoothing_levels[i] < 0) {
      throw ArgumentError("loss: smoothing levels must be >= 0");
    }
    if (i > 0 && smoothing_levels[i] >= smoothing_levels[i - 1]) {
      throw ArgumentError("loss: smoothing levels must be strictly decreasing");
    }
  }
  if (smoothing_levels.back() != 0) {
    throw ArgumentError("loss: the last smoothing level must be 0");
  }
}

double default_initial_f(int width, int height) {
  return 4.0 * static_cast<double>(std::max(width, height));
}

SimplexConfig default_simplex_config(int width, int /*height*/, double f0) {
  const double px = 0.02 * static_cast<double>(width);
  SimplexConfig config;
  config.initial_step = {px, px, px, px, 0.05, 0.05, 0.1 * f0};
  config.tolerance = 1e-6;
  config.max_evaluations = 200 * 7;
  config.restarts = 2;
  // A second coarse run with translation steps matching a 5% pose error.
  const double wide = 0.05 * static_cast<double>(width);
  config.coarse_alternative_steps = {{wide, wide, wide, wide, 0.05, 0.05, 0.1 * f0}};
  return config;
}

double default_mask_margin(int width, int height) {
  return 0.1 * std::hypot(static_cast<double>(width), static_cast<double>(height));
}

double gradient_loss(const ImageGrid& gn, const ImageGrid& gi) {
  if (!gn.same_shape(gi)) throw ArgumentError("gradient_loss: shape mismatch");
  double r = 0.0;
  try {
    r = pearson(gn, gi);
  } catch (const DegenerateCorrelationError&) {
    return 1.0;
  }
  return std::clamp(1.0 - r * r, 0.0, 1.0);
}

PoseLoss::PoseLoss(const TriangleMesh& mesh, ImageGrid photo, LossConfig config)
    : mesh_(mesh), photo_(std::move(photo)), config_(std::move(config)) {
  if (photo_.empty()) throw ArgumentError("loss: photo is empty");
  if (config_.k != 1 && config_.k != 2) throw ArgumentError("loss: k must be 1 or 2");
  int max_level = 0;
  for (int n : config_.smoothing_levels) {
    if (n < 0) throw ArgumentError("loss: smoothing levels must be >= 0");
    max_level = std::max(max_level, n);
  }
  ImageGrid level = photo_;
  for (int n = 0; n <= max_level; ++n) {
    if (n > 0) level = pyramid_reduce(level);
    photo_gradients_.push_back(gradient_magnitude(level, config_.k));
  }
}

const ImageGrid& PoseLoss::photo_gradient(int level) const {
  if (level < 0 || level >= static_cast<int>(photo_gradients_.size())) {
    throw ArgumentError("loss: level " + std::to_string(level) +
                        " is not among the configured smoothing levels");
  }
  return photo_gradients_[level];
}

void PoseLoss::normal_gradient_into(const FullPose& pose, int level,
                                    Scratch& scratch) const {
  render_normals_into(scratch.fb, mesh_, pose, photo_.width(), photo_.height(),
                      config_.excluded_parts, config_.render);
  const ImageGrid* src = &scratch.fb.normal;
  for (int n = 0; n < level; ++n) {
    ImageGrid& dst = scratch.level[n % 2];
    pyramid_reduce_into(*src, dst, scratch.reduce);
    src = &dst;
  }
  gradient_magnitude_into(*src, config_.k, scratch.gradient);
}

ImageGrid PoseLoss::normal_gradient(const FullPose& pose, int level) const {
  photo_gradient(level);
  Scratch scratch;
  normal_gradient_into(pose, level, scratch);
  return std::move(scratch.gradient);
}

double PoseLoss::operator()(const FullPose& pose, int level) const {
  const ImageGrid& gi = photo_gradient(level);
  std::lock_guard lock(mutex_);
  normal_gradient_into(pose, level, scratch_);
  return gradient_loss(scratch_.gradient, gi);
}

double evaluate_pose_loss(const TriangleMesh& mesh, const FullPose& pose,
                          const ImageGrid& photo, int level,
                          const LossConfig& config) {
  LossConfig single = config;
  single.smoothing_levels = {level};
  return PoseLoss(mesh, photo, single)(pose, level);
}

MaskedPhoto background_mask(const ImageGrid& photo, const RoughPose& rough,
                            const TriangleMesh& mesh, double margin,
                            std::optional<double> f,
                            const std::set<std::string>& excluded_parts) {
  if (photo.empty()) throw ArgumentError("background_mask: photo is empty");
  if (margin < 0.0) throw ArgumentError("background_mask: margin must be >= 0");
  rough.validate();
  FullPose pose{rough, f.value_or(default_initial_f(photo.width(), photo.height()))};
  const Framebuffer fb =
      render_normals(mesh, pose, photo.width(), photo.height(), excluded_parts);
  MaskedPhoto out;
  if (!fb.coverage.any()) {
    out.photo = photo;
    out.mask = BinaryGrid(photo.width(), photo.height(), true);
    out.warning = "WARN empty_silhouette rough pose renders no pixels; photo left unmasked";
    return out;
  }
  out.mask = dilate(silhouette(fb), margin);
  out.photo = apply_mask(photo, out.mask);
  return out;
}

std::string trace_json_line(const TraceEvent& event) {
  nlohmann::ordered_json line;
  line["level"] = event.level;
  line["eval_count"] = event.eval_count;
  line["loss"] = event.loss;
  line["pose"] = nlohmann::ordered_json::parse(pose_to_json(event.pose));
  return line.dump() + "\n";
}

RegistrationResult coarse_to_fine_register(const TriangleMesh& mesh,
                                           const ImageGrid& photo,
                                           const RoughPose& rough,
                                           const LossConfig& config,
                                           const SimplexConfig& simplex,
                                           std::optional<double> initial_f,
                                           const TraceSink& trace) {
  config.validate();
  simplex.validate(7);
  rough.validate();
  if (!mesh.datum) throw ValidationError("mesh has no datum; a pose cannot be applied");
  const PoseLoss loss(mesh, photo, config);

  RegistrationResult result;
  result.pose = FullPose{rough, initial_f.value_or(
                                    default_initial_f(photo.width(), photo.height()))};
  result.pose.validate();
  if (rough.near_degenerate()) {
    result.warnings.push_back("WARN near_degenerate_pose psi_x^2 + psi_y^2 > 0.99");
  }
  try {
    result.initial_loss = loss(result.pose, 0);
  } catch (const DomainError&) {
    result.initial_loss = 1.0;
  }
  result.final_loss = result.initial_loss;
  if (result.initial_loss >= 1.0) {
    result.warnings.push_back(
        "WARN degenerate_start model is not visible at the starting pose; "
        "returned unchanged");
    return result;
  }

  PoseVector current = pose_vector(result.pose);
  for (int level : config.smoothing_levels) {
    const Objective objective = [&](std::span<const double> x) {
      PoseVector v;
      std::copy(x.begin(), x.end(), v.begin());
      try {
        return loss(vector_pose(v), level);
      } catch (const DomainError&) {
        return std::numeric_limits<double>::infinity();
      }
    };
    // Attempts at the coarsest level share one evaluation count and one
    // running best, so the trace stays monotone.
    int eval_offset = 0;
    double level_best = std::numeric_limits<double>::infinity();
    ImprovementCallback on_improvement;
    if (trace) {
      on_improvement = [&](int evals, double value, std::span<const double> x) {
        if (!std::isfinite(value) || !(value < level_best)) return;
        level_best = value;
        PoseVector v;
        std::copy(x.begin(), x.end(), v.begin());
        trace(TraceEvent{level, eval_offset + evals, value, vector_pose(v)});
      };
    }
    const bool coarsest = level == config.smoothing_levels.front();
    std::vector<std::vector<double>> steps{simplex.initial_step};
    if (coarsest) {
      steps.insert(steps.end(), simplex.coarse_alternative_steps.begin(),
                   simplex.coarse_alternative_steps.end());
    }
    SimplexResult run;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      SimplexConfig attempt_config = simplex;
      attempt_config.initial_step = steps[i];
      SimplexResult attempt =
          nelder_mead(objective, current, attempt_config, on_improvement);
      eval_offset += attempt.evaluations;
      if (i == 0 || attempt.value < run.value) run = std::move(attempt);
    }
    run.evaluations = eval_offset;
    std::copy(run.x.begin(), run.x.end(), current.begin());
    result.levels.push_back(LevelOutcome{level, run.value, run.evaluations,
                                         vector_pose(current)});
  }
  // The last level is always 0, so its simplex value is the final loss.
  const FullPose refined = vector_pose(current);
  const double refined_loss = result.levels.back().loss;
  if (refined_loss <= result.initial_loss) {
    result.pose = refined;
    result.final_loss = refined_loss;
  } else {
    result.warnings.push_back(
        "WARN no_improvement refined pose was worse at level 0; keeping the start");
  }
  return result;
}

}  // namespace modelseg
