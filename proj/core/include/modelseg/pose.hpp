#pragma once

#include <array>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "modelseg/mesh.hpp"

namespace modelseg {

// Wheel-anchored pose without perspective.
//   mu    rear wheel centre in the image (pixels)
//   delta image vector from rear to front wheel centre (pixels)
//   psi   x/y components of the unit rear-axle direction in camera frame;
//         the z component is -sqrt(1 - psi_x^2 - psi_y^2).
struct RoughPose {
  Eigen::Vector2d mu = Eigen::Vector2d::Zero();
  Eigen::Vector2d delta = Eigen::Vector2d::UnitX();
  Eigen::Vector2d psi = Eigen::Vector2d::Zero();

  // Unit axle direction (psi_x, psi_y, psi_z). Throws DomainError if
  // psi_x^2 + psi_y^2 > 1.
  Eigen::Vector3d axle() const;
  void validate() const;
  // psi_x^2 + psi_y^2 > 0.99: accepted, but reported.
  bool near_degenerate() const;
};

// Rough pose plus the perspective distance f (camera to projection plane,
// pixels).
struct FullPose {
  RoughPose rough;
  double f = 1.0;

  void validate() const;
};

// Model-to-camera similarity followed by a pinhole at distance f.
// Camera frame: x right, y down, z out of the image toward the viewer; the
// projection plane is z = 0 and the eye sits at (principal_point, f).
struct CameraTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  double scale = 1.0;                                      // pixels per model unit
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();  // pixels
  double f = 1.0;
  Eigen::Vector2d principal_point = Eigen::Vector2d::Zero();

  Eigen::Vector3d to_camera(const Eigen::Vector3d& p) const {
    return scale * (rotation * p) + translation;
  }
};

struct ImagePoint {
  double u = 0.0;
  double v = 0.0;
  // Distance from the eye along the viewing axis (f - z_camera); larger is
  // farther away.
  double depth = 0.0;
};

// Projects a camera-frame point. Throws ProjectionError when the point is at
// or behind the eye plane.
ImagePoint project_camera_point(const CameraTransform& tr,
                                const Eigen::Vector3d& q);
ImagePoint project_point(const CameraTransform& tr, const Eigen::Vector3d& p);

// Closed-form pose conversion. The returned transform maps the datum's axle
// onto psi, places the rear wheel centre on the projection plane at mu, and
// makes the front wheel centre project exactly to mu + delta under the full
// perspective model. Throws DomainError for psi outside the unit disc or when
// no rotation about the axle can align the wheelbase with delta, and
// ValidationError for a degenerate datum.
CameraTransform pose_to_transform(const FullPose& pose, const CarModelDatum& datum,
                                  const Eigen::Vector2d& principal_point =
                                      Eigen::Vector2d::Zero());

// Flat optimiser vector (mu_x, mu_y, delta_x, delta_y, psi_x, psi_y, f).
using PoseVector = std::array<double, 7>;
inline constexpr std::array<const char*, 7> kPoseComponentNames = {
    "mu_x", "mu_y", "delta_x", "delta_y", "psi_x", "psi_y", "f"};

PoseVector pose_vector(const FullPose& pose);
// Throws DomainError for psi outside the unit disc, f <= 0, or delta = 0.
FullPose vector_pose(const PoseVector& v);

// Index of a component name in kPoseComponentNames; throws LookupError.
int pose_component_index(const std::string& name);

// Pose JSON: { "mu": [x,y], "delta": [x,y], "psi": [x,y], "f": number }.
// "f" may be absent in rough-pose files.
struct PoseFile {
  RoughPose rough;
  std::optional<double> f;
};
PoseFile parse_pose_json(const std::string& text);
PoseFile load_pose_file(const std::string& path);
std::string pose_to_json(const FullPose& pose);

}  // namespace modelseg
