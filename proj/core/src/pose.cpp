#include "modelseg/pose.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Geometry>
#include <json.hpp>

#include "modelseg/errors.hpp"

namespace modelseg {

Eigen::Vector3d RoughPose::axle() const {
  const double r2 = psi.squaredNorm();
  if (!(r2 <= 1.0)) {
    throw DomainError("psi_x^2 + psi_y^2 must not exceed 1");
  }
  return {psi.x(), psi.y(), -std::sqrt(std::max(0.0, 1.0 - r2))};
}

void RoughPose::validate() const {
  if (!mu.allFinite() || !delta.allFinite() || !psi.allFinite()) {
    throw DomainError("pose components must be finite");
  }
  if (!(psi.squaredNorm() <= 1.0)) {
    throw DomainError("psi_x^2 + psi_y^2 must not exceed 1");
  }
  if (!(delta.norm() > 0.0)) throw DomainError("|delta| must be positive");
}

bool RoughPose::near_degenerate() const { return psi.squaredNorm() > 0.99; }

void FullPose::validate() const {
  rough.validate();
  if (!(f > 0.0) || !std::isfinite(f)) throw DomainError("f must be positive");
}

ImagePoint project_camera_point(const CameraTransform& tr,
                                const Eigen::Vector3d& q) {
  const double depth = tr.f - q.z();
  if (!(depth > 0.0)) {
    throw ProjectionError("point lies at or behind the camera");
  }
  const double m = tr.f / depth;
  return {tr.principal_point.x() + (q.x() - tr.principal_point.x()) * m,
          tr.principal_point.y() + (q.y() - tr.principal_point.y()) * m, depth};
}

ImagePoint project_point(const CameraTransform& tr, const Eigen::Vector3d& p) {
  return project_camera_point(tr, tr.to_camera(p));
}

CameraTransform pose_to_transform(const FullPose& pose, const CarModelDatum& datum,
                                  const Eigen::Vector2d& principal_point) {
  pose.validate();
  datum.validate();
  const Eigen::Vector3d axle = pose.rough.axle();
  const Eigen::Vector2d& mu = pose.rough.mu;
  const Eigen::Vector2d& delta = pose.rough.delta;
  const double F = pose.f;

  // Step 1: bring the model axle onto the requested axle.
  const Eigen::Matrix3d align =
      Eigen::Quaterniond::FromTwoVectors(datum.rear_axle_dir, axle)
          .toRotationMatrix();
  const Eigen::Vector3d wheelbase =
      align * (datum.front_wheel_center - datum.rear_wheel_center);

  // Step 2: spin about the axle until the perspective image of the wheelbase
  // is parallel to delta. With the rear wheel on the projection plane, the
  // front wheel projects to mu + delta iff s * v = F * delta where
  //   v = F * w.xy + (mu + delta - c) * w.z,
  // so v must be orthogonal to the image normal n of delta, i.e. w . e = 0.
  const Eigen::Vector2d dir = delta.normalized();
  const Eigen::Vector2d normal(-dir.y(), dir.x());
  const Eigen::Vector2d far_end = mu + delta - principal_point;
  const Eigen::Vector3d e(F * normal.x(), F * normal.y(), far_end.dot(normal));

  const Eigen::Vector3d w_par = wheelbase.dot(axle) * axle;
  const Eigen::Vector3d w_perp = wheelbase - w_par;
  const Eigen::Vector3d w_cross = axle.cross(w_perp);
  const double A = w_perp.dot(e);
  const double B = w_cross.dot(e);
  const double C = w_par.dot(e);
  const double R = std::hypot(A, B);
  if (!(R > 1e-12 * wheelbase.norm() * e.norm())) {
    throw DomainError("pose is degenerate: wheelbase cannot be oriented");
  }
  const double ratio = -C / R;
  if (std::abs(ratio) > 1.0) {
    throw DomainError("pose is infeasible: no rotation about the axle matches delta");
  }
  const double beta = std::atan2(B, A);
  const double gamma = std::acos(ratio);

  auto spun = [&](double alpha) -> Eigen::Vector3d {
    return w_par + std::cos(alpha) * w_perp + std::sin(alpha) * w_cross;
  };
  auto along = [&](const Eigen::Vector3d& w) {
    const Eigen::Vector2d v = F * w.head<2>() + far_end * w.z();
    return v.dot(dir);
  };
  double alpha = beta + gamma;
  double best = along(spun(alpha));
  if (const double other = along(spun(beta - gamma)); other > best) {
    alpha = beta - gamma;
    best = other;
  }
  const double wb_len = wheelbase.norm();
  if (!(best > 1e-9 * F * wb_len)) {
    throw DomainError("pose is degenerate: projected wheelbase vanishes");
  }

  CameraTransform tr;
  tr.rotation = Eigen::AngleAxisd(alpha, axle).toRotationMatrix() * align;
  // Step 3: scale so the projected wheelbase has length |delta|.
  tr.scale = F * delta.norm() / best;
  tr.f = F;
  tr.principal_point = principal_point;
  // Step 4: rear wheel centre onto (mu, 0).
  tr.translation = Eigen::Vector3d(mu.x(), mu.y(), 0.0) -
                   tr.scale * (tr.rotation * datum.rear_wheel_center);
  const Eigen::Vector3d front = tr.to_camera(datum.front_wheel_center);
  if (!(F - front.z() > 0.0)) {
    throw DomainError("pose places the front wheel behind the camera");
  }
  return tr;
}

PoseVector pose_vector(const FullPose& pose) {
  return {pose.rough.mu.x(),    pose.rough.mu.y(),  pose.rough.delta.x(),
          pose.rough.delta.y(), pose.rough.psi.x(), pose.rough.psi.y(),
          pose.f};
}

FullPose vector_pose(const PoseVector& v) {
  FullPose pose;
  pose.rough.mu = {v[0], v[1]};
  pose.rough.delta = {v[2], v[3]};
  pose.rough.psi = {v[4], v[5]};
  pose.f = v[6];
  pose.validate();
  return pose;
}

int pose_component_index(const std::string& name) {
  for (std::size_t i = 0; i < kPoseComponentNames.size(); ++i) {
    if (name == kPoseComponentNames[i]) return static_cast<int>(i);
  }
  throw LookupError("unknown pose component '" + name +
                    "' (expected mu_x, mu_y, delta_x, delta_y, psi_x, psi_y, f)");
}

PoseFile parse_pose_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("pose JSON: ") + e.what(), 1);
  }
  auto vec2 = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != 2 ||
        !j[key][0].is_number() || !j[key][1].is_number()) {
      throw ValidationError(std::string("pose: '") + key +
                            "' must be an array of 2 numbers");
    }
    return Eigen::Vector2d(j[key][0].get<double>(), j[key][1].get<double>());
  };
  PoseFile out;
  out.rough.mu = vec2("mu");
  out.rough.delta = vec2("delta");
  out.rough.psi = vec2("psi");
  if (j.contains("f") && !j["f"].is_null()) {
    if (!j["f"].is_number()) throw ValidationError("pose: 'f' must be a number");
    out.f = j["f"].get<double>();
    if (!(*out.f > 0.0)) throw DomainError("pose: f must be positive");
  }
  out.rough.validate();
  return out;
}

PoseFile load_pose_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open pose file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_pose_json(buffer.str());
}

std::string pose_to_json(const FullPose& pose) {
  nlohmann::ordered_json j;
  j["mu"] = {pose.rough.mu.x(), pose.rough.mu.y()};
  j["delta"] = {pose.rough.delta.x(), pose.rough.delta.y()};
  j["psi"] = {pose.rough.psi.x(), pose.rough.psi.y()};
  j["f"] = pose.f;
  return j.dump(2) + "\n";
}

}  // namespace modelseg
