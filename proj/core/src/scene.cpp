#include "modelseg/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "modelseg/errors.hpp"
#include "modelseg/raster.hpp"

namespace modelseg {

namespace {

using Eigen::Vector3d;

// Appends quad a-b-c-d as two triangles wound so their normal points along
// `outward`.
void add_quad(TriangleMesh& mesh, const std::string& part, Vector3d a, Vector3d b,
              Vector3d c, Vector3d d, const Vector3d& outward) {
  if ((b - a).cross(c - a).dot(outward) < 0.0) {
    std::swap(b, d);
  }
  const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
  mesh.vertices.insert(mesh.vertices.end(), {a, b, c, d});
  auto& group = mesh.parts[part];
  for (const Triangle& t : {Triangle{base, base + 1, base + 2},
                            Triangle{base, base + 2, base + 3}}) {
    group.push_back(static_cast<std::uint32_t>(mesh.triangles.size()));
    mesh.triangles.push_back(t);
  }
}

double radians(double degrees) { return degrees * std::numbers::pi / 180.0; }

}  // namespace

TriangleMesh make_box(const Vector3d& lo, const Vector3d& hi, const std::string& part) {
  TriangleMesh mesh;
  auto corner = [&](int x, int y, int z) {
    return Vector3d(x ? hi.x() : lo.x(), y ? hi.y() : lo.y(), z ? hi.z() : lo.z());
  };
  for (int axis = 0; axis < 3; ++axis) {
    for (int side = 0; side < 2; ++side) {
      Vector3d outward = Vector3d::Zero();
      outward[axis] = side ? 1.0 : -1.0;
      const int a1 = (axis + 1) % 3;
      const int a2 = (axis + 2) % 3;
      Vector3d q[4];
      const int pattern[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
      for (int k = 0; k < 4; ++k) {
        int idx[3];
        idx[axis] = side;
        idx[a1] = pattern[k][0];
        idx[a2] = pattern[k][1];
        q[k] = corner(idx[0], idx[1], idx[2]);
      }
      add_quad(mesh, part, q[0], q[1], q[2], q[3], outward);
    }
  }
  return compute_face_normals(std::move(mesh));
}

void append_mesh(TriangleMesh& mesh, const TriangleMesh& other) {
  const auto vbase = static_cast<std::uint32_t>(mesh.vertices.size());
  const auto tbase = static_cast<std::uint32_t>(mesh.triangles.size());
  mesh.vertices.insert(mesh.vertices.end(), other.vertices.begin(), other.vertices.end());
  for (const Triangle& t : other.triangles) {
    mesh.triangles.push_back({t[0] + vbase, t[1] + vbase, t[2] + vbase});
  }
  mesh.face_normals.insert(mesh.face_normals.end(), other.face_normals.begin(),
                           other.face_normals.end());
  for (const auto& [name, tris] : other.parts) {
    auto& group = mesh.parts[name];
    for (auto t : tris) group.push_back(t + tbase);
  }
}

TriangleMesh make_toy_car() {
  TriangleMesh car = make_box({-0.6, -0.85, -0.8}, {3.0, -0.25, 0.8}, "body");
  append_mesh(car, make_box({0.2, -1.35, -0.7}, {1.9, -0.85, 0.7}, "cabin"));

  TriangleMesh flaps;
  // Side panels sit 0.02 off the body side. The front panel stands out at its
  // lower edge and faces upward; the rear panel stands out at its upper edge
  // and faces downward.
  const double panel_tilt = std::tan(radians(25.0));
  const double panel_out = 0.28 * panel_tilt;
  add_quad(flaps, "front_panel", {1.55, -0.74, 0.82}, {2.85, -0.74, 0.82},
           {2.85, -0.46, 0.82 + panel_out}, {1.55, -0.46, 0.82 + panel_out},
           Vector3d(0.0, -std::sin(radians(25.0)), std::cos(radians(25.0))));
  add_quad(flaps, "rear_panel", {-0.45, -0.74, 0.82 + panel_out},
           {1.40, -0.74, 0.82 + panel_out}, {1.40, -0.46, 0.82}, {-0.45, -0.46, 0.82},
           Vector3d(0.0, std::sin(radians(25.0)), std::cos(radians(25.0))));
  // Windows sit 0.02 off the cabin side. The front window stands out at its
  // rear edge and faces backward, the rear window mirrors it.
  const double window_out = 0.6 * std::tan(radians(30.0));
  add_quad(flaps, "front_window", {1.1, -1.28, 0.72 + window_out},
           {1.7, -1.28, 0.72}, {1.7, -0.92, 0.72}, {1.1, -0.92, 0.72 + window_out},
           Vector3d(-std::sin(radians(30.0)), 0.0, std::cos(radians(30.0))));
  add_quad(flaps, "rear_window", {0.35, -1.28, 0.72}, {0.95, -1.28, 0.72 + window_out},
           {0.95, -0.92, 0.72 + window_out}, {0.35, -0.92, 0.72},
           Vector3d(std::sin(radians(30.0)), 0.0, std::cos(radians(30.0))));
  append_mesh(car, compute_face_normals(std::move(flaps)));

  CarModelDatum datum;
  datum.rear_wheel_center = {0.0, -0.3, 0.8};
  datum.front_wheel_center = {2.4, -0.3, 0.8};
  datum.rear_axle_dir = {0.0, 0.0, -1.0};
  car.datum = datum;
  validate_mesh(car);
  return car;
}

FullPose pose_from_view(const CarModelDatum& datum, const Eigen::Matrix3d& rotation,
                        double scale, const Eigen::Vector2d& mu, double f,
                        const Eigen::Vector2d& principal_point) {
  datum.validate();
  const Vector3d axle = rotation * datum.rear_axle_dir;
  if (axle.z() > 0.0) {
    throw DomainError("pose_from_view: the axle must point away from the viewer");
  }
  CameraTransform tr;
  tr.rotation = rotation;
  tr.scale = scale;
  tr.f = f;
  tr.principal_point = principal_point;
  tr.translation = Vector3d(mu.x(), mu.y(), 0.0) - scale * (rotation * datum.rear_wheel_center);
  const ImagePoint front = project_point(tr, datum.front_wheel_center);
  FullPose pose;
  pose.rough.mu = mu;
  pose.rough.delta = Eigen::Vector2d(front.u, front.v) - mu;
  pose.rough.psi = axle.head<2>();
  pose.f = f;
  pose.validate();
  return pose;
}

void SceneSpec::validate() const {
  pose.validate();
  if (!(noise_sigma >= 0.0)) throw ArgumentError("scene: noise must be >= 0");
  if (!(light.norm() > 0.0)) throw ArgumentError("scene: light direction is zero");
}

SyntheticPhoto synth_photo(const SceneSpec& spec, int width, int height) {
  spec.validate();
  const Framebuffer fb = render_normals(spec.mesh, spec.pose, width, height);
  const Vector3d light = spec.light.normalized();
  std::mt19937_64 rng(spec.seed);

  ImageGrid background(width, height, 1, spec.background_top);
  if (spec.background != Background::kConstant) {
    for (int v = 0; v < height; ++v) {
      const double t = height > 1 ? static_cast<double>(v) / (height - 1) : 0.0;
      const double level =
          spec.background_top + t * (spec.background_bottom - spec.background_top);
      for (int u = 0; u < width; ++u) background.at(u, v) = level;
    }
  }
  if (spec.background == Background::kClutter) {
    std::uniform_int_distribution<int> pick_u(0, width - 1);
    std::uniform_int_distribution<int> pick_v(0, height - 1);
    std::uniform_real_distribution<double> pick_level(spec.background_top,
                                                      spec.background_bottom + 0.1);
    for (int r = 0; r < 24; ++r) {
      const int u0 = pick_u(rng);
      const int v0 = pick_v(rng);
      const int u1 = std::min(width, u0 + 1 + pick_u(rng) / 6);
      const int v1 = std::min(height, v0 + 1 + pick_v(rng) / 6);
      const double level = pick_level(rng);
      for (int v = v0; v < v1; ++v) {
        for (int u = u0; u < u1; ++u) background.at(u, v) = level;
      }
    }
  }

  SyntheticPhoto out;
  out.photo = ImageGrid(width, height, 3);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      double shade = -1.0;
      if (fb.coverage.at(u, v)) {
        const Vector3d n(fb.normal.at(u, v, 0), fb.normal.at(u, v, 1),
                         fb.normal.at(u, v, 2));
        shade = std::max(0.0, n.dot(light));
      }
      for (int c = 0; c < 3; ++c) {
        double value = shade >= 0.0 ? shade * spec.albedo[c] : background.at(u, v);
        if (spec.noise_sigma > 0.0) value += noise(rng);
        out.photo.at(u, v, c) = std::clamp(value, 0.0, 1.0);
      }
    }
  }
  for (const auto& name : fb.part_names) out.ground_truth[name] = part_region(fb, name);
  return out;
}

SceneSpec standard_scene(int width, int height) {
  if (width <= 0 || height <= 0) throw ArgumentError("standard_scene: empty frame");
  SceneSpec spec;
  spec.mesh = make_toy_car();
  const Eigen::Matrix3d rotation =
      (Eigen::AngleAxisd(radians(-20.0), Vector3d::UnitX()) *
       Eigen::AngleAxisd(radians(-30.0), Vector3d::UnitY()))
          .toRotationMatrix();
  const double scale = 80.0 * static_cast<double>(width) / 512.0;
  const Eigen::Vector2d center(0.5 * width, 0.5 * height);
  // Put the middle of the car's bounding box at the image centre.
  const Vector3d middle(1.2, -0.8, 0.0);
  const Vector3d offset = scale * (rotation * (middle - spec.mesh.datum->rear_wheel_center));
  const Eigen::Vector2d mu = center - offset.head<2>();
  spec.pose = pose_from_view(*spec.mesh.datum, rotation, scale, mu,
                             4.0 * std::max(width, height), center);
  spec.noise_sigma = 0.01;
  spec.seed = 1;
  return spec;
}

}  // namespace modelseg
