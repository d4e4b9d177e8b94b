#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <Eigen/Core>

#include "modelseg/image.hpp"
#include "modelseg/mesh.hpp"
#include "modelseg/pose.hpp"

namespace modelseg {

// Six-part toy car: box body and cabin, two hinged side panels on the body
// and two hinged windows on the cabin, each tilted so that it shades
// differently from the surface it sits on. Model frame: x from rear to front,
// y downwards, z toward the visible side. Carries its wheel datum.
TriangleMesh make_toy_car();

// Axis-aligned box as 12 outward-facing triangles in one part.
TriangleMesh make_box(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi,
                      const std::string& part);

// Appends `other` (triangles, parts, normals) to `mesh`.
void append_mesh(TriangleMesh& mesh, const TriangleMesh& other);

// Pose that reproduces the camera `rotation` and `scale` with the rear wheel
// centre at `mu`, under perspective distance f and principal point c.
FullPose pose_from_view(const CarModelDatum& datum, const Eigen::Matrix3d& rotation,
                        double scale, const Eigen::Vector2d& mu, double f,
                        const Eigen::Vector2d& principal_point);

enum class Background { kConstant, kGradient, kClutter };

struct SceneSpec {
  TriangleMesh mesh;
  FullPose pose;
  // Direction toward the light in camera frame; normalised on use.
  Eigen::Vector3d light = Eigen::Vector3d(0.02, -0.24, 0.97);
  // Per-channel albedo; the photo has 3 channels.
  Eigen::Vector3d albedo = Eigen::Vector3d(0.95, 0.95, 0.95);
  Background background = Background::kGradient;
  // Constant level, or top and bottom levels of the vertical gradient.
  double background_top = 0.05;
  double background_bottom = 0.2;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  // Throws for an invalid pose, negative noise or a zero light vector.
  void validate() const;
};

struct SyntheticPhoto {
  ImageGrid photo;  // 3 channels in [0, 1]
  std::map<std::string, BinaryGrid> ground_truth;  // visible pixels per part
};

// Lambertian max(0, n . l) * albedo over the background, plus seeded
// Gaussian noise, clamped to [0, 1].
SyntheticPhoto synth_photo(const SceneSpec& spec, int width, int height);

// The acceptance scene: make_toy_car seen in semi-profile from slightly
// above, filling about 60% of a width x height frame, f = 4 max(w, h).
SceneSpec standard_scene(int width = 512, int height = 512);

}  // namespace modelseg
