#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Core>

#include "modelseg/image.hpp"
#include "modelseg/mesh.hpp"
#include "modelseg/pose.hpp"

namespace modelseg::testing {

// Axis-aligned quad in the plane z = `z`, wound to face +z (toward the
// viewer), as one part.
inline TriangleMesh facing_quad(double x0, double y0, double x1, double y1, double z,
                                const std::string& part) {
  TriangleMesh mesh;
  mesh.vertices = {{x0, y0, z}, {x1, y0, z}, {x1, y1, z}, {x0, y1, z}};
  mesh.triangles = {{0, 1, 2}, {0, 2, 3}};
  mesh = compute_face_normals(std::move(mesh));
  if (mesh.face_normals[0].z() < 0.0) {
    mesh.triangles = {{0, 2, 1}, {0, 3, 2}};
    mesh = compute_face_normals(std::move(mesh));
  }
  mesh.parts[part] = {0, 1};
  return mesh;
}

// Camera with no rotation, unit scale and an eye so far away that points on
// z = 0 project to their own (x, y).
inline CameraTransform flat_camera() {
  CameraTransform tr;
  tr.f = 1e9;
  return tr;
}

inline BinaryGrid filled_rect(int width, int height, int u0, int v0, int u1, int v1) {
  BinaryGrid m(width, height);
  for (int v = v0; v < v1; ++v) {
    for (int u = u0; u < u1; ++u) m.set(u, v, true);
  }
  return m;
}

inline BinaryGrid random_mask(int width, int height, double density, std::mt19937_64& rng) {
  std::bernoulli_distribution bit(density);
  BinaryGrid m(width, height);
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) m.set(u, v, bit(rng));
  }
  return m;
}

inline ImageGrid random_image(int width, int height, int channels, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> value(-1.0, 1.0);
  ImageGrid g(width, height, channels);
  for (auto& x : g.data()) x = value(rng);
  return g;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("modelseg_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace modelseg::testing
