#pragma once

#include <set>
#include <string>
#include <vector>

#include "modelseg/image.hpp"
#include "modelseg/mesh.hpp"
#include "modelseg/pose.hpp"

namespace modelseg {

struct RenderOptions {
  bool cull_back_faces = false;
  // Interpolate per-vertex normals instead of using flat face normals.
  bool smooth_normals = false;
};

// Attributes of one z-buffered render.
//   normal    3 channels, camera-frame unit normal of the nearest surface,
//             (0,0,0) where uncovered
//   depth     eye distance of the nearest surface, +infinity where uncovered
//   part_id   1 + index into part_names, 0 where uncovered
//   coverage  part_id > 0
struct Framebuffer {
  int width = 0;
  int height = 0;
  ImageGrid normal;
  ImageGrid depth;
  LabelGrid part_id;
  BinaryGrid coverage;
  std::vector<std::string> part_names;

  // 1-based id of `part`; throws LookupError listing the known parts.
  std::uint16_t id_of(const std::string& part) const;
};

// Rasterises every non-excluded triangle with a top-left fill rule and pixel
// centres at integer + 0.5. Triangles with a vertex at or behind the eye are
// skipped. Throws ArgumentError for a zero-sized target.
Framebuffer render_normals(const TriangleMesh& mesh, const CameraTransform& camera,
                           int width, int height,
                           const std::set<std::string>& excluded_parts = {},
                           const RenderOptions& options = {});

// Same, with the camera derived from a pose, the mesh's datum and the image
// centre as principal point. Throws ValidationError if the mesh has no datum.
Framebuffer render_normals(const TriangleMesh& mesh, const FullPose& pose,
                           int width, int height,
                           const std::set<std::string>& excluded_parts = {},
                           const RenderOptions& options = {});

// In-place forms of the above that reuse the buffers already held by `fb`.
void render_normals_into(Framebuffer& fb, const TriangleMesh& mesh,
                         const CameraTransform& camera, int width, int height,
                         const std::set<std::string>& excluded_parts = {},
                         const RenderOptions& options = {});
void render_normals_into(Framebuffer& fb, const TriangleMesh& mesh, const FullPose& pose,
                         int width, int height,
                         const std::set<std::string>& excluded_parts = {},
                         const RenderOptions& options = {});

// Transform used by the pose overload of render_normals.
CameraTransform camera_for(const TriangleMesh& mesh, const FullPose& pose,
                           int width, int height);

BinaryGrid silhouette(const Framebuffer& fb);

// Pixels of `part` that are 4-adjacent to a different id, background, or the
// image border.
BinaryGrid part_outline(const Framebuffer& fb, const std::string& part);

// All pixels showing `part`.
BinaryGrid part_region(const Framebuffer& fb, const std::string& part);

}  // namespace modelseg
