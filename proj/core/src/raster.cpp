#include "modelseg/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "modelseg/errors.hpp"

namespace modelseg {

namespace {

// Vertices are snapped to 1/256 pixel so edge tests are exact integers.
constexpr int kSubpixelBits = 8;
constexpr std::int64_t kSubpixel = std::int64_t{1} << kSubpixelBits;
constexpr std::int64_t kHalfPixel = kSubpixel / 2;
// Screen coordinates beyond this (pixels) would overflow the edge products.
constexpr double kMaxScreenCoord = 1 << 20;

struct ScreenVertex {
  std::int64_t x;
  std::int64_t y;
  double depth;
};

struct Edge {
  std::int64_t a;  // d/dx
  std::int64_t b;  // d/dy
  std::int64_t c;
  std::int64_t bias;  // 0 on top-left edges, -1 elsewhere

  std::int64_t at(std::int64_t px, std::int64_t py) const {
    return a * px + b * py + c + bias;
  }
};

// Edge function for p relative to directed edge p0 -> p1; positive on the
// interior side of a positively oriented triangle.
Edge make_edge(const ScreenVertex& p0, const ScreenVertex& p1) {
  const std::int64_t dx = p1.x - p0.x;
  const std::int64_t dy = p1.y - p0.y;
  Edge e;
  e.a = -dy;
  e.b = dx;
  e.c = dy * p0.x - dx * p0.y;
  const bool top_left = dy > 0 || (dy == 0 && dx < 0);
  e.bias = top_left ? 0 : -1;
  return e;
}

}  // namespace

std::uint16_t Framebuffer::id_of(const std::string& part) const {
  const auto it = std::find(part_names.begin(), part_names.end(), part);
  if (it == part_names.end()) {
    std::string known;
    for (const auto& name : part_names) known += (known.empty() ? "" : ", ") + name;
    throw LookupError("unknown part '" + part + "' (available: " + known + ")");
  }
  return static_cast<std::uint16_t>(it - part_names.begin() + 1);
}

Framebuffer render_normals(const TriangleMesh& mesh, const CameraTransform& camera,
                           int width, int height,
                           const std::set<std::string>& excluded_parts,
                           const RenderOptions& options) {
  Framebuffer fb;
  render_normals_into(fb, mesh, camera, width, height, excluded_parts, options);
  return fb;
}

void render_normals_into(Framebuffer& fb, const TriangleMesh& mesh,
                         const CameraTransform& camera, int width, int height,
                         const std::set<std::string>& excluded_parts,
                         const RenderOptions& options) {
  if (width <= 0 || height <= 0) {
    throw ArgumentError("render_normals: framebuffer must be non-empty");
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  fb.width = width;
  fb.height = height;
  fb.normal.assign(width, height, 3, 0.0);
  fb.depth.assign(width, height, 1, kInf);
  fb.part_id.assign(width, height, 0);
  fb.coverage.assign(width, height, false);
  fb.part_names = part_names(mesh);
  if (mesh.triangles.empty()) return;

  const auto part_index = triangle_part_indices(mesh);
  std::vector<bool> part_excluded(fb.part_names.size(), false);
  for (std::size_t i = 0; i < fb.part_names.size(); ++i) {
    part_excluded[i] = excluded_parts.count(fb.part_names[i]) > 0;
  }

  std::vector<Eigen::Vector3d> vertex_normals;
  if (options.smooth_normals) {
    vertex_normals = mesh.vertex_normals.size() == mesh.vertices.size()
                         ? mesh.vertex_normals
                         : compute_vertex_normals(mesh).vertex_normals;
    for (auto& n : vertex_normals) n = camera.rotation * n;
  }

  // Project every vertex once.
  std::vector<Eigen::Vector3d> cam(mesh.vertices.size());
  std::vector<ScreenVertex> screen(mesh.vertices.size());
  std::vector<bool> usable(mesh.vertices.size());
  const double near_limit = 1e-9 * camera.f;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    cam[i] = camera.to_camera(mesh.vertices[i]);
    const double depth = camera.f - cam[i].z();
    usable[i] = depth > near_limit;
    if (!usable[i]) continue;
    const ImagePoint p = project_camera_point(camera, cam[i]);
    if (!(std::abs(p.u) < kMaxScreenCoord && std::abs(p.v) < kMaxScreenCoord)) {
      usable[i] = false;
      continue;
    }
    screen[i] = {std::llround(p.u * kSubpixel), std::llround(p.v * kSubpixel),
                 p.depth};
  }
  const Eigen::Vector3d eye(camera.principal_point.x(), camera.principal_point.y(),
                            camera.f);

  auto normal = fb.normal.data();
  auto depth = fb.depth.data();
  auto ids = fb.part_id.labels();

  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    if (part_excluded[part_index[t]]) continue;
    auto tri = mesh.triangles[t];
    if (!usable[tri[0]] || !usable[tri[1]] || !usable[tri[2]]) continue;

    const Eigen::Vector3d face_normal = camera.rotation * mesh.face_normals[t];
    if (options.cull_back_faces && face_normal.dot(cam[tri[0]] - eye) > 0.0) {
      continue;
    }

    ScreenVertex v0 = screen[tri[0]];
    ScreenVertex v1 = screen[tri[1]];
    ScreenVertex v2 = screen[tri[2]];
    std::int64_t area = (v1.x - v0.x) * (v2.y - v0.y) - (v1.y - v0.y) * (v2.x - v0.x);
    if (area == 0) continue;
    if (area < 0) {
      std::swap(v1, v2);
      std::swap(tri[1], tri[2]);
      area = -area;
    }
    // w0 weights v0 and is measured against the opposite edge v1 -> v2.
    const Edge e0 = make_edge(v1, v2);
    const Edge e1 = make_edge(v2, v0);
    const Edge e2 = make_edge(v0, v1);

    const std::int64_t min_x = std::min({v0.x, v1.x, v2.x});
    const std::int64_t max_x = std::max({v0.x, v1.x, v2.x});
    const std::int64_t min_y = std::min({v0.y, v1.y, v2.y});
    const std::int64_t max_y = std::max({v0.y, v1.y, v2.y});
    auto first_center = [](std::int64_t lo) {
      // Smallest i with i * S + S/2 >= lo.
      const std::int64_t num = lo - kHalfPixel;
      return num >= 0 ? (num + kSubpixel - 1) / kSubpixel : -((-num) / kSubpixel);
    };
    auto last_center = [](std::int64_t hi) {
      const std::int64_t num = hi - kHalfPixel;
      return num >= 0 ? num / kSubpixel : -((-num + kSubpixel - 1) / kSubpixel);
    };
    const int i0 = static_cast<int>(std::max<std::int64_t>(0, first_center(min_x)));
    const int i1 = static_cast<int>(std::min<std::int64_t>(width - 1, last_center(max_x)));
    const int j0 = static_cast<int>(std::max<std::int64_t>(0, first_center(min_y)));
    const int j1 = static_cast<int>(std::min<std::int64_t>(height - 1, last_center(max_y)));
    if (i0 > i1 || j0 > j1) continue;

    const double inv_area = 1.0 / static_cast<double>(area);
    const double inv_d0 = 1.0 / v0.depth;
    const double inv_d1 = 1.0 / v1.depth;
    const double inv_d2 = 1.0 / v2.depth;
    const auto id = static_cast<std::uint16_t>(part_index[t] + 1);

    for (int j = j0; j <= j1; ++j) {
      const std::int64_t py = j * kSubpixel + kHalfPixel;
      const std::int64_t px0 = i0 * kSubpixel + kHalfPixel;
      std::int64_t w0 = e0.at(px0, py);
      std::int64_t w1 = e1.at(px0, py);
      std::int64_t w2 = e2.at(px0, py);
      const std::int64_t s0 = e0.a * kSubpixel;
      const std::int64_t s1 = e1.a * kSubpixel;
      const std::int64_t s2 = e2.a * kSubpixel;
      for (int i = i0; i <= i1; ++i, w0 += s0, w1 += s1, w2 += s2) {
        if ((w0 | w1 | w2) < 0) continue;
        // Undo the fill-rule bias for interpolation weights.
        const double l0 = static_cast<double>(w0 - e0.bias) * inv_area;
        const double l1 = static_cast<double>(w1 - e1.bias) * inv_area;
        const double l2 = static_cast<double>(w2 - e2.bias) * inv_area;
        const double inv_depth = l0 * inv_d0 + l1 * inv_d1 + l2 * inv_d2;
        const double d = 1.0 / inv_depth;
        const std::size_t p = static_cast<std::size_t>(j) * width + i;
        if (!(d < depth[p])) continue;
        depth[p] = d;
        ids[p] = id;
        Eigen::Vector3d n = face_normal;
        if (options.smooth_normals) {
          n = (l0 * inv_d0) * vertex_normals[tri[0]] +
              (l1 * inv_d1) * vertex_normals[tri[1]] +
              (l2 * inv_d2) * vertex_normals[tri[2]];
          const double len = n.norm();
          n = len > 0.0 ? Eigen::Vector3d(n / len) : face_normal;
        }
        normal[3 * p] = n.x();
        normal[3 * p + 1] = n.y();
        normal[3 * p + 2] = n.z();
      }
    }
  }
  auto covered = fb.coverage.bits();
  for (std::size_t p = 0; p < covered.size(); ++p) covered[p] = ids[p] != 0;
}

CameraTransform camera_for(const TriangleMesh& mesh, const FullPose& pose,
                           int width, int height) {
  if (!mesh.datum) {
    throw ValidationError("mesh has no datum; a pose cannot be applied");
  }
  return pose_to_transform(pose, *mesh.datum,
                           Eigen::Vector2d(0.5 * width, 0.5 * height));
}

Framebuffer render_normals(const TriangleMesh& mesh, const FullPose& pose,
                           int width, int height,
                           const std::set<std::string>& excluded_parts,
                           const RenderOptions& options) {
  if (width <= 0 || height <= 0) {
    throw ArgumentError("render_normals: framebuffer must be non-empty");
  }
  return render_normals(mesh, camera_for(mesh, pose, width, height), width, height,
                        excluded_parts, options);
}

void render_normals_into(Framebuffer& fb, const TriangleMesh& mesh, const FullPose& pose,
                         int width, int height,
                         const std::set<std::string>& excluded_parts,
                         const RenderOptions& options) {
  if (width <= 0 || height <= 0) {
    throw ArgumentError("render_normals: framebuffer must be non-empty");
  }
  render_normals_into(fb, mesh, camera_for(mesh, pose, width, height), width, height,
                      excluded_parts, options);
}

BinaryGrid silhouette(const Framebuffer& fb) { return fb.coverage; }

BinaryGrid part_region(const Framebuffer& fb, const std::string& part) {
  const std::uint16_t id = fb.id_of(part);
  BinaryGrid out(fb.width, fb.height);
  for (int v = 0; v < fb.height; ++v) {
    for (int u = 0; u < fb.width; ++u) out.set(u, v, fb.part_id.at(u, v) == id);
  }
  return out;
}

BinaryGrid part_outline(const Framebuffer& fb, const std::string& part) {
  const std::uint16_t id = fb.id_of(part);
  BinaryGrid out(fb.width, fb.height);
  auto other = [&](int u, int v) {
    if (u < 0 || v < 0 || u >= fb.width || v >= fb.height) return true;
    return fb.part_id.at(u, v) != id;
  };
  for (int v = 0; v < fb.height; ++v) {
    for (int u = 0; u < fb.width; ++u) {
      if (fb.part_id.at(u, v) != id) continue;
      out.set(u, v, other(u - 1, v) || other(u + 1, v) || other(u, v - 1) ||
                        other(u, v + 1));
    }
  }
  return out;
}

}  // namespace modelseg
