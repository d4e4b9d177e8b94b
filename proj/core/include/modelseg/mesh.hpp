#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace modelseg {

// Name given to triangles that belong to no explicit group.
inline constexpr const char* kImplicitPart = "body";

// Model-frame anchors needed to interpret a wheel-based pose.
struct CarModelDatum {
  Eigen::Vector3d rear_wheel_center = Eigen::Vector3d::Zero();
  Eigen::Vector3d front_wheel_center = Eigen::Vector3d::UnitX();
  Eigen::Vector3d rear_axle_dir = -Eigen::Vector3d::UnitZ();

  // Throws ValidationError unless the axle is unit length (1e-6) and the
  // wheel centres are distinct.
  void validate() const;
};

using Triangle = std::array<std::uint32_t, 3>;

struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Triangle> triangles;
  // One unit normal per triangle, following the winding (right-hand rule).
  std::vector<Eigen::Vector3d> face_normals;
  // Optional area-weighted per-vertex normals for smooth shading; empty
  // unless compute_vertex_normals was called.
  std::vector<Eigen::Vector3d> vertex_normals;
  // Explicit groups. Triangles absent from every group belong to kImplicitPart.
  std::map<std::string, std::vector<std::uint32_t>> parts;
  std::optional<CarModelDatum> datum;
  // Validation report, one "WARN <code> <detail>" line per finding.
  std::vector<std::string> warnings;
};

struct MeshLoadOptions {
  // Also compute per-vertex normals (smooth shading).
  bool vertex_normals = false;
  // Look for "<stem>.datum.json" next to the OBJ file.
  bool load_datum = true;
};

// Parses the OBJ subset (v, vn, f, g, o, comments). Polygons are
// fan-triangulated, zero-area triangles are dropped with a warning, face
// normals are computed from the winding. Throws ParseError with the line
// number for malformed records and ValidationError for out-of-range indices
// or an empty mesh.
TriangleMesh parse_obj(std::istream& in, const MeshLoadOptions& options = {});
TriangleMesh load_mesh(const std::filesystem::path& path,
                       const MeshLoadOptions& options = {});

// Writes vertices with round-trip precision, ungrouped triangles first, then
// one "g" block per part.
void write_obj(std::ostream& out, const TriangleMesh& mesh);
void save_mesh(const std::filesystem::path& path, const TriangleMesh& mesh);

// Recomputes face normals. Throws DegenerateGeometryError naming the first
// zero-area triangle.
TriangleMesh compute_face_normals(TriangleMesh mesh);
TriangleMesh compute_vertex_normals(TriangleMesh mesh);

// Lexicographically sorted part names; kImplicitPart is present iff some
// triangle is ungrouped (or the mesh has no groups at all).
std::vector<std::string> part_names(const TriangleMesh& mesh);

// For every triangle, its index into part_names(mesh).
std::vector<std::uint16_t> triangle_part_indices(const TriangleMesh& mesh);

// Throws ValidationError if any structural invariant is broken.
void validate_mesh(const TriangleMesh& mesh);

// Sidecar path "<dir>/<stem>.datum.json" for an OBJ path.
std::filesystem::path datum_path_for(const std::filesystem::path& obj_path);
CarModelDatum parse_datum_json(const std::string& text);
std::string datum_to_json(const CarModelDatum& datum);

}  // namespace modelseg
