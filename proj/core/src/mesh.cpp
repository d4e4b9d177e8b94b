#include "modelseg/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string_view>

#include <Eigen/Geometry>
#include <json.hpp>

#include "modelseg/errors.hpp"

namespace modelseg {

namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kUngrouped = ~0u;

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

double parse_double(std::string_view token, std::size_t line) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = token.data() + token.size();
  if (!token.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ParseError("invalid number '" + std::string(token) + "'", line);
  }
  return value;
}

long parse_index(std::string_view token, std::size_t line) {
  long value = 0;
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || value == 0) {
    throw ParseError("invalid index '" + std::string(token) + "'", line);
  }
  return value;
}

// Resolves a 1-based or negative (relative) OBJ index to 0-based.
long resolve(long index, std::size_t count) {
  return index > 0 ? index - 1 : static_cast<long>(count) + index;
}

bool is_degenerate(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                   const Eigen::Vector3d& c) {
  const Eigen::Vector3d e1 = b - a;
  const Eigen::Vector3d e2 = c - a;
  const double cross = e1.cross(e2).norm();
  return !(cross > 1e-12 * e1.norm() * e2.norm());
}

struct RawFace {
  std::vector<long> v;
  std::vector<long> n;  // -1 when absent
  std::uint32_t group;
  std::size_t line;
};

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

void check_winding(TriangleMesh& mesh) {
  // Each undirected edge should be traversed at most once per direction.
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) ++directed[{t[e], t[(e + 1) % 3]}];
  }
  std::size_t bad = 0;
  for (const auto& [edge, count] : directed) {
    if (count > 1) ++bad;
  }
  if (bad > 0) {
    mesh.warnings.push_back("WARN inconsistent_winding " + std::to_string(bad) +
                            " edges traversed twice in the same direction");
  }
}

}  // namespace

void CarModelDatum::validate() const {
  if (std::abs(rear_axle_dir.norm() - 1.0) > 1e-6) {
    throw ValidationError("datum: rear_axle_dir must be a unit vector");
  }
  if ((front_wheel_center - rear_wheel_center).norm() == 0.0) {
    throw ValidationError("datum: wheel centres coincide");
  }
}

TriangleMesh parse_obj(std::istream& in, const MeshLoadOptions& options) {
  TriangleMesh mesh;
  std::vector<Eigen::Vector3d> normals;
  std::vector<RawFace> faces;
  std::vector<std::string> group_names;
  std::map<std::string, std::uint32_t> group_ids;
  std::uint32_t current = kUngrouped;
  std::set<std::string> ignored;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    std::string_view line(raw);
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    const std::string_view kw = tokens[0];

    if (kw == "v") {
      if (tokens.size() != 4 && tokens.size() != 5) {
        throw ParseError("vertex record needs 3 coordinates", line_no);
      }
      mesh.vertices.emplace_back(parse_double(tokens[1], line_no),
                                 parse_double(tokens[2], line_no),
                                 parse_double(tokens[3], line_no));
    } else if (kw == "vn") {
      if (tokens.size() != 4) {
        throw ParseError("normal record needs 3 components", line_no);
      }
      normals.emplace_back(parse_double(tokens[1], line_no),
                           parse_double(tokens[2], line_no),
                           parse_double(tokens[3], line_no));
    } else if (kw == "f") {
      if (tokens.size() < 4) {
        throw ParseError("face record needs at least 3 vertices", line_no);
      }
      RawFace face{{}, {}, current, line_no};
      for (std::size_t i = 1; i < tokens.size(); ++i) {
        const std::string_view ref = tokens[i];
        const auto slash1 = ref.find('/');
        face.v.push_back(resolve(parse_index(ref.substr(0, slash1), line_no),
                                 mesh.vertices.size()));
        long n = -1;
        if (slash1 != std::string_view::npos) {
          const auto slash2 = ref.find('/', slash1 + 1);
          if (slash2 != std::string_view::npos && slash2 + 1 < ref.size()) {
            n = resolve(parse_index(ref.substr(slash2 + 1), line_no),
                        normals.size());
          }
        }
        face.n.push_back(n);
      }
      faces.push_back(std::move(face));
    } else if (kw == "g" || kw == "o") {
      if (tokens.size() < 2 || tokens[1] == "default") {
        current = kUngrouped;
      } else {
        const std::string name(tokens[1]);
        auto [it, inserted] =
            group_ids.emplace(name, static_cast<std::uint32_t>(group_names.size()));
        if (inserted) group_names.push_back(name);
        current = it->second;
      }
    } else if (kw == "vt" || kw == "vp" || kw == "mtllib" || kw == "usemtl" ||
               kw == "s" || kw == "l" || kw == "p") {
      // Materials, textures and non-surface elements carry no geometry we use.
    } else {
      ignored.insert(std::string(kw));
    }
  }
  for (const auto& kw : ignored) {
    mesh.warnings.push_back("WARN unknown_record " + kw);
  }

  const std::size_t nv = mesh.vertices.size();
  std::size_t dropped = 0;
  std::size_t normal_mismatch = 0;
  for (const auto& face : faces) {
    for (std::size_t i = 0; i < face.v.size(); ++i) {
      if (face.v[i] < 0 || static_cast<std::size_t>(face.v[i]) >= nv) {
        throw ValidationError("line " + std::to_string(face.line) +
                              ": vertex index out of range (" +
                              std::to_string(face.v[i] + 1) + " of " +
                              std::to_string(nv) + ")");
      }
      if (face.n[i] >= 0 && static_cast<std::size_t>(face.n[i]) >= normals.size()) {
        throw ValidationError("line " + std::to_string(face.line) +
                              ": normal index out of range");
      }
    }
    for (std::size_t i = 1; i + 1 < face.v.size(); ++i) {
      const Triangle tri{static_cast<std::uint32_t>(face.v[0]),
                         static_cast<std::uint32_t>(face.v[i]),
                         static_cast<std::uint32_t>(face.v[i + 1])};
      const auto& a = mesh.vertices[tri[0]];
      const auto& b = mesh.vertices[tri[1]];
      const auto& c = mesh.vertices[tri[2]];
      if (is_degenerate(a, b, c)) {
        ++dropped;
        continue;
      }
      const Eigen::Vector3d fn = (b - a).cross(c - a).normalized();
      const long corners[3] = {face.n[0], face.n[i], face.n[i + 1]};
      Eigen::Vector3d supplied = Eigen::Vector3d::Zero();
      for (long n : corners) {
        if (n >= 0) supplied += normals[n];
      }
      if (supplied.squaredNorm() > 0.0 && supplied.dot(fn) < 0.0) {
        ++normal_mismatch;
      }
      const auto index = static_cast<std::uint32_t>(mesh.triangles.size());
      mesh.triangles.push_back(tri);
      mesh.face_normals.push_back(fn);
      if (face.group != kUngrouped) {
        mesh.parts[group_names[face.group]].push_back(index);
      }
    }
  }
  if (dropped > 0) {
    mesh.warnings.push_back("WARN degenerate_triangle " + std::to_string(dropped) +
                            " zero-area triangles dropped");
  }
  if (normal_mismatch > 0) {
    mesh.warnings.push_back("WARN normal_winding_mismatch " +
                            std::to_string(normal_mismatch) +
                            " faces wind against their supplied normals");
  }
  if (mesh.triangles.empty()) {
    throw ValidationError("mesh contains no valid triangles");
  }
  check_winding(mesh);
  if (options.vertex_normals) mesh = compute_vertex_normals(std::move(mesh));
  return mesh;
}

TriangleMesh load_mesh(const fs::path& path, const MeshLoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open mesh " + path.string());
  TriangleMesh mesh = parse_obj(in, options);
  if (options.load_datum) {
    const fs::path datum_file = datum_path_for(path);
    if (fs::exists(datum_file)) {
      std::ifstream din(datum_file);
      std::stringstream buffer;
      buffer << din.rdbuf();
      mesh.datum = parse_datum_json(buffer.str());
    }
  }
  return mesh;
}

void write_obj(std::ostream& out, const TriangleMesh& mesh) {
  out << "# modelseg mesh: " << mesh.vertices.size() << " vertices, "
      << mesh.triangles.size() << " triangles\n";
  for (const auto& v : mesh.vertices) {
    out << "v " << format_double(v.x()) << ' ' << format_double(v.y()) << ' '
        << format_double(v.z()) << '\n';
  }
  std::vector<const std::string*> owner(mesh.triangles.size(), nullptr);
  for (const auto& [name, tris] : mesh.parts) {
    for (auto t : tris) owner[t] = &name;
  }
  const std::string* current = nullptr;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    if (owner[t] != current) {
      current = owner[t];
      out << (current ? "g " + *current : std::string("g")) << '\n';
    }
    const auto& tri = mesh.triangles[t];
    out << "f " << tri[0] + 1 << ' ' << tri[1] + 1 << ' ' << tri[2] + 1 << '\n';
  }
}

void save_mesh(const fs::path& path, const TriangleMesh& mesh) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  {
    std::ofstream out(path);
    if (!out) throw Error("cannot write mesh " + path.string());
    write_obj(out, mesh);
  }
  if (mesh.datum) {
    std::ofstream dout(datum_path_for(path));
    dout << datum_to_json(*mesh.datum);
  }
}

TriangleMesh compute_face_normals(TriangleMesh mesh) {
  mesh.face_normals.resize(mesh.triangles.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const auto& a = mesh.vertices.at(tri[0]);
    const auto& b = mesh.vertices.at(tri[1]);
    const auto& c = mesh.vertices.at(tri[2]);
    if (is_degenerate(a, b, c)) {
      throw DegenerateGeometryError("zero-area triangle", t);
    }
    mesh.face_normals[t] = (b - a).cross(c - a).normalized();
  }
  return mesh;
}

TriangleMesh compute_vertex_normals(TriangleMesh mesh) {
  mesh.vertex_normals.assign(mesh.vertices.size(), Eigen::Vector3d::Zero());
  for (const auto& tri : mesh.triangles) {
    const auto& a = mesh.vertices[tri[0]];
    const auto& b = mesh.vertices[tri[1]];
    const auto& c = mesh.vertices[tri[2]];
    const Eigen::Vector3d weighted = (b - a).cross(c - a);  // 2 * area * n
    for (auto i : tri) mesh.vertex_normals[i] += weighted;
  }
  for (auto& n : mesh.vertex_normals) {
    const double len = n.norm();
    n = len > 0.0 ? Eigen::Vector3d(n / len) : Eigen::Vector3d::UnitZ();
  }
  return mesh;
}

std::vector<std::string> part_names(const TriangleMesh& mesh) {
  std::set<std::string> names;
  std::size_t grouped = 0;
  for (const auto& [name, tris] : mesh.parts) {
    names.insert(name);
    grouped += tris.size();
  }
  if (grouped < mesh.triangles.size() || names.empty()) {
    names.insert(kImplicitPart);
  }
  return {names.begin(), names.end()};
}

std::vector<std::uint16_t> triangle_part_indices(const TriangleMesh& mesh) {
  const auto names = part_names(mesh);
  const auto index_of = [&](const std::string& name) {
    return static_cast<std::uint16_t>(
        std::lower_bound(names.begin(), names.end(), name) - names.begin());
  };
  const auto implicit = std::find(names.begin(), names.end(), kImplicitPart);
  const std::uint16_t fallback =
      implicit == names.end() ? 0 : static_cast<std::uint16_t>(implicit - names.begin());
  std::vector<std::uint16_t> out(mesh.triangles.size(), fallback);
  for (const auto& [name, tris] : mesh.parts) {
    const auto id = index_of(name);
    for (auto t : tris) out[t] = id;
  }
  return out;
}

void validate_mesh(const TriangleMesh& mesh) {
  if (mesh.triangles.empty()) throw ValidationError("mesh has no triangles");
  if (mesh.face_normals.size() != mesh.triangles.size()) {
    throw ValidationError("face normal count does not match triangle count");
  }
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    for (auto i : mesh.triangles[t]) {
      if (i >= mesh.vertices.size()) {
        throw ValidationError("triangle " + std::to_string(t) +
                              " references a missing vertex");
      }
    }
    if (std::abs(mesh.face_normals[t].norm() - 1.0) > 1e-6) {
      throw ValidationError("face normal " + std::to_string(t) + " is not unit");
    }
  }
  std::vector<int> seen(mesh.triangles.size(), 0);
  for (const auto& [name, tris] : mesh.parts) {
    for (auto t : tris) {
      if (t >= mesh.triangles.size()) {
        throw ValidationError("part " + name + " references a missing triangle");
      }
      if (++seen[t] > 1) {
        throw ValidationError("triangle " + std::to_string(t) +
                              " belongs to more than one part");
      }
    }
  }
  if (mesh.datum) mesh.datum->validate();
}

fs::path datum_path_for(const fs::path& obj_path) {
  fs::path out = obj_path.parent_path() / obj_path.stem();
  out += ".datum.json";
  return out;
}

CarModelDatum parse_datum_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("datum JSON: ") + e.what(), 1);
  }
  auto vec3 = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3) {
      throw ValidationError(std::string("datum: '") + key +
                            "' must be an array of 3 numbers");
    }
    Eigen::Vector3d v;
    for (int i = 0; i < 3; ++i) {
      if (!j[key][i].is_number()) {
        throw ValidationError(std::string("datum: '") + key + "' must be numeric");
      }
      v[i] = j[key][i].get<double>();
    }
    return v;
  };
  CarModelDatum datum;
  datum.rear_wheel_center = vec3("rear_wheel_center");
  datum.front_wheel_center = vec3("front_wheel_center");
  datum.rear_axle_dir = vec3("rear_axle_dir");
  datum.validate();
  return datum;
}

std::string datum_to_json(const CarModelDatum& datum) {
  auto arr = [](const Eigen::Vector3d& v) {
    return nlohmann::json::array({v.x(), v.y(), v.z()});
  };
  nlohmann::json j;
  j["rear_wheel_center"] = arr(datum.rear_wheel_center);
  j["front_wheel_center"] = arr(datum.front_wheel_center);
  j["rear_axle_dir"] = arr(datum.rear_axle_dir);
  return j.dump(2) + "\n";
}

}  // namespace modelseg
