#pragma once

#include <array>
#include <cstdint>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "handguide/errors.hpp"
#include "handguide/geometry.hpp"

namespace handguide {

struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;

  bool empty() const { return vertices.empty() || triangles.empty(); }

  void validate() const {
    for (const auto& v : vertices) {
      if (!is_finite(v)) throw ValidationError("mesh vertex is not finite");
    }
    for (const auto& t : triangles) {
      for (auto i : t) {
        if (i >= vertices.size()) throw ValidationError("mesh triangle index out of range");
      }
    }
  }
};

inline PointCloud transformed(const PointCloud& cloud, const RigidTransform& pose) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(pose.apply(p));
  return out;
}

inline TriangleMesh transformed(const TriangleMesh& mesh, const RigidTransform& pose) {
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v = pose.apply(v);
  return out;
}

namespace detail {

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

inline PlyType ply_type(const std::string& name) {
  if (name == "char" || name == "int8") return PlyType::i8;
  if (name == "uchar" || name == "uint8") return PlyType::u8;
  if (name == "short" || name == "int16") return PlyType::i16;
  if (name == "ushort" || name == "uint16") return PlyType::u16;
  if (name == "int" || name == "int32") return PlyType::i32;
  if (name == "uint" || name == "uint32") return PlyType::u32;
  if (name == "float" || name == "float32") return PlyType::f32;
  if (name == "double" || name == "float64") return PlyType::f64;
  throw ParseError("ply: unknown property type '" + name + "'");
}

template <typename T>
T read_le(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ParseError("unexpected end of binary data");
  return value;
}

inline double read_binary_value(std::istream& in, PlyType t) {
  switch (t) {
    case PlyType::i8: return read_le<std::int8_t>(in);
    case PlyType::u8: return read_le<std::uint8_t>(in);
    case PlyType::i16: return read_le<std::int16_t>(in);
    case PlyType::u16: return read_le<std::uint16_t>(in);
    case PlyType::i32: return read_le<std::int32_t>(in);
    case PlyType::u32: return read_le<std::uint32_t>(in);
    case PlyType::f32: return read_le<float>(in);
    case PlyType::f64: return read_le<double>(in);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::f32;
  bool is_list = false;
  PlyType count_type = PlyType::u8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

}  // namespace detail

/// Reads vertices (and faces, when present) from an ASCII or
/// binary_little_endian PLY stream. Faces with more than three corners are
/// fan-triangulated.
inline TriangleMesh read_ply(std::istream& in) {
  using namespace detail;
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) throw ParseError("ply: missing magic");

  bool binary = false;
  std::vector<PlyElement> elements;
  bool have_format = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") binary = false;
      else if (fmt == "binary_little_endian") binary = true;
      else throw ParseError("ply: unsupported format '" + fmt + "'");
      have_format = true;
    } else if (key == "element") {
      PlyElement e;
      if (!(ls >> e.name >> e.count)) throw ParseError("ply: bad element line '" + line + "'");
      elements.push_back(e);
    } else if (key == "property") {
      if (elements.empty()) throw ParseError("ply: property before element");
      PlyProperty p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        p.is_list = true;
        p.count_type = ply_type(ct);
        p.type = ply_type(it);
      } else {
        p.type = ply_type(type);
        ls >> p.name;
      }
      elements.back().properties.push_back(p);
    } else if (key == "end_header") {
      break;
    } else if (key == "comment" || key == "obj_info" || key.empty()) {
      continue;
    } else {
      throw ParseError("ply: unexpected header line '" + line + "'");
    }
  }
  if (!have_format) throw ParseError("ply: missing format line");

  TriangleMesh mesh;
  for (const auto& e : elements) {
    int ix = -1, iy = -1, iz = -1, iface = -1;
    for (std::size_t k = 0; k < e.properties.size(); ++k) {
      const auto& n = e.properties[k].name;
      if (n == "x") ix = static_cast<int>(k);
      if (n == "y") iy = static_cast<int>(k);
      if (n == "z") iz = static_cast<int>(k);
      if (e.properties[k].is_list && (n == "vertex_indices" || n == "vertex_index")) iface = static_cast<int>(k);
    }
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) throw ParseError("ply: vertex element lacks x/y/z");

    for (std::size_t row = 0; row < e.count; ++row) {
      std::vector<double> scalars(e.properties.size(), 0.0);
      std::vector<std::uint32_t> corners;
      std::istringstream ascii_row;
      if (!binary) {
        do {
          if (!std::getline(in, line)) throw ParseError("ply: unexpected end of data in element '" + e.name + "'");
        } while (line.find_first_not_of(" \t\r") == std::string::npos);
        ascii_row.clear();
        ascii_row.str(line);
      }
      for (std::size_t k = 0; k < e.properties.size(); ++k) {
        const auto& p = e.properties[k];
        if (p.is_list) {
          double count_d = 0.0;
          if (binary) count_d = read_binary_value(in, p.count_type);
          else if (!(ascii_row >> count_d)) throw ParseError("ply: bad list count");
          const auto count = static_cast<std::size_t>(count_d);
          std::vector<std::uint32_t> values(count);
          for (std::size_t c = 0; c < count; ++c) {
            double v = 0.0;
            if (binary) v = read_binary_value(in, p.type);
            else if (!(ascii_row >> v)) throw ParseError("ply: bad list entry");
            values[c] = static_cast<std::uint32_t>(v);
          }
          if (static_cast<int>(k) == iface) corners = std::move(values);
        } else {
          double v = 0.0;
          if (binary) v = read_binary_value(in, p.type);
          else if (!(ascii_row >> v)) throw ParseError("ply: bad value in row " + std::to_string(row) + " of '" + e.name + "'");
          scalars[k] = v;
        }
      }
      if (is_vertex) {
        mesh.vertices.emplace_back(scalars[ix], scalars[iy], scalars[iz]);
      } else if (is_face && corners.size() >= 3) {
        for (std::size_t c = 1; c + 1 < corners.size(); ++c) {
          mesh.triangles.push_back({corners[0], corners[c], corners[c + 1]});
        }
      }
    }
  }
  mesh.validate();
  return mesh;
}

/// Binary STL; vertices are not welded.
inline TriangleMesh read_stl(std::istream& in) {
  using detail::read_le;
  char header[80];
  in.read(header, sizeof(header));
  if (!in) throw ParseError("stl: truncated header");
  const auto count = read_le<std::uint32_t>(in);
  TriangleMesh mesh;
  mesh.vertices.reserve(3 * static_cast<std::size_t>(count));
  mesh.triangles.reserve(count);
  for (std::uint32_t t = 0; t < count; ++t) {
    for (int k = 0; k < 3; ++k) read_le<float>(in);  // normal
    const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
    for (int corner = 0; corner < 3; ++corner) {
      const float x = read_le<float>(in), y = read_le<float>(in), z = read_le<float>(in);
      mesh.vertices.emplace_back(x, y, z);
    }
    read_le<std::uint16_t>(in);
    mesh.triangles.push_back({base, base + 1, base + 2});
  }
  mesh.validate();
  return mesh;
}

/// Loads a mesh by extension (.ply or .stl).
inline TriangleMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open mesh file " + path.string());
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  try {
    if (ext == ".ply") return read_ply(in);
    if (ext == ".stl") return read_stl(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  throw InputError("unsupported mesh extension: " + path.string());
}

inline PointCloud load_cloud(const std::filesystem::path& path) {
  return PointCloud{load_mesh(path).vertices};
}

inline void write_ply(std::ostream& out, const PointCloud& cloud) {
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  out << std::setprecision(17);
  for (const auto& p : cloud.points) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
}

inline void write_ply(std::ostream& out, const TriangleMesh& mesh) {
  out << "ply\nformat ascii 1.0\nelement vertex " << mesh.vertices.size()
      << "\nproperty double x\nproperty double y\nproperty double z\nelement face " << mesh.triangles.size()
      << "\nproperty list uchar int vertex_indices\nend_header\n";
  out << std::setprecision(17);
  for (const auto& p : mesh.vertices) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

inline void save_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  write_ply(out, cloud);
}

/// Axis-aligned box mesh (12 triangles, outward winding).
inline TriangleMesh box_mesh(const Vec3& lo, const Vec3& hi) {
  TriangleMesh m;
  for (int i = 0; i < 8; ++i) {
    m.vertices.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
  }
  m.triangles = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                 {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return m;
}

}  // namespace handguide
