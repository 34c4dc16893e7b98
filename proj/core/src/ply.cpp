#include "gpfield/ply.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gpfield {

static_assert(std::endian::native == std::endian::little, "PLY I/O assumes a little-endian host");

namespace {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

void export_ply(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  const bool rgb = mesh.channels == 3;
  const bool intensity = mesh.channels == 1;
  out << "ply\nformat binary_little_endian 1.0\ncomment gpfield mesh\n";
  out << "element vertex " << mesh.vertices.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (rgb) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (intensity) out << "property float intensity\n";
  out << "element face " << mesh.triangles.size() << "\n";
  out << "property list uchar uint vertex_indices\nend_header\n";
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    for (int a = 0; a < 3; ++a) put<double>(out, mesh.vertices[v][a]);
    const Properties p = v < mesh.vertex_properties.size() ? mesh.vertex_properties[v] : Properties{};
    if (rgb)
      for (int c = 0; c < 3; ++c) put<std::uint8_t>(out, to_byte(p[c]));
    if (intensity) put<float>(out, p[0]);
  }
  for (const auto& t : mesh.triangles) {
    put<std::uint8_t>(out, 3);
    for (std::uint32_t i : t) put<std::uint32_t>(out, i);
  }
  if (!out) throw IoFailure("failed writing " + path.string());
}

namespace {

enum class Scalar { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

Scalar parse_scalar(const std::string& name) {
  if (name == "char" || name == "int8") return Scalar::Int8;
  if (name == "uchar" || name == "uint8") return Scalar::UInt8;
  if (name == "short" || name == "int16") return Scalar::Int16;
  if (name == "ushort" || name == "uint16") return Scalar::UInt16;
  if (name == "int" || name == "int32") return Scalar::Int32;
  if (name == "uint" || name == "uint32") return Scalar::UInt32;
  if (name == "float" || name == "float32") return Scalar::Float32;
  if (name == "double" || name == "float64") return Scalar::Float64;
  throw IoFailure("unknown PLY scalar type '" + name + "'");
}

struct Property {
  std::string name;
  Scalar type = Scalar::Float32;
  bool is_list = false;
  Scalar count_type = Scalar::UInt8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> props;
};

class Reader {
 public:
  Reader(std::istream& in, bool binary) : in_(in), binary_(binary) {}

  double read(Scalar t) {
    if (!binary_) {
      double v = 0.0;
      if (!(in_ >> v)) throw IoFailure("truncated PLY body");
      return v;
    }
    switch (t) {
      case Scalar::Int8: return raw<std::int8_t>();
      case Scalar::UInt8: return raw<std::uint8_t>();
      case Scalar::Int16: return raw<std::int16_t>();
      case Scalar::UInt16: return raw<std::uint16_t>();
      case Scalar::Int32: return raw<std::int32_t>();
      case Scalar::UInt32: return raw<std::uint32_t>();
      case Scalar::Float32: return raw<float>();
      case Scalar::Float64: return raw<double>();
    }
    return 0.0;
  }

 private:
  template <typename T>
  T raw() {
    T v;
    if (!in_.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoFailure("truncated PLY body");
    return v;
  }

  std::istream& in_;
  bool binary_;
};

}  // namespace

TriangleMesh read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) throw IoFailure(path.string() + " is not a PLY file");
  bool binary = false;
  std::vector<Element> elements;
  for (;;) {
    if (!std::getline(in, line)) throw IoFailure("PLY header not terminated");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream words(line);
    std::string kw;
    words >> kw;
    if (kw == "end_header") break;
    if (kw == "format") {
      std::string fmt;
      words >> fmt;
      if (fmt == "binary_little_endian") binary = true;
      else if (fmt != "ascii") throw IoFailure("unsupported PLY format '" + fmt + "'");
    } else if (kw == "element") {
      Element e;
      words >> e.name >> e.count;
      elements.push_back(e);
    } else if (kw == "property") {
      if (elements.empty()) throw IoFailure("PLY property before element");
      Property p;
      std::string type;
      words >> type;
      if (type == "list") {
        std::string ct, it;
        words >> ct >> it;
        p.is_list = true;
        p.count_type = parse_scalar(ct);
        p.type = parse_scalar(it);
      } else {
        p.type = parse_scalar(type);
      }
      words >> p.name;
      elements.back().props.push_back(p);
    }
  }

  TriangleMesh mesh;
  Reader reader(in, binary);
  for (const Element& e : elements) {
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    auto has = [&](const char* n) {
      return std::any_of(e.props.begin(), e.props.end(), [&](const Property& p) { return p.name == n; });
    };
    if (is_vertex) mesh.channels = has("red") ? 3 : (has("intensity") ? 1 : 0);

    for (std::size_t n = 0; n < e.count; ++n) {
      Vec3 pos = Vec3::Zero();
      Properties prop{};
      for (const Property& p : e.props) {
        if (p.is_list) {
          const auto count = static_cast<std::size_t>(reader.read(p.count_type));
          std::vector<std::uint32_t> idx(count);
          for (auto& i : idx) i = static_cast<std::uint32_t>(reader.read(p.type));
          if (is_face && p.name == "vertex_indices") {
            for (std::size_t k = 1; k + 1 < count; ++k) mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
          }
          continue;
        }
        const double v = reader.read(p.type);
        if (!is_vertex) continue;
        const double colour = p.type == Scalar::UInt8 ? v / 255.0 : v;
        if (p.name == "x") pos.x() = v;
        else if (p.name == "y") pos.y() = v;
        else if (p.name == "z") pos.z() = v;
        else if (p.name == "red") prop[0] = static_cast<float>(colour);
        else if (p.name == "green") prop[1] = static_cast<float>(colour);
        else if (p.name == "blue") prop[2] = static_cast<float>(colour);
        else if (p.name == "intensity") prop[0] = static_cast<float>(v);
      }
      if (is_vertex) {
        mesh.vertices.push_back(pos);
        mesh.vertex_properties.push_back(prop);
      }
    }
  }
  for (const auto& t : mesh.triangles)
    for (std::uint32_t i : t)
      if (i >= mesh.vertices.size()) throw IoFailure("PLY face index out of range");
  return mesh;
}

}  // namespace gpfield
