#include "toothseg/mesh_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace toothseg {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <class T>
bool parse_number(std::string_view token, T& value) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  return ec == std::errc() && ptr == end;
}

// Iterates lines, tracking 1-based line numbers.
class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}
  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    const std::size_t end = text_.find('\n', pos_);
    const std::size_t stop = end == std::string_view::npos ? text_.size() : end;
    line = text_.substr(pos_, stop - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = stop + 1;
    ++line_no_;
    return true;
  }
  std::size_t line_no() const { return line_no_; }
  std::size_t position() const { return pos_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

[[noreturn]] void fail_at_line(std::size_t line, const std::string& what) {
  throw ParseError("line " + std::to_string(line) + ": " + what, line);
}

[[noreturn]] void fail_at_offset(std::size_t offset, const std::string& what) {
  throw ParseError("byte offset " + std::to_string(offset) + ": " + what, 0, offset);
}

// ---------------------------------------------------------------- OBJ

TriangleMesh parse_obj(std::string_view text) {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  LineReader reader(text);
  std::string_view line;
  while (reader.next(line)) {
    line = line.substr(0, line.find('#'));
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens[0] == "v") {
      if (tokens.size() < 4) fail_at_line(reader.line_no(), "vertex needs 3 coordinates");
      Vec3 p;
      for (int k = 0; k < 3; ++k) {
        if (!parse_number(tokens[k + 1], p[k]) || !std::isfinite(p[k])) {
          fail_at_line(reader.line_no(), "bad vertex coordinate '" + std::string(tokens[k + 1]) + "'");
        }
      }
      vertices.push_back(p);
    } else if (tokens[0] == "f") {
      if (tokens.size() != 4) {
        fail_at_line(reader.line_no(), "only triangular faces are supported, got " +
                                           std::to_string(tokens.size() - 1) + " vertices");
      }
      Face face{};
      for (int k = 0; k < 3; ++k) {
        std::string_view tok = tokens[k + 1];
        tok = tok.substr(0, tok.find('/'));
        long long idx = 0;
        if (!parse_number(tok, idx) || idx == 0) {
          fail_at_line(reader.line_no(), "bad face index '" + std::string(tokens[k + 1]) + "'");
        }
        if (idx < 0) idx += static_cast<long long>(vertices.size()) + 1;
        if (idx <= 0) {
          fail_at_line(reader.line_no(), "relative face index '" + std::string(tokens[k + 1]) +
                                             "' points before the first vertex");
        }
        if (idx - 1 > std::numeric_limits<std::uint32_t>::max()) {
          fail_at_line(reader.line_no(), "face index too large");
        }
        face[k] = static_cast<std::uint32_t>(idx - 1);
      }
      faces.push_back(face);
    }
  }
  return make_mesh(std::move(vertices), std::move(faces));
}

// ---------------------------------------------------------------- PLY

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

PlyType ply_type(std::string_view name, std::size_t line) {
  static const std::map<std::string_view, PlyType> table = {
      {"char", PlyType::Int8},     {"int8", PlyType::Int8},       {"uchar", PlyType::UInt8},
      {"uint8", PlyType::UInt8},   {"short", PlyType::Int16},     {"int16", PlyType::Int16},
      {"ushort", PlyType::UInt16}, {"uint16", PlyType::UInt16},   {"int", PlyType::Int32},
      {"int32", PlyType::Int32},   {"uint", PlyType::UInt32},     {"uint32", PlyType::UInt32},
      {"float", PlyType::Float32}, {"float32", PlyType::Float32}, {"double", PlyType::Float64},
      {"float64", PlyType::Float64}};
  auto it = table.find(name);
  if (it == table.end()) fail_at_line(line, "unknown PLY type '" + std::string(name) + "'");
  return it->second;
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8: return 1;
    case PlyType::Int16:
    case PlyType::UInt16: return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32: return 4;
    case PlyType::Float64: return 8;
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::Float32;
  bool is_list = false;
  PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

// Source of scalar values for the PLY body, ASCII or binary.
class PlyValues {
 public:
  PlyValues(std::string_view body, bool binary, std::size_t body_offset, std::size_t first_line)
      : body_(body), binary_(binary), base_offset_(body_offset), line_(first_line) {}

  double read(PlyType type) {
    return binary_ ? read_binary(type) : read_ascii(type);
  }

  std::size_t line() const { return line_; }
  std::size_t offset() const { return base_offset_ + pos_; }

 private:
  double read_ascii(PlyType type) {
    while (pos_ < body_.size() && is_space(body_[pos_])) {
      if (body_[pos_] == '\n') ++line_;
      ++pos_;
    }
    if (pos_ >= body_.size()) fail_at_line(line_, "unexpected end of PLY data");
    const std::size_t start = pos_;
    while (pos_ < body_.size() && !is_space(body_[pos_])) ++pos_;
    const std::string_view token = body_.substr(start, pos_ - start);
    double value = 0.0;
    if (type == PlyType::Float32 || type == PlyType::Float64) {
      if (!parse_number(token, value)) fail_at_line(line_, "bad PLY number '" + std::string(token) + "'");
    } else {
      long long iv = 0;
      if (!parse_number(token, iv)) fail_at_line(line_, "bad PLY integer '" + std::string(token) + "'");
      value = static_cast<double>(iv);
    }
    return value;
  }

  double read_binary(PlyType type) {
    const std::size_t n = ply_size(type);
    if (pos_ + n > body_.size()) fail_at_offset(offset(), "unexpected end of binary PLY data");
    std::uint64_t raw = 0;
    for (std::size_t i = 0; i < n; ++i) {
      raw |= static_cast<std::uint64_t>(static_cast<unsigned char>(body_[pos_ + i])) << (8 * i);
    }
    pos_ += n;
    switch (type) {
      case PlyType::Int8: return static_cast<std::int8_t>(raw);
      case PlyType::UInt8: return static_cast<std::uint8_t>(raw);
      case PlyType::Int16: return static_cast<std::int16_t>(raw);
      case PlyType::UInt16: return static_cast<std::uint16_t>(raw);
      case PlyType::Int32: return static_cast<std::int32_t>(raw);
      case PlyType::UInt32: return static_cast<std::uint32_t>(raw);
      case PlyType::Float32: return std::bit_cast<float>(static_cast<std::uint32_t>(raw));
      case PlyType::Float64: return std::bit_cast<double>(raw);
    }
    return 0.0;
  }

  std::string_view body_;
  bool binary_;
  std::size_t base_offset_;
  std::size_t pos_ = 0;
  std::size_t line_;
};

TriangleMesh parse_ply(std::string_view bytes) {
  LineReader reader(bytes);
  std::string_view line;
  if (!reader.next(line) || line != "ply") fail_at_line(1, "missing 'ply' magic");

  bool binary = false;
  bool have_format = false;
  std::vector<PlyElement> elements;
  bool ended = false;
  while (reader.next(line)) {
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens[0] == "comment" || tokens[0] == "obj_info") continue;
    if (tokens[0] == "end_header") {
      ended = true;
      break;
    }
    if (tokens[0] == "format") {
      if (tokens.size() != 3 || tokens[2] != "1.0") fail_at_line(reader.line_no(), "bad format line");
      if (tokens[1] == "ascii") {
        binary = false;
      } else if (tokens[1] == "binary_little_endian") {
        binary = true;
      } else {
        fail_at_line(reader.line_no(), "unsupported PLY format '" + std::string(tokens[1]) + "'");
      }
      have_format = true;
    } else if (tokens[0] == "element") {
      std::size_t count = 0;
      if (tokens.size() != 3 || !parse_number(tokens[2], count)) {
        fail_at_line(reader.line_no(), "bad element line");
      }
      elements.push_back({std::string(tokens[1]), count, {}});
    } else if (tokens[0] == "property") {
      if (elements.empty()) fail_at_line(reader.line_no(), "property before any element");
      PlyProperty prop;
      if (tokens.size() == 5 && tokens[1] == "list") {
        prop.is_list = true;
        prop.count_type = ply_type(tokens[2], reader.line_no());
        prop.type = ply_type(tokens[3], reader.line_no());
        prop.name = tokens[4];
      } else if (tokens.size() == 3) {
        prop.type = ply_type(tokens[1], reader.line_no());
        prop.name = tokens[2];
      } else {
        fail_at_line(reader.line_no(), "bad property line");
      }
      elements.back().properties.push_back(prop);
    } else {
      fail_at_line(reader.line_no(), "unknown header keyword '" + std::string(tokens[0]) + "'");
    }
  }
  if (!ended) fail_at_line(reader.line_no(), "missing end_header");
  if (!have_format) fail_at_line(reader.line_no(), "missing format line");

  const std::size_t body_offset = reader.position();
  PlyValues values(body_offset < bytes.size() ? bytes.substr(body_offset) : std::string_view{},
                   binary, body_offset, reader.line_no() + 1);

  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  auto fail = [&](const std::string& what) {
    if (binary) fail_at_offset(values.offset(), what);
    fail_at_line(values.line(), what);
  };

  for (const PlyElement& el : elements) {
    int ix = -1, iy = -1, iz = -1, iface = -1;
    for (std::size_t p = 0; p < el.properties.size(); ++p) {
      const auto& name = el.properties[p].name;
      if (el.name == "vertex") {
        if (name == "x") ix = static_cast<int>(p);
        if (name == "y") iy = static_cast<int>(p);
        if (name == "z") iz = static_cast<int>(p);
      } else if (el.name == "face" && (name == "vertex_indices" || name == "vertex_index") &&
                 el.properties[p].is_list) {
        iface = static_cast<int>(p);
      }
    }
    if (el.name == "vertex" && (ix < 0 || iy < 0 || iz < 0)) fail("vertex element lacks x/y/z");
    if (el.name == "face" && iface < 0) fail("face element lacks vertex_indices list");

    for (std::size_t i = 0; i < el.count; ++i) {
      Vec3 p = Vec3::Zero();
      Face face{};
      for (std::size_t k = 0; k < el.properties.size(); ++k) {
        const PlyProperty& prop = el.properties[k];
        if (prop.is_list) {
          const double n = values.read(prop.count_type);
          if (n < 0) fail("negative list length");
          const auto len = static_cast<std::size_t>(n);
          if (static_cast<int>(k) == iface && len != 3) {
            fail("only triangular faces are supported, got " + std::to_string(len) + " vertices");
          }
          for (std::size_t j = 0; j < len; ++j) {
            const double v = values.read(prop.type);
            if (static_cast<int>(k) == iface) {
              if (v < 0 || v != std::floor(v)) fail("bad face index");
              face[j] = static_cast<std::uint32_t>(v);
            }
          }
        } else {
          const double v = values.read(prop.type);
          if (static_cast<int>(k) == ix) p.x() = v;
          if (static_cast<int>(k) == iy) p.y() = v;
          if (static_cast<int>(k) == iz) p.z() = v;
        }
      }
      if (el.name == "vertex") {
        if (!p.allFinite()) fail("non-finite vertex coordinate");
        vertices.push_back(p);
      } else if (el.name == "face") {
        faces.push_back(face);
      }
    }
  }
  return make_mesh(std::move(vertices), std::move(faces));
}

// ---------------------------------------------------------------- STL

TriangleMesh parse_stl(std::string_view bytes) {
  constexpr std::size_t kHeader = 80, kRecord = 50;
  if (bytes.size() < kHeader + 4) fail_at_offset(bytes.size(), "binary STL shorter than its header");
  std::uint32_t count = 0;
  for (int i = 0; i < 4; ++i) {
    count |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[kHeader + i])) << (8 * i);
  }
  const std::size_t expected = kHeader + 4 + static_cast<std::size_t>(count) * kRecord;
  if (bytes.size() != expected) {
    fail_at_offset(std::min(bytes.size(), expected),
                   "binary STL declares " + std::to_string(count) + " triangles (" +
                       std::to_string(expected) + " bytes) but has " +
                       std::to_string(bytes.size()) + " bytes");
  }
  auto read_float = [&](std::size_t off) {
    std::uint32_t raw = 0;
    for (int i = 0; i < 4; ++i) {
      raw |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + i])) << (8 * i);
    }
    return std::bit_cast<float>(raw);
  };

  std::map<std::array<float, 3>, std::uint32_t> index;
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  faces.reserve(count);
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::size_t rec = kHeader + 4 + static_cast<std::size_t>(t) * kRecord;
    Face face{};
    for (int k = 0; k < 3; ++k) {
      const std::size_t off = rec + 12 + 12 * k;
      std::array<float, 3> key{read_float(off), read_float(off + 4), read_float(off + 8)};
      for (float c : key) {
        if (!std::isfinite(c)) fail_at_offset(off, "non-finite STL coordinate");
      }
      auto [it, inserted] = index.emplace(key, static_cast<std::uint32_t>(vertices.size()));
      if (inserted) vertices.emplace_back(key[0], key[1], key[2]);
      face[k] = it->second;
    }
    faces.push_back(face);
  }
  return make_mesh(std::move(vertices), std::move(faces));
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

MeshFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".obj") return MeshFormat::Obj;
  if (ext == ".ply") return MeshFormat::Ply;
  if (ext == ".stl") return MeshFormat::Stl;
  throw Error("cannot infer mesh format from extension of '" + path.string() +
              "' (expected .obj, .ply or .stl)");
}

TriangleMesh parse_mesh(std::string_view bytes, MeshFormat format) {
  switch (format) {
    case MeshFormat::Obj: return parse_obj(bytes);
    case MeshFormat::Ply: return parse_ply(bytes);
    case MeshFormat::Stl: return parse_stl(bytes);
  }
  throw Error("unknown mesh format");
}

TriangleMesh load_mesh(const std::filesystem::path& path) {
  const MeshFormat format = format_from_path(path);
  const std::string bytes = read_file(path);
  try {
    return parse_mesh(bytes, format);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line(), e.offset());
  } catch (const MeshError& e) {
    throw MeshError(path.string() + ": " + e.what());
  }
}

std::string write_obj(const TriangleMesh& mesh) {
  std::string out;
  out.reserve(mesh.vertices.size() * 64 + mesh.faces.size() * 24);
  for (const auto& v : mesh.vertices) {
    out += "v " + format_double(v.x()) + ' ' + format_double(v.y()) + ' ' +
           format_double(v.z()) + '\n';
  }
  for (const auto& f : mesh.faces) {
    out += "f " + std::to_string(f[0] + 1) + ' ' + std::to_string(f[1] + 1) + ' ' +
           std::to_string(f[2] + 1) + '\n';
  }
  return out;
}

std::string export_colored_ply(const TriangleMesh& mesh, std::span<const Rgb> face_colors) {
  if (face_colors.size() != mesh.face_count()) {
    throw Error("got " + std::to_string(face_colors.size()) + " face colors for a mesh with " +
                std::to_string(mesh.face_count()) + " faces");
  }
  std::string out;
  out += "ply\nformat ascii 1.0\ncomment per-face colors\n";
  out += "element vertex " + std::to_string(mesh.vertex_count()) + '\n';
  out += "property double x\nproperty double y\nproperty double z\n";
  out += "element face " + std::to_string(mesh.face_count()) + '\n';
  out += "property list uchar int vertex_indices\n";
  out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out += "end_header\n";
  for (const auto& v : mesh.vertices) {
    out += format_double(v.x()) + ' ' + format_double(v.y()) + ' ' + format_double(v.z()) + '\n';
  }
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    const Face& t = mesh.faces[f];
    const Rgb& c = face_colors[f];
    out += "3 " + std::to_string(t[0]) + ' ' + std::to_string(t[1]) + ' ' +
           std::to_string(t[2]) + ' ' + std::to_string(c[0]) + ' ' + std::to_string(c[1]) +
           ' ' + std::to_string(c[2]) + '\n';
  }
  return out;
}

std::vector<Rgb> colors_for_ids(std::span<const int> ids) {
  std::vector<Rgb> colors;
  colors.reserve(ids.size());
  for (int id : ids) {
    // Golden-angle hue walk with alternating saturation/value bands.
    const double h = std::fmod(0.61803398874989485 * id, 1.0) * 6.0;
    const double s = (id / 3) % 2 == 0 ? 0.85 : 0.55;
    const double v = id % 3 == 0 ? 0.95 : (id % 3 == 1 ? 0.8 : 0.65);
    const int sector = static_cast<int>(h) % 6;
    const double frac = h - std::floor(h);
    const double p = v * (1 - s), q = v * (1 - s * frac), t = v * (1 - s * (1 - frac));
    double r = 0, g = 0, b = 0;
    switch (sector) {
      case 0: r = v, g = t, b = p; break;
      case 1: r = q, g = v, b = p; break;
      case 2: r = p, g = v, b = t; break;
      case 3: r = p, g = q, b = v; break;
      case 4: r = t, g = p, b = v; break;
      default: r = v, g = p, b = q; break;
    }
    colors.push_back({static_cast<std::uint8_t>(std::lround(r * 255)),
                      static_cast<std::uint8_t>(std::lround(g * 255)),
                      static_cast<std::uint8_t>(std::lround(b * 255))});
  }
  return colors;
}

std::vector<int> read_labels(std::string_view text) {
  std::size_t first = 0;
  while (first < text.size() && is_space(text[first])) ++first;
  std::vector<int> labels;
  if (first < text.size() && text[first] == '[') {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("label JSON: ") + e.what(), 0, e.byte);
    }
    if (!doc.is_array()) throw ParseError("label JSON must be an array", 0);
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const auto& item = doc[i];
      if (!item.is_number_integer()) {
        throw ParseError("label JSON element " + std::to_string(i) + " is not an integer", 0);
      }
      const auto v = item.get<long long>();
      if (v < 0 || v > std::numeric_limits<int>::max()) {
        throw ParseError("label JSON element " + std::to_string(i) + " is negative or too large", 0);
      }
      labels.push_back(static_cast<int>(v));
    }
    return labels;
  }

  LineReader reader(text);
  std::string_view line;
  while (reader.next(line)) {
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    long long v = 0;
    if (tokens.size() != 1 || !parse_number(tokens[0], v)) {
      fail_at_line(reader.line_no(), "expected one integer label, got '" + std::string(line) + "'");
    }
    if (v < 0) fail_at_line(reader.line_no(), "negative label " + std::to_string(v));
    if (v > std::numeric_limits<int>::max()) fail_at_line(reader.line_no(), "label too large");
    labels.push_back(static_cast<int>(v));
  }
  return labels;
}

std::string write_labels(std::span<const int> labels) {
  std::string out;
  out.reserve(labels.size() * 3);
  for (int v : labels) {
    out += std::to_string(v);
    out += '\n';
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace toothseg
