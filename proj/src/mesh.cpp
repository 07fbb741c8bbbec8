#include "toothseg/mesh.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>
#include <tuple>
#include <unordered_map>

namespace toothseg {

namespace {

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

struct EdgeRecord {
  std::uint32_t faces[2];
  std::uint32_t count = 0;
};

}  // namespace

Vec3 TriangleMesh::centroid(std::size_t f) const {
  const Face& t = faces[f];
  return (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0;
}

double TriangleMesh::area(std::size_t f) const {
  const Face& t = faces[f];
  return 0.5 * (vertices[t[1]] - vertices[t[0]])
                   .cross(vertices[t[2]] - vertices[t[0]])
                   .norm();
}

Vec3 face_normal(const Vec3& a, const Vec3& b, const Vec3& c) {
  Vec3 n = (b - a).cross(c - a);
  const double len = n.norm();
  if (len == 0.0) return Vec3::Zero();
  return n / len;
}

TriangleMesh make_mesh(std::vector<Vec3> vertices, std::vector<Face> faces) {
  if (vertices.empty() || faces.empty()) {
    throw MeshError("empty mesh: " + std::to_string(vertices.size()) +
                    " vertices, " + std::to_string(faces.size()) + " faces");
  }
  const auto nv = static_cast<std::uint32_t>(vertices.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (std::uint32_t idx : faces[f]) {
      if (idx >= nv) {
        std::ostringstream msg;
        msg << "face " << f << " references vertex " << idx
            << " but the mesh has only " << nv << " vertices";
        throw MeshError(msg.str());
      }
    }
  }

  TriangleMesh mesh;
  mesh.vertices = std::move(vertices);
  mesh.faces = std::move(faces);
  mesh.face_normals.resize(mesh.faces.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& t = mesh.faces[f];
    if (mesh.area(f) < kDegenerateAreaTolerance) {
      std::ostringstream msg;
      msg << "face " << f << " (" << t[0] << ", " << t[1] << ", " << t[2]
          << ") is degenerate (area below " << kDegenerateAreaTolerance << ")";
      throw MeshError(msg.str());
    }
    mesh.face_normals[f] =
        face_normal(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
  }

  std::unordered_map<std::uint64_t, EdgeRecord> edges;
  edges.reserve(mesh.faces.size() * 2);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& t = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t a = t[k], b = t[(k + 1) % 3];
      EdgeRecord& rec = edges[edge_key(a, b)];
      if (rec.count == 2) {
        std::ostringstream msg;
        msg << "non-manifold edge (" << std::min(a, b) << ", " << std::max(a, b)
            << ") is shared by faces " << rec.faces[0] << ", " << rec.faces[1]
            << " and " << f;
        throw MeshError(msg.str());
      }
      rec.faces[rec.count++] = static_cast<std::uint32_t>(f);
    }
  }

  mesh.adjacency.assign(mesh.faces.size(), {});
  for (const auto& [key, rec] : edges) {
    if (rec.count == 2 && rec.faces[0] != rec.faces[1]) {
      mesh.adjacency[rec.faces[0]].push_back(rec.faces[1]);
      mesh.adjacency[rec.faces[1]].push_back(rec.faces[0]);
    }
  }
  for (auto& adj : mesh.adjacency) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
  }
  return mesh;
}

TriangleMesh with_vertices(const TriangleMesh& mesh, std::vector<Vec3> vertices) {
  if (vertices.size() != mesh.vertices.size()) {
    throw MeshError("vertex count changed from " +
                    std::to_string(mesh.vertices.size()) + " to " +
                    std::to_string(vertices.size()));
  }
  TriangleMesh out = mesh;
  out.vertices = std::move(vertices);
  for (std::size_t f = 0; f < out.faces.size(); ++f) {
    const Face& t = out.faces[f];
    out.face_normals[f] =
        face_normal(out.vertices[t[0]], out.vertices[t[1]], out.vertices[t[2]]);
  }
  return out;
}

std::vector<InteriorEdge> interior_edges(const TriangleMesh& mesh) {
  std::unordered_map<std::uint64_t, std::size_t> first_seen;
  first_seen.reserve(mesh.faces.size() * 2);
  std::vector<InteriorEdge> result;
  result.reserve(mesh.faces.size() * 3 / 2);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& t = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t a = t[k], b = t[(k + 1) % 3];
      const auto key = edge_key(a, b);
      auto it = first_seen.find(key);
      if (it == first_seen.end()) {
        first_seen.emplace(key, f);
      } else {
        InteriorEdge e{a, b, static_cast<std::uint32_t>(it->second),
                       static_cast<std::uint32_t>(f)};
        // Orient (v0 -> v1) along the winding of f0.
        const Face& t0 = mesh.faces[it->second];
        for (int j = 0; j < 3; ++j) {
          const std::uint32_t p = t0[j], q = t0[(j + 1) % 3];
          if (edge_key(p, q) == key) {
            e.v0 = p;
            e.v1 = q;
          }
        }
        result.push_back(e);
      }
    }
  }
  // Deterministic order independent of hash iteration.
  std::sort(result.begin(), result.end(), [](const InteriorEdge& x, const InteriorEdge& y) {
    return std::tie(x.f0, x.f1) < std::tie(y.f0, y.f1);
  });
  return result;
}

std::vector<std::size_t> face_component_sizes(const TriangleMesh& mesh) {
  std::vector<int> seen(mesh.faces.size(), 0);
  std::vector<std::size_t> sizes;
  std::vector<std::uint32_t> stack;
  for (std::size_t s = 0; s < mesh.faces.size(); ++s) {
    if (seen[s]) continue;
    std::size_t count = 0;
    stack.push_back(static_cast<std::uint32_t>(s));
    seen[s] = 1;
    while (!stack.empty()) {
      const auto f = stack.back();
      stack.pop_back();
      ++count;
      for (auto g : mesh.adjacency[f]) {
        if (!seen[g]) {
          seen[g] = 1;
          stack.push_back(g);
        }
      }
    }
    sizes.push_back(count);
  }
  std::sort(sizes.rbegin(), sizes.rend());
  return sizes;
}

double bounding_box_diagonal(const TriangleMesh& mesh) {
  Vec3 lo = mesh.vertices.front(), hi = mesh.vertices.front();
  for (const auto& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).norm();
}

std::uint64_t content_hash(const TriangleMesh& mesh) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::uint64_t counts[2] = {mesh.vertices.size(), mesh.faces.size()};
  feed(counts, sizeof counts);
  for (const auto& v : mesh.vertices) {
    const double xyz[3] = {v.x(), v.y(), v.z()};
    feed(xyz, sizeof xyz);
  }
  for (const auto& f : mesh.faces) feed(f.data(), sizeof(std::uint32_t) * 3);
  return h;
}

FaceLabels attach_labels(std::vector<int> labels, std::size_t face_count,
                         int num_classes) {
  if (labels.size() != face_count) {
    throw Error("label count " + std::to_string(labels.size()) +
                " does not match face count " + std::to_string(face_count));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw Error("label " + std::to_string(labels[i]) + " at face " +
                  std::to_string(i) + " is outside [0, " +
                  std::to_string(num_classes) + ")");
    }
  }
  return FaceLabels{std::move(labels), num_classes};
}

}  // namespace toothseg
