#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "toothseg/common.hpp"

namespace toothseg {

using Face = std::array<std::uint32_t, 3>;

inline constexpr double kDegenerateAreaTolerance = 1e-12;
inline constexpr int kDefaultClassCount = 15;  // gingiva + 14 teeth

/// Indexed triangle mesh. Construct through make_mesh() so the invariants
/// (valid indices, no degenerate faces, manifold edges) always hold.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<Vec3> face_normals;
  // Faces sharing an edge with each face, sorted ascending.
  std::vector<std::vector<std::uint32_t>> adjacency;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }

  Vec3 centroid(std::size_t f) const;
  double area(std::size_t f) const;
};

/// An edge shared by two faces. f0 holds the edge as (v0 -> v1) in its
/// winding; f1 is the other incident face.
struct InteriorEdge {
  std::uint32_t v0, v1;
  std::uint32_t f0, f1;
};

/// Validates the face list against the vertices and builds normals and
/// adjacency. Throws MeshError on empty input, out-of-range indices,
/// degenerate faces, or edges with three or more incident faces.
TriangleMesh make_mesh(std::vector<Vec3> vertices, std::vector<Face> faces);

/// Recomputes normals for new vertex positions, keeping topology.
TriangleMesh with_vertices(const TriangleMesh& mesh, std::vector<Vec3> vertices);

Vec3 face_normal(const Vec3& a, const Vec3& b, const Vec3& c);

std::vector<InteriorEdge> interior_edges(const TriangleMesh& mesh);

/// Sizes of the edge-connected components of the face graph, largest first.
std::vector<std::size_t> face_component_sizes(const TriangleMesh& mesh);

/// Axis-aligned bounding box diagonal length.
double bounding_box_diagonal(const TriangleMesh& mesh);

/// 64-bit FNV-1a over vertex coordinates and face indices.
std::uint64_t content_hash(const TriangleMesh& mesh);

/// Per-face ground-truth classes for one mesh.
struct FaceLabels {
  std::vector<int> labels;
  int num_classes = kDefaultClassCount;

  std::size_t size() const { return labels.size(); }
};

/// Checks the label count against the mesh and every label against the class
/// count. Throws Error on mismatch.
FaceLabels attach_labels(std::vector<int> labels, std::size_t face_count,
                         int num_classes = kDefaultClassCount);

}  // namespace toothseg
